#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mgt/coefficient.hpp"
#include "mgt/errors.hpp"
#include "mgt/grid.hpp"

namespace mgt {

/// Standard linear solid (Zener) parameters.
struct ZenerMaterial {
    double tau_rel = 1.0;                       ///< relaxation time [s]
    double tau_ret = 2.0;                       ///< retardation time [s]
    Coefficient stiffness = Coefficient::constant(1.0);  ///< c(Theta) [Pa]
    double density = 1.0;                       ///< rho [kg/m^3]
    double diffusivity = 1.0;                   ///< D [m^2/s]
    double theta_max = 10.0;                    ///< upper end of the declared temperature range

    /// Throws InvalidMaterial naming the first violated condition.
    void validate() const {
        if (!(tau_rel > 0.0)) throw InvalidMaterial("tau_rel > 0 required");
        if (!(tau_ret > 0.0)) throw InvalidMaterial("tau_ret > 0 required");
        if (!(density > 0.0)) throw InvalidMaterial("density > 0 required");
        if (!(diffusivity > 0.0)) throw InvalidMaterial("diffusivity > 0 required");
        // equality is admitted: the loss term then vanishes
        if (tau_rel > tau_ret) throw InvalidMaterial("tau_rel < tau_ret required");
        if (!(theta_max > 0.0)) throw InvalidMaterial("theta_max > 0 required");
        constexpr int samples = 1001;
        for (int i = 0; i < samples; ++i) {
            const double th = theta_max * i / (samples - 1);
            const double c = stiffness(th);
            if (!(c > 0.0))
                throw InvalidMaterial("stiffness c(Theta) > 0 required on [0, theta_max]; c(" +
                                      std::to_string(th) + ") = " + std::to_string(c));
        }
    }
};

/// Coefficients of
///   u_ttt + alpha u_tt = (gamma(T) u_xt)_x + (ghat(T) u_x)_x,
///   T_t = D T_xx + Gamma(T) u_xt^2.
struct CoefficientSet {
    double alpha = 1.0;
    double D = 1.0;
    Coefficient gamma = Coefficient::constant(1.0);
    Coefficient ghat = Coefficient::constant(1.0);
    Coefficient Gamma = Coefficient::constant(0.0);

    static CoefficientSet constant(double alpha, double D, double gamma, double ghat, double Gamma) {
        return {alpha, D, Coefficient::constant(gamma), Coefficient::constant(ghat), Coefficient::constant(Gamma)};
    }
};

/// Map Zener parameters to system coefficients:
///   alpha = 1/tau_rel, gamma = c/rho, ghat = c/(rho tau_rel),
///   Gamma = (tau_ret - tau_rel) c, D = diffusivity.
inline CoefficientSet zener_to_coefficients(const ZenerMaterial& m) {
    m.validate();
    CoefficientSet c;
    c.alpha = 1.0 / m.tau_rel;
    c.D = m.diffusivity;
    c.gamma = m.stiffness.scaled(1.0 / m.density);
    c.ghat = m.stiffness.scaled(1.0 / (m.density * m.tau_rel));
    c.Gamma = m.stiffness.scaled(m.tau_ret - m.tau_rel);
    return c;
}

struct ValidationReport {
    double theta_max = 0.0;
    double min_gamma = 0.0, argmin_gamma = 0.0;
    double min_ghat = 0.0, argmin_ghat = 0.0;
    double min_Gamma = 0.0, argmin_Gamma = 0.0;
    /// worst relative mismatch of supplied derivatives against centered differences
    double derivative_error = 0.0;
    bool derivatives_consistent = true;
    bool passed = false;
    std::vector<std::string> failures;
};

namespace detail {

struct Extremum {
    double value = std::numeric_limits<double>::infinity();
    double where = 0.0;
};

/// Relative mismatch of the supplied d1/d2 against centered differences at x.
inline double derivative_mismatch(const Coefficient& f, double x, double step) {
    const Jet j = f.jet(x);
    const double fd1 = (f(x + step) - f(x - step)) / (2.0 * step);
    const double fd2 = (f.d1(x + step) - f.d1(x - step)) / (2.0 * step);
    const double s1 = std::max({std::abs(j.d1), std::abs(j.value), 1.0});
    const double s2 = std::max({std::abs(j.d2), std::abs(j.d1), std::abs(j.value), 1.0});
    return std::max(std::abs(fd1 - j.d1) / s1, std::abs(fd2 - j.d2) / s2);
}

}  // namespace detail

/// Dense-sample check of positivity (gamma, ghat > 0, Gamma >= 0) and derivative consistency.
inline ValidationReport validate_coefficients(const CoefficientSet& c, double theta_max, int samples = 1001) {
    if (!(theta_max > 0.0)) throw ValidationError("theta_max > 0 required");
    samples = std::max(samples, 1000);
    ValidationReport r;
    r.theta_max = theta_max;
    detail::Extremum g, gh, G;
    const double step = 1e-5 * std::max(1.0, theta_max);
    for (int i = 0; i < samples; ++i) {
        const double th = theta_max * i / (samples - 1);
        const double vg = c.gamma(th), vgh = c.ghat(th), vG = c.Gamma(th);
        if (vg < g.value) g = {vg, th};
        if (vgh < gh.value) gh = {vgh, th};
        if (vG < G.value) G = {vG, th};
        const double xc = std::clamp(th, step, theta_max);
        r.derivative_error = std::max({r.derivative_error, detail::derivative_mismatch(c.gamma, xc, step),
                                       detail::derivative_mismatch(c.ghat, xc, step),
                                       detail::derivative_mismatch(c.Gamma, xc, step)});
    }
    r.min_gamma = g.value;
    r.argmin_gamma = g.where;
    r.min_ghat = gh.value;
    r.argmin_ghat = gh.where;
    r.min_Gamma = G.value;
    r.argmin_Gamma = G.where;
    r.derivatives_consistent = r.derivative_error <= 1e-6;
    if (!(r.min_gamma > 0.0)) r.failures.push_back("gamma > 0 violated (min " + std::to_string(r.min_gamma) + ")");
    if (!(r.min_ghat > 0.0)) r.failures.push_back("ghat > 0 violated (min " + std::to_string(r.min_ghat) + ")");
    if (!(r.min_Gamma >= 0.0)) r.failures.push_back("Gamma >= 0 violated (min " + std::to_string(r.min_Gamma) + ")");
    r.passed = r.failures.empty();
    return r;
}

/// Closed-form or tabulated description of one initial field on [0, L].
struct FieldSpec {
    enum class Kind { constant, cosine_series, polynomial, tabulated };
    Kind kind = Kind::constant;
    double offset = 0.0;                            ///< constant value / series offset
    std::vector<std::pair<double, double>> modes;   ///< (k, amplitude): amplitude cos(k pi x / L)
    std::vector<double> coeffs;                     ///< polynomial in x
    std::vector<double> values;                     ///< node values (tabulated)

    static FieldSpec zero() { return {}; }
    static FieldSpec constant(double c) {
        FieldSpec s;
        s.offset = c;
        return s;
    }
    static FieldSpec cosine(std::vector<std::pair<double, double>> modes, double offset = 0.0) {
        FieldSpec s;
        s.kind = Kind::cosine_series;
        s.modes = std::move(modes);
        s.offset = offset;
        return s;
    }
    static FieldSpec polynomial(std::vector<double> coeffs) {
        FieldSpec s;
        s.kind = Kind::polynomial;
        s.coeffs = std::move(coeffs);
        return s;
    }
    static FieldSpec tabulated(std::vector<double> values) {
        FieldSpec s;
        s.kind = Kind::tabulated;
        s.values = std::move(values);
        return s;
    }
};

struct InitialData {
    GridFunction u0, u0t, u0tt, theta0;
    bool means_removed = false;

    [[nodiscard]] const Grid& grid() const { return u0.grid; }
};

namespace detail {

inline constexpr double neumann_tolerance = 1e-10;

inline void check_cosine_modes(const FieldSpec& s, const char* name) {
    for (const auto& [k, a] : s.modes) {
        if (!std::isfinite(k) || !std::isfinite(a)) throw ValidationError(std::string(name) + ": non-finite mode");
        if (k < 0.0 || std::floor(k) != k)
            throw IncompatibleBoundary(std::string(name) + ": cosine modes need non-negative integer k");
    }
}

/// Samples a field spec; `neumann` requests the zero-slope check and projection.
inline GridFunction sample_field(const FieldSpec& s, const Grid& g, bool neumann, const char* name) {
    GridFunction out(g);
    switch (s.kind) {
        case FieldSpec::Kind::constant: out.values.setConstant(s.offset); break;
        case FieldSpec::Kind::cosine_series:
            check_cosine_modes(s, name);
            out = GridFunction::sample(g, [&](double x) {
                double v = s.offset;
                for (const auto& [k, a] : s.modes) v += a * std::cos(k * std::numbers::pi * x / g.L);
                return v;
            });
            break;
        case FieldSpec::Kind::polynomial: {
            auto eval = [&](double x, bool derivative) {
                double v = 0.0;
                for (std::size_t k = s.coeffs.size(); k-- > 0;) {
                    if (derivative) {
                        if (k == 0) break;
                        v = v * x + static_cast<double>(k) * s.coeffs[k];
                    } else {
                        v = v * x + s.coeffs[k];
                    }
                }
                return v;
            };
            out = GridFunction::sample(g, [&](double x) { return eval(x, false); });
            if (neumann) {
                const double scale = std::max(1.0, out.max_abs() / g.L);
                const double s0 = std::abs(eval(0.0, true)), s1 = std::abs(eval(g.L, true));
                if (std::max(s0, s1) > neumann_tolerance * scale)
                    throw IncompatibleBoundary(std::string(name) + ": endpoint derivative " +
                                               std::to_string(std::max(s0, s1)) + " violates u_x = 0");
            }
            break;
        }
        case FieldSpec::Kind::tabulated:
            if (s.values.size() != g.n)
                throw ValidationError(std::string(name) + ": tabulated field needs one value per node");
            out = GridFunction(g, Eigen::Map<const Vec>(s.values.data(), static_cast<Eigen::Index>(s.values.size())));
            if (neumann) {
                // reject data whose raw endpoint slope exceeds 1% of the full-scale slope,
                // then project so the one-sided slope vanishes
                const std::size_t n = g.n;
                const double h = g.h();
                const double slope0 = (-3.0 * out[0] + 4.0 * out[1] - out[2]) / (2.0 * h);
                const double slope1 = (3.0 * out[n - 1] - 4.0 * out[n - 2] + out[n - 3]) / (2.0 * h);
                const double allowed = 1e-2 * std::max(out.max_abs(), std::numeric_limits<double>::min()) / g.L;
                if (std::max(std::abs(slope0), std::abs(slope1)) > allowed)
                    throw IncompatibleBoundary(std::string(name) + ": tabulated endpoint slope too large for u_x = 0");
                out[0] = (4.0 * out[1] - out[2]) / 3.0;
                out[n - 1] = (4.0 * out[n - 2] - out[n - 3]) / 3.0;
            }
            break;
    }
    if (!out.all_finite()) throw ValidationError(std::string(name) + ": non-finite initial values");
    return out;
}

}  // namespace detail

/// Evaluate the four initial fields on `g`, optionally removing the spatial
/// means of u0, u0t, u0tt, and check Neumann compatibility and Theta0 >= 0.
inline InitialData make_initial_data(const FieldSpec& u0, const FieldSpec& u0t, const FieldSpec& u0tt,
                                     const FieldSpec& theta0, const Grid& g, bool remove_means) {
    InitialData d;
    d.u0 = detail::sample_field(u0, g, true, "u0");
    d.u0t = detail::sample_field(u0t, g, true, "u0t");
    d.u0tt = detail::sample_field(u0tt, g, false, "u0tt");
    d.theta0 = detail::sample_field(theta0, g, true, "theta0");
    if (remove_means) {
        for (GridFunction* f : {&d.u0, &d.u0t, &d.u0tt}) {
            f->values.array() -= mean(*f);
            // a second pass removes the rounding left by the first
            f->values.array() -= mean(*f);
        }
        d.means_removed = true;
    }
    for (std::size_t i = 0; i < g.n; ++i)
        if (d.theta0[i] < 0.0)
            throw NegativeTemperature("theta0 < 0 at x = " + std::to_string(g.x(i)) + " (" +
                                      std::to_string(d.theta0[i]) + ")");
    return d;
}

}  // namespace mgt
