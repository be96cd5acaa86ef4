#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mgt/errors.hpp"

namespace mgt {

/// Value of a temperature law together with its first two derivatives.
struct Jet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

enum class CoefficientKind { constant, polynomial, exponential, tabulated };

inline const char* to_string(CoefficientKind k) {
    switch (k) {
        case CoefficientKind::constant: return "constant";
        case CoefficientKind::polynomial: return "polynomial";
        case CoefficientKind::exponential: return "exponential";
        case CoefficientKind::tabulated: return "tabulated";
    }
    return "?";
}

/// Concrete realization of a temperature-dependent law.
///
///   constant     params = {c}
///   polynomial   params = {c0, c1, ..., cm}          sum c_k T^k
///   exponential  params = {a, b, c}                  a exp(b T) + c
///   tabulated    abscissae (strictly increasing) + params (ordinates),
///                natural cubic spline, end cubics continued outside the table
struct CoefficientSpec {
    CoefficientKind kind = CoefficientKind::constant;
    std::vector<double> params{1.0};
    std::vector<double> abscissae;

    static CoefficientSpec constant(double c) { return {CoefficientKind::constant, {c}, {}}; }
    static CoefficientSpec polynomial(std::vector<double> coeffs) {
        return {CoefficientKind::polynomial, std::move(coeffs), {}};
    }
    static CoefficientSpec exponential(double a, double b, double c = 0.0) {
        return {CoefficientKind::exponential, {a, b, c}, {}};
    }
    static CoefficientSpec tabulated(std::vector<double> theta, std::vector<double> values) {
        return {CoefficientKind::tabulated, std::move(values), std::move(theta)};
    }
};

/// Immutable evaluator for a CoefficientSpec, optionally scaled by a constant.
///
/// Arguments below zero are mapped to zero (constant continuation), so the
/// derivatives vanish there.
class Coefficient {
public:
    Coefficient() : Coefficient(CoefficientSpec::constant(1.0)) {}
    explicit Coefficient(CoefficientSpec spec, double scale = 1.0)
        : spec_(std::move(spec)), scale_(scale) {
        check_spec();
        if (spec_.kind == CoefficientKind::tabulated) build_spline();
    }
    static Coefficient constant(double c) { return Coefficient(CoefficientSpec::constant(c)); }

    [[nodiscard]] const CoefficientSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] double scale() const noexcept { return scale_; }

    [[nodiscard]] Coefficient scaled(double factor) const {
        Coefficient out = *this;
        out.scale_ *= factor;
        return out;
    }

    [[nodiscard]] Jet jet(double theta) const {
        if (theta < 0.0) {
            Jet j = raw(0.0);
            return {scale_ * j.value, 0.0, 0.0};
        }
        Jet j = raw(theta);
        return {scale_ * j.value, scale_ * j.d1, scale_ * j.d2};
    }
    [[nodiscard]] double operator()(double theta) const { return jet(theta).value; }
    [[nodiscard]] double d1(double theta) const { return jet(theta).d1; }
    [[nodiscard]] double d2(double theta) const { return jet(theta).d2; }

    [[nodiscard]] bool is_constant() const noexcept {
        if (scale_ == 0.0) return true;
        switch (spec_.kind) {
            case CoefficientKind::constant: return true;
            case CoefficientKind::polynomial:
                return std::all_of(spec_.params.begin() + 1, spec_.params.end(),
                                   [](double c) { return c == 0.0; });
            case CoefficientKind::exponential: return spec_.params[0] == 0.0 || spec_.params[1] == 0.0;
            case CoefficientKind::tabulated: return false;
        }
        return false;
    }

private:
    void check_spec() const {
        const auto& p = spec_.params;
        switch (spec_.kind) {
            case CoefficientKind::constant:
                if (p.size() != 1) throw ValidationError("constant coefficient needs exactly 1 parameter");
                break;
            case CoefficientKind::polynomial:
                if (p.empty()) throw ValidationError("polynomial coefficient needs at least 1 parameter");
                break;
            case CoefficientKind::exponential:
                if (p.size() != 3) throw ValidationError("exponential coefficient needs parameters [a, b, c]");
                break;
            case CoefficientKind::tabulated: {
                const auto& x = spec_.abscissae;
                if (x.size() != p.size() || x.size() < 2)
                    throw ValidationError("tabulated coefficient needs >= 2 (theta, value) pairs");
                for (std::size_t i = 1; i < x.size(); ++i)
                    if (!(x[i] > x[i - 1]))
                        throw ValidationError("tabulated coefficient abscissae must be strictly increasing");
                break;
            }
        }
        for (double v : p)
            if (!std::isfinite(v)) throw ValidationError("non-finite coefficient parameter");
    }

    // natural cubic spline: second derivatives at the knots
    void build_spline() {
        const auto& x = spec_.abscissae;
        const auto& y = spec_.params;
        const std::size_t n = x.size();
        m_.assign(n, 0.0);
        if (n < 3) return;
        std::vector<double> diag(n - 2), upper(n - 2), rhs(n - 2);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        // row k couples m_{k} (lower, weight x[k+1]-x[k]) to m_{k+1} (diagonal)
        for (std::size_t k = 1; k < n - 2; ++k) {
            const double f = (x[k + 1] - x[k]) / diag[k - 1];
            diag[k] -= f * upper[k - 1];
            rhs[k] -= f * rhs[k - 1];
        }
        for (std::size_t k = n - 2; k-- > 0;) {
            double r = rhs[k];
            if (k + 1 < n - 2) r -= upper[k] * m_[k + 2];
            m_[k + 1] = r / diag[k];
        }
    }

    [[nodiscard]] Jet raw(double t) const {
        const auto& p = spec_.params;
        switch (spec_.kind) {
            case CoefficientKind::constant: return {p[0], 0.0, 0.0};
            case CoefficientKind::polynomial: {
                double v = 0.0, d1 = 0.0, d2 = 0.0;
                for (std::size_t k = p.size(); k-- > 0;) {
                    d2 = d2 * t + 2.0 * d1;
                    d1 = d1 * t + v;
                    v = v * t + p[k];
                }
                return {v, d1, d2};
            }
            case CoefficientKind::exponential: {
                const double e = p[0] * std::exp(p[1] * t);
                return {e + p[2], p[1] * e, p[1] * p[1] * e};
            }
            case CoefficientKind::tabulated: return spline(t);
        }
        return {};
    }

    [[nodiscard]] Jet spline(double t) const {
        const auto& x = spec_.abscissae;
        const auto& y = spec_.params;
        const std::size_t n = x.size();
        std::size_t i = 0;
        if (t >= x[n - 1]) {
            i = n - 2;
        } else if (t > x[0]) {
            i = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
        }
        const double h = x[i + 1] - x[i];
        const double a = x[i + 1] - t, b = t - x[i];
        const double mi = m_[i], mj = m_[i + 1];
        const double v = mi * a * a * a / (6 * h) + mj * b * b * b / (6 * h) +
                         (y[i] / h - mi * h / 6) * a + (y[i + 1] / h - mj * h / 6) * b;
        const double d1 = -mi * a * a / (2 * h) + mj * b * b / (2 * h) - (y[i] / h - mi * h / 6) +
                          (y[i + 1] / h - mj * h / 6);
        const double d2 = mi * a / h + mj * b / h;
        return {v, d1, d2};
    }

    CoefficientSpec spec_;
    double scale_ = 1.0;
    std::vector<double> m_;
};

}  // namespace mgt
