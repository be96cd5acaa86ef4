#pragma once

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mgt/dynamics.hpp"
#include "mgt/errors.hpp"
#include "mgt/grid.hpp"
#include "mgt/model.hpp"

namespace mgt {

/// Extrema of the coefficients on [0, M] and the derived weights of the
/// energy and difference functionals.
struct ConstantsEstimate {
    double M = 0.0;
    double k1 = 0, k2 = 0;  ///< inf / sup gamma
    double k3 = 0, k4 = 0;  ///< inf / sup ghat
    double k5 = 0;          ///< sup Gamma
    double k6 = 0, k7 = 0;  ///< sup |gamma'|, sup |ghat'|
    double k8 = 0, k9 = 0;  ///< sup |gamma''|, sup |ghat''|
    double k10 = 0;         ///< sup |Gamma'|
    double B = 0, k12 = 0;
    double B1 = 0, B2 = 1.0;

    /// Fills B = 4 k4^2 / k1, k12 = max{2, 4/k1, 4/B, 1/k3}, B1 = 4 k4^2 / k1.
    void derive() {
        B = 4.0 * k4 * k4 / k1;
        k12 = std::max({2.0, 4.0 / k1, 4.0 / B, 1.0 / k3});
        B1 = 4.0 * k4 * k4 / k1;
    }
};

namespace detail {

/// Extremum of f on [0, M]: dense samples plus the given breakpoints, then
/// Brent refinement around the best sample.
template <class F>
double sampled_extremum(F f, double M, bool maximize, const std::vector<double>& breakpoints = {},
                        std::size_t samples = 4096) {
    const double sign = maximize ? -1.0 : 1.0;
    std::size_t best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    auto node = [&](std::size_t j) { return j + 1 == samples ? M : M * static_cast<double>(j) / (samples - 1); };
    for (std::size_t j = 0; j < samples; ++j) {
        const double v = sign * f(node(j));
        if (v < best_v) {
            best_v = v;
            best = j;
        }
    }
    const double lo = node(best > 0 ? best - 1 : 0), hi = node(std::min(best + 1, samples - 1));
    if (hi > lo) {
        auto r = boost::math::tools::brent_find_minima([&](double x) { return sign * f(x); }, lo, hi, 52);
        best_v = std::min(best_v, r.second);
    }
    for (double x : breakpoints)
        if (x > 0.0 && x < M) best_v = std::min(best_v, sign * f(x));
    return sign * best_v;
}

}  // namespace detail

/// Sampled (>= 4096 points) coefficient extrema on [0, M], with 1% inflation of
/// maxima and deflation of minima.
inline ConstantsEstimate estimate_k_constants(const CoefficientSet& c, double M, double B2 = 1.0) {
    if (!(M > 0.0)) throw ValidationError("estimate_k_constants: M > 0 required");
    auto knots = [](const Coefficient& f) {
        return f.spec().kind == CoefficientKind::tabulated ? f.spec().abscissae : std::vector<double>{};
    };
    auto sampled_extremum = [&](auto fn, const Coefficient& f, bool maximize) {
        return detail::sampled_extremum(fn, M, maximize, knots(f));
    };
    auto val = [](const Coefficient& f) { return [&f](double x) { return f(x); }; };
    auto abs1 = [](const Coefficient& f) { return [&f](double x) { return std::abs(f.d1(x)); }; };
    auto abs2 = [](const Coefficient& f) { return [&f](double x) { return std::abs(f.d2(x)); }; };
    const double min_gamma = sampled_extremum(val(c.gamma), c.gamma, false);
    const double min_ghat = sampled_extremum(val(c.ghat), c.ghat, false);
    if (!(min_gamma > 0.0))
        throw DegenerateCoefficient("gamma is not positive on [0, M]: min " + std::to_string(min_gamma));
    if (!(min_ghat > 0.0))
        throw DegenerateCoefficient("ghat is not positive on [0, M]: min " + std::to_string(min_ghat));
    constexpr double up = 1.01, down = 0.99;
    ConstantsEstimate k;
    k.M = M;
    k.k1 = down * min_gamma;
    k.k2 = up * sampled_extremum(val(c.gamma), c.gamma, true);
    k.k3 = down * min_ghat;
    k.k4 = up * sampled_extremum(val(c.ghat), c.ghat, true);
    k.k5 = up * std::max(0.0, sampled_extremum(val(c.Gamma), c.Gamma, true));
    k.k6 = up * sampled_extremum(abs1(c.gamma), c.gamma, true);
    k.k7 = up * sampled_extremum(abs1(c.ghat), c.ghat, true);
    k.k8 = up * sampled_extremum(abs2(c.gamma), c.gamma, true);
    k.k9 = up * sampled_extremum(abs2(c.ghat), c.ghat, true);
    k.k10 = up * sampled_extremum(abs1(c.Gamma), c.Gamma, true);
    k.B2 = B2;
    k.derive();
    return k;
}

/// Default range bound M = 8 (|Theta0|_inf + |Theta0_t|_inf) + 1, with
/// Theta0_t = D lap Theta0 + Gamma(Theta0) (u0t)_x^2.
inline double default_theta_bound(const InitialData& d, const CoefficientSet& c) {
    const GridFunction theta_t = c.D * laplacian(d.theta0) + detail::heating(c, d.theta0, d.u0t);
    return 8.0 * (d.theta0.max_abs() + theta_t.max_abs()) + 1.0;
}

/// Derivatives of a node field under its even reflection across both ends
/// (the extension implied by the Neumann operators): centered stencils with
/// ghost values p_{-j} = p_j and p_{n-1+j} = p_{n-1-j}, second order up to the
/// boundary; odd derivatives vanish at the end nodes.
struct ReflectedDerivatives {
    GridFunction d1, d2, d3, d4;

    explicit ReflectedDerivatives(const GridFunction& p, int order = 4) {
        const Grid& g = p.grid;
        const auto n = static_cast<long>(g.n);
        const double h = g.h();
        auto at = [&](long i) {
            if (i < 0) i = -i;
            if (i > n - 1) i = 2 * (n - 1) - i;
            return p[static_cast<std::size_t>(i)];
        };
        d1 = GridFunction(g);
        d2 = GridFunction(g);
        if (order >= 3) d3 = GridFunction(g);
        if (order >= 4) d4 = GridFunction(g);
        for (long i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double m2 = at(i - 2), m1 = at(i - 1), c0 = at(i), p1 = at(i + 1), p2 = at(i + 2);
            d1[k] = (p1 - m1) / (2.0 * h);
            d2[k] = (p1 - 2.0 * c0 + m1) / (h * h);
            if (order >= 3) d3[k] = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h);
            if (order >= 4) d4[k] = (p2 - 4.0 * p1 + 6.0 * c0 - 4.0 * m1 + m2) / (h * h * h * h);
        }
        d1[0] = d1[g.n - 1] = 0.0;
        if (order >= 3) d3[0] = d3[g.n - 1] = 0.0;
    }
};

inline constexpr std::size_t energy_term_count = 5;

struct EnergyReport {
    double t = 0.0;
    double y = 0.0;
    /// 1/2 int w_x^2, 1/2 int gamma v_xx^2, int ghat u_xx v_xx, B/2 int u_xx^2, eps int ghat u_xxx^2
    std::array<double, energy_term_count> terms{};
    /// int w_x^2 + int v_xx^2 + int u_xx^2 + eps int u_xxx^2
    double seminorm_sum = 0.0;
    double identity_residual = std::numeric_limits<double>::quiet_NaN();
    double k13_fitted = std::numeric_limits<double>::quiet_NaN();
};

/// The energy functional y_eps of a state.
inline EnergyReport energy_y(const State& s, const CoefficientSet& c, const ConstantsEstimate& k, double eps) {
    s.check_grids();
    const Grid& g = s.grid();
    const ReflectedDerivatives U(s.u, 3), V(s.v, 2), W(s.w, 1);
    const GridFunction gam = detail::evaluate(c.gamma, s.theta);
    const GridFunction gh = detail::evaluate(c.ghat, s.theta);
    auto I = [&](const Vec& f) { return integrate(g, f); };
    const Vec& wx = W.d1.values;
    const Vec& vxx = V.d2.values;
    const Vec& uxx = U.d2.values;
    const Vec& uxxx = U.d3.values;
    EnergyReport r;
    r.t = s.t;
    r.terms[0] = 0.5 * I(wx.array().square());
    r.terms[1] = 0.5 * I(gam.values.array() * vxx.array().square());
    r.terms[2] = I(gh.values.array() * uxx.array() * vxx.array());
    r.terms[3] = 0.5 * k.B * I(uxx.array().square());
    r.terms[4] = eps == 0.0 ? 0.0 : eps * I(gh.values.array() * uxxx.array().square());
    for (double t : r.terms) r.y += t;
    r.seminorm_sum = I(wx.array().square()) + I(vxx.array().square()) + I(uxx.array().square()) +
                     (eps == 0.0 ? 0.0 : eps * I(uxxx.array().square()));
    return r;
}

inline std::vector<EnergyReport> energy_series(const Trajectory& tr, const CoefficientSet& c,
                                               const ConstantsEstimate& k, double eps) {
    std::vector<EnergyReport> out;
    out.reserve(tr.size());
    for (const auto& s : tr.snapshots) out.push_back(energy_y(s, c, k, eps));
    return out;
}

/// Worst signed slack min_t (k12 y - seminorm_sum) relative to max(1, seminorm_sum).
inline double lower_bound_slack(const std::vector<EnergyReport>& series, const ConstantsEstimate& k) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& r : series)
        worst = std::min(worst, (k.k12 * r.y - r.seminorm_sum) / std::max(1.0, r.seminorm_sum));
    return worst;
}

inline constexpr std::size_t identity_term_count = 14;

/// Dissipation and source integrals of the energy balance at one instant.
struct IdentityBalance {
    double bracket = 0.0;      ///< y without the B term
    double dissipation = 0.0;  ///< alpha w_x^2 + eps w_xx^2 + eps gamma v_xxx^2 + 2 eps^2 ghat u_xxxx^2
    std::array<double, identity_term_count> terms{};
    [[nodiscard]] double source() const {
        double s = 0.0;
        for (double t : terms) s += t;
        return s;
    }
};

/// Evaluates the integrals of the energy balance for the eps-system at a state;
/// Theta_t is taken from D lap Theta + Gamma(Theta) v_x^2.
inline IdentityBalance identity_balance(const State& s, const CoefficientSet& c, double eps) {
    s.check_grids();
    const Grid& g = s.grid();
    const ReflectedDerivatives U(s.u, 4), V(s.v, 3), W(s.w, 2), T(s.theta, 2);
    const std::size_t n = g.n;
    Vec gam(n), gam1(n), gam2(n), gh(n), gh1(n), gh2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Jet a = c.gamma.jet(s.theta[i]), b = c.ghat.jet(s.theta[i]);
        const auto ii = static_cast<Eigen::Index>(i);
        gam[ii] = a.value;
        gam1[ii] = a.d1;
        gam2[ii] = a.d2;
        gh[ii] = b.value;
        gh1[ii] = b.d1;
        gh2[ii] = b.d2;
    }
    const Vec theta_t = (c.D * laplacian(s.theta) + detail::heating(c, s.theta, s.v)).values;
    const auto wx = W.d1.values.array(), wxx = W.d2.values.array();
    const auto vx = V.d1.values.array(), vxx = V.d2.values.array(), vxxx = V.d3.values.array();
    const auto ux = U.d1.values.array(), uxx = U.d2.values.array(), uxxx = U.d3.values.array(),
               uxxxx = U.d4.values.array();
    const auto tx = T.d1.values.array(), txx = T.d2.values.array(), tt = theta_t.array();
    const auto G = gam.array(), G1 = gam1.array(), G2 = gam2.array();
    const auto H = gh.array(), H1 = gh1.array(), H2 = gh2.array();
    auto I = [&](const auto& expr) { return integrate(g, Vec(expr)); };

    IdentityBalance b;
    b.bracket = 0.5 * I(wx.square()) + 0.5 * I(G * vxx.square()) + I(H * uxx * vxx) + eps * I(H * uxxx.square());
    b.dissipation = c.alpha * I(wx.square()) + eps * I(wxx.square()) + eps * I(G * vxxx.square()) +
                    2.0 * eps * eps * I(H * uxxxx.square());
    auto& r = b.terms;
    r[0] = I(H * vxx.square());
    r[1] = 0.5 * I(G1 * tt * vxx.square());
    r[2] = I(H1 * tt * uxx * vxx);
    r[3] = I(G1 * tx * vxx * wx);
    r[4] = I(H1 * tx * uxx * wx);
    r[5] = I(G1 * txx * vx * wx);
    r[6] = I(H1 * txx * ux * wx);
    r[7] = I(G2 * tx.square() * vx * wx);
    r[8] = I(H2 * tx.square() * ux * wx);
    r[9] = eps * I(H1 * tt * uxxx.square());
    r[10] = -eps * I(G1 * tx * vxx * vxxx);
    r[11] = -eps * I(H1 * tx * uxx * vxxx);
    r[12] = -eps * I(H1 * tx * uxxx * vxx);
    r[13] = -2.0 * eps * eps * I(H1 * tx * uxxx * uxxxx);
    return b;
}

/// Residual of the energy balance along a trajectory, at interior snapshot times.
struct IdentityResidual {
    std::vector<double> t, lhs, rhs, residual;
    std::vector<std::array<double, identity_term_count>> terms;

    /// Trapezoidal L1-in-time norm of the residual.
    [[nodiscard]] double l1() const {
        double s = 0.0;
        for (std::size_t k = 1; k < t.size(); ++k)
            s += 0.5 * (std::abs(residual[k]) + std::abs(residual[k - 1])) * (t[k] - t[k - 1]);
        return s;
    }
    [[nodiscard]] double sup() const {
        double s = 0.0;
        for (double r : residual) s = std::max(s, std::abs(r));
        return s;
    }
};

/// d/dt of the bracket by centered differences of the snapshots, compared with
/// the balance evaluated at the middle snapshot.
inline IdentityResidual energy_identity_residual(const Trajectory& tr, const CoefficientSet& c, double eps) {
    if (tr.size() < 3) throw InsufficientSamples("energy identity needs at least 3 snapshots");
    std::vector<IdentityBalance> bal;
    bal.reserve(tr.size());
    for (const auto& s : tr.snapshots) bal.push_back(identity_balance(s, c, eps));
    IdentityResidual out;
    for (std::size_t k = 1; k + 1 < tr.size(); ++k) {
        const double t0 = tr.snapshots[k - 1].t, t1 = tr.snapshots[k].t, t2 = tr.snapshots[k + 1].t;
        // second-order derivative on possibly nonuniform spacing
        const double a = t1 - t0, b = t2 - t1;
        const double deriv = (-b / (a * (a + b))) * bal[k - 1].bracket + ((b - a) / (a * b)) * bal[k].bracket +
                             (a / (b * (a + b))) * bal[k + 1].bracket;
        const double lhs = deriv + bal[k].dissipation;
        const double rhs = bal[k].source();
        out.t.push_back(t1);
        out.lhs.push_back(lhs);
        out.rhs.push_back(rhs);
        out.residual.push_back(lhs - rhs);
        out.terms.push_back(bal[k].terms);
    }
    return out;
}

/// Per-interval ratio (dy/dt + k1 eps int v_xxx^2) / (y^2 + y) with endpoint-averaged
/// interval quantities; NaN on intervals where y is at or below y_floor.
inline std::vector<double> riccati_series(const Trajectory& tr, const CoefficientSet& c, const ConstantsEstimate& k,
                                          double eps, double y_floor = 1e-14) {
    if (tr.size() < 2) throw InsufficientSamples("riccati_monitor needs at least 2 snapshots");
    std::vector<double> y(tr.size()), diss(tr.size(), 0.0);
    for (std::size_t j = 0; j < tr.size(); ++j) {
        const State& s = tr.snapshots[j];
        y[j] = energy_y(s, c, k, eps).y;
        if (eps != 0.0) {
            const ReflectedDerivatives V(s.v, 3);
            diss[j] = k.k1 * eps * integrate(s.grid(), V.d3.values.array().square().matrix());
        }
    }
    std::vector<double> out(tr.size() - 1, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 1; j < tr.size(); ++j) {
        if (y[j - 1] <= y_floor || y[j] <= y_floor) continue;
        const double dt = tr.snapshots[j].t - tr.snapshots[j - 1].t;
        const double num = (y[j] - y[j - 1]) / dt + 0.5 * (diss[j] + diss[j - 1]);
        const double ym = 0.5 * (y[j] + y[j - 1]);
        out[j - 1] = num / (ym * ym + ym);
    }
    return out;
}

/// Smallest k >= 0 with dy/dt + k1 eps int v_xxx^2 <= k (y^2 + y) on every
/// snapshot interval; intervals with y at or below y_floor are skipped.
inline double riccati_monitor(const Trajectory& tr, const CoefficientSet& c, const ConstantsEstimate& k, double eps,
                              double y_floor = 1e-14) {
    double k13 = 0.0;
    for (double r : riccati_series(tr, c, k, eps, y_floor))
        if (!std::isnan(r)) k13 = std::max(k13, r);
    return k13;
}

/// Worst signed defect of 1/2 d/dt int u_xx^2 + eps int u_xxx^2 <= 1/2 int u_xx^2 + 1/2 int v_xx^2
/// over snapshot intervals (endpoint averages).
inline double lemma2_check(const Trajectory& tr, double eps) {
    if (tr.size() < 2) throw InsufficientSamples("lemma2_check needs at least 2 snapshots");
    std::vector<double> uxx2(tr.size()), vxx2(tr.size()), uxxx2(tr.size());
    for (std::size_t j = 0; j < tr.size(); ++j) {
        const State& s = tr.snapshots[j];
        const ReflectedDerivatives U(s.u, 3), V(s.v, 2);
        uxx2[j] = integrate(s.grid(), U.d2.values.array().square().matrix());
        vxx2[j] = integrate(s.grid(), V.d2.values.array().square().matrix());
        uxxx2[j] = integrate(s.grid(), U.d3.values.array().square().matrix());
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < tr.size(); ++j) {
        const double dt = tr.snapshots[j].t - tr.snapshots[j - 1].t;
        const double lhs = 0.5 * (uxx2[j] - uxx2[j - 1]) / dt + eps * 0.5 * (uxxx2[j] + uxxx2[j - 1]);
        const double rhs = 0.25 * (uxx2[j] + uxx2[j - 1]) + 0.25 * (vxx2[j] + vxx2[j - 1]);
        worst = std::max(worst, lhs - rhs);
    }
    return worst;
}

namespace detail {

/// Brings a field onto the coarser of two nested grids.
inline GridFunction on_grid(const GridFunction& f, const Grid& target) {
    return f.grid == target ? f : inject(f, target);
}

inline bool same_time(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

}  // namespace detail

struct DifferenceSeries {
    std::vector<double> t, y_diff;
    [[nodiscard]] double sup() const {
        double s = 0.0;
        for (double v : y_diff) s = std::max(s, v);
        return s;
    }
};

/// y_diff(t) = 1/2 int d_tt^2 + 1/2 int gamma(T_A) d_xt^2 + int ghat(T_A) d_x d_xt
///           + B1/2 int d_x^2 + B2/2 int delta^2,   d = u_A - u_B, delta = T_A - T_B.
/// Trajectories on nested grids are compared on the coarser one by injection.
inline DifferenceSeries difference_functional(const Trajectory& A, const Trajectory& B, const CoefficientSet& c,
                                              const ConstantsEstimate& k) {
    if (A.size() != B.size()) throw TimeMismatch("trajectories have different numbers of snapshots");
    DifferenceSeries out;
    if (A.size() == 0) return out;
    const Grid ga = A.snapshots[0].grid(), gb = B.snapshots[0].grid();
    if (ga.L != gb.L) throw GridMismatch("trajectories live on different intervals");
    const Grid coarse = ga.n <= gb.n ? ga : gb;
    const Grid fine = ga.n <= gb.n ? gb : ga;
    if ((fine.n - 1) % (coarse.n - 1) != 0) throw GridMismatch("trajectory grids do not share nodes");
    for (std::size_t j = 0; j < A.size(); ++j) {
        const State& a = A.snapshots[j];
        const State& b = B.snapshots[j];
        if (!detail::same_time(a.t, b.t))
            throw TimeMismatch("snapshot " + std::to_string(j) + " at t = " + std::to_string(a.t) + " vs " +
                               std::to_string(b.t));
        const GridFunction ua = detail::on_grid(a.u, coarse), ub = detail::on_grid(b.u, coarse);
        const GridFunction va = detail::on_grid(a.v, coarse), vb = detail::on_grid(b.v, coarse);
        const GridFunction wa = detail::on_grid(a.w, coarse), wb = detail::on_grid(b.w, coarse);
        const GridFunction ta = detail::on_grid(a.theta, coarse), tb = detail::on_grid(b.theta, coarse);
        const Vec dtt = wa.values - wb.values;
        const Vec dx = first_difference(ua - ub).values;
        const Vec dxt = first_difference(va - vb).values;
        const Vec delta = ta.values - tb.values;
        const Vec gam = detail::evaluate(c.gamma, ta).values, gh = detail::evaluate(c.ghat, ta).values;
        auto I = [&](const auto& e) { return integrate(coarse, Vec(e)); };
        const double y = 0.5 * I(dtt.array().square()) + 0.5 * I(gam.array() * dxt.array().square()) +
                         I(gh.array() * dx.array() * dxt.array()) + 0.5 * k.B1 * I(dx.array().square()) +
                         0.5 * k.B2 * I(delta.array().square());
        out.t.push_back(a.t);
        out.y_diff.push_back(y);
    }
    return out;
}

/// Smallest C with y(t) <= y(0) e^{C t} over the series (C may be negative).
inline double fitted_gronwall_constant(const DifferenceSeries& d) {
    if (d.t.size() < 2 || !(d.y_diff.front() > 0.0))
        throw InsufficientSamples("Gronwall fit needs y_diff(0) > 0 and at least 2 samples");
    double C = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < d.t.size(); ++j) {
        const double dt = d.t[j] - d.t[0];
        if (dt <= 0.0) continue;
        C = std::max(C, std::log(std::max(d.y_diff[j], std::numeric_limits<double>::min()) / d.y_diff[0]) / dt);
    }
    return C;
}

}  // namespace mgt
