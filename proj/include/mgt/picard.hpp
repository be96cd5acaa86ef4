#pragma once

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mgt/diagnostics.hpp"
#include "mgt/dynamics.hpp"
#include "mgt/errors.hpp"
#include "mgt/grid.hpp"
#include "mgt/model.hpp"
#include "mgt/semigroup.hpp"

namespace mgt {

/// Empirical smoothing constants of the discrete semigroup on one grid:
///   |e^{eps t lap} phi|_{W12}     <= c1 t^{-1/2} |phi|_inf
///   |e^{D t lap} phi|_inf         <= c2 t^{-1/2} |phi|_{L1}
///   |e^{eps t lap} d_x phi|_inf   <= c3 t^{-3/4} |phi|_{L2}
/// for t in (0, 1]; d_x maps face values to nodes with zero boundary flux.
struct SemigroupConstants {
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
};

namespace detail {

/// sup over t in (0, 1] of t^power * norm(e^{kappa t lap} p): dense log-spaced
/// scan followed by Brent refinement in log t around the best sample.
inline double smoothing_sup(const HeatSemigroup& sg, double kappa, double power, const Vec& p,
                            const std::function<double(const GridFunction&)>& norm) {
    const Vec c = sg.to_modes(p);
    const Vec& lam = sg.eigenvalues();
    auto value = [&](double log_t) {
        const double t = std::exp(log_t);
        const Vec m = c.cwiseProduct((-(kappa * t) * lam.array()).exp().matrix());
        return std::pow(t, power) * norm(GridFunction(sg.grid(), sg.from_modes(m)));
    };
    // shortest relevant time scale: the stiffest mode
    const double lam_max = lam.maxCoeff();
    const double lo = kappa > 0.0 && lam_max > 0.0 ? std::min(-1.0, std::log(1e-3 / (kappa * lam_max))) : -30.0;
    constexpr int scan = 80;
    int best = scan;
    double best_v = -1.0;
    for (int j = 0; j <= scan; ++j) {
        const double v = value(lo * (1.0 - static_cast<double>(j) / scan));
        if (v > best_v) {
            best_v = v;
            best = j;
        }
    }
    const double a = lo * (1.0 - static_cast<double>(std::max(best - 1, 0)) / scan);
    const double b = lo * (1.0 - static_cast<double>(std::min(best + 1, scan)) / scan);
    auto r = boost::math::tools::brent_find_minima([&](double s) { return -value(s); }, a, b, 40);
    return std::max(best_v, -r.second);
}

/// Node divergence of face values f_{i+1/2} with zero flux through the end faces.
inline Vec face_divergence(const Grid& g, const Vec& faces) {
    const std::size_t n = g.n;
    const double ih = 1.0 / g.h();
    Vec out(static_cast<Eigen::Index>(n));
    const auto f = [&](std::size_t i) { return faces[static_cast<Eigen::Index>(i)]; };
    out[0] = 2.0 * f(0) * ih;
    for (std::size_t i = 1; i + 1 < n; ++i) out[static_cast<Eigen::Index>(i)] = (f(i) - f(i - 1)) * ih;
    out[static_cast<Eigen::Index>(n - 1)] = -2.0 * f(n - 2) * ih;
    return out;
}

inline double l1_norm(const GridFunction& p) { return integrate(p.grid, p.values.cwiseAbs()); }

}  // namespace detail

/// Per-probe maximum for the c1 estimate.
inline double semigroup_c1_probe(const HeatSemigroup& sg, double eps, const GridFunction& phi) {
    return detail::smoothing_sup(sg, eps, 0.5, phi.values, [](const GridFunction& q) { return w12_norm(q); }) /
           phi.max_abs();
}

/// Estimates c1, c2, c3 by maximizing over probe functions (cosine modes, seeded
/// random fields and node impulses) and t in (0, 1]. The values are grid-dependent.
inline SemigroupConstants estimate_semigroup_constants(const Grid& g, double eps, double D,
                                                       std::uint64_t seed = 0x5eed, std::size_t random_probes = 8) {
    if (!(eps > 0.0) || !(D > 0.0)) throw ValidationError("semigroup constants need eps > 0 and D > 0");
    const HeatSemigroup sg(g);
    const std::size_t n = g.n;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    std::vector<GridFunction> node_probes;
    const std::size_t stride = std::max<std::size_t>(1, n / 32);
    for (std::size_t k = 0; k < n; k += stride) node_probes.push_back(cosine_mode(g, k));
    node_probes.push_back(cosine_mode(g, n - 1));
    for (std::size_t r = 0; r < random_probes; ++r) {
        GridFunction p(g);
        for (std::size_t i = 0; i < n; ++i) p[i] = unif(rng);
        node_probes.push_back(p);
    }
    std::vector<GridFunction> impulses;
    for (std::size_t i : {std::size_t{0}, std::size_t{1}, n / 4, n / 2}) {
        GridFunction p(g);
        p[i] = 1.0;
        impulses.push_back(p);
    }

    SemigroupConstants c;
    auto linf = [](const GridFunction& q) { return q.max_abs(); };
    for (const auto& p : node_probes) c.c1 = std::max(c.c1, semigroup_c1_probe(sg, eps, p));
    for (const auto& p : impulses) c.c1 = std::max(c.c1, semigroup_c1_probe(sg, eps, p));

    for (const auto& p : impulses) c.c2 = std::max(c.c2, detail::smoothing_sup(sg, D, 0.5, p.values, linf) / detail::l1_norm(p));
    for (const auto& p : node_probes) c.c2 = std::max(c.c2, detail::smoothing_sup(sg, D, 0.5, p.values, linf) / detail::l1_norm(p));

    // face probes for the derivative estimate
    std::vector<Vec> faces;
    const auto m = static_cast<Eigen::Index>(n - 1);
    for (std::size_t k = 1; k < n; k += stride) {
        Vec f(m);
        for (Eigen::Index i = 0; i < m; ++i) f[i] = std::sin(std::numbers::pi * k * (i + 0.5) / static_cast<double>(n - 1));
        faces.push_back(f);
    }
    for (std::size_t r = 0; r < random_probes; ++r) {
        Vec f(m);
        for (Eigen::Index i = 0; i < m; ++i) f[i] = unif(rng);
        faces.push_back(f);
    }
    for (Eigen::Index i : {Eigen::Index{0}, m / 2}) {
        Vec f = Vec::Zero(m);
        f[i] = 1.0;
        faces.push_back(f);
    }
    for (const auto& f : faces) {
        const double l2 = std::sqrt(f.squaredNorm() * g.h());
        c.c3 = std::max(c.c3, detail::smoothing_sup(sg, eps, 0.75, detail::face_divergence(g, f), linf) / l2);
    }
    return c;
}

/// Largest T0 in (0, 1) with
///   4 c3 (sup|gamma| + sup|ghat|) R T0^{1/4} + alpha R T0 <= 1,
///   2 c1 R T0^{1/2} <= 1,   R T0 <= 1,   2 c2 sup Gamma R^2 T0^{1/2} <= 1,
/// suprema over [-R, R] under constant continuation below zero; bisection to 1e-12.
inline double compute_T0(double R, const SemigroupConstants& sg, const CoefficientSet& c, double alpha) {
    if (!(R >= 1.0)) throw ValidationError("compute_T0 needs R >= 1");
    auto sup_abs = [&](const Coefficient& f) {
        return detail::sampled_extremum([&](double x) { return std::abs(f(x)); }, R, true);
    };
    const double g_sum = sup_abs(c.gamma) + sup_abs(c.ghat);
    const double G = std::max(0.0, detail::sampled_extremum([&](double x) { return c.Gamma(x); }, R, true));
    auto worst = [&](double T) {
        return std::max({4.0 * sg.c3 * g_sum * R * std::pow(T, 0.25) + alpha * R * T, 2.0 * sg.c1 * R * std::sqrt(T),
                         R * T, 2.0 * sg.c2 * G * R * R * std::sqrt(T)});
    };
    if (worst(1.0) <= 1.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 2000 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (worst(mid) <= 1.0 ? lo : hi) = mid;
    }
    return lo;
}
inline double compute_T0(double R, const SemigroupConstants& sg, const CoefficientSet& c) {
    return compute_T0(R, sg, c, c.alpha);
}

/// Time-sampled quadruple on [0, T]: states at t_j = j T / (size - 1).
struct PicardPath {
    std::vector<State> at;

    [[nodiscard]] std::size_t size() const { return at.size(); }
    [[nodiscard]] double T() const { return at.empty() ? 0.0 : at.back().t; }
};

/// max{|w|_inf, |v|_W12, |u|_W12, |Theta|_inf}.
inline double x0_norm(const State& s) {
    return std::max({s.w.max_abs(), w12_norm(s.v), w12_norm(s.u), s.theta.max_abs()});
}
inline double x0_norm(const InitialData& d) {
    return std::max({d.u0tt.max_abs(), w12_norm(d.u0t), w12_norm(d.u0), d.theta0.max_abs()});
}
inline double x_norm(const PicardPath& p) {
    double m = 0.0;
    for (const auto& s : p.at) m = std::max(m, x0_norm(s));
    return m;
}
inline double x_distance(const PicardPath& a, const PicardPath& b) {
    if (a.size() != b.size()) throw TimeMismatch("Picard paths have different lengths");
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const State& x = a.at[j];
        const State& y = b.at[j];
        m = std::max({m, (x.w - y.w).max_abs(), w12_norm(x.v - y.v), w12_norm(x.u - y.u),
                      (x.theta - y.theta).max_abs()});
    }
    return m;
}

/// Constant-in-time extension of the initial data on n_time + 1 uniform nodes.
inline PicardPath constant_path(const InitialData& init, double T, std::size_t n_time) {
    PicardPath p;
    State s0 = State::from_initial(init);
    for (std::size_t j = 0; j <= n_time; ++j) {
        State s = s0;
        s.t = j == n_time ? T : T * static_cast<double>(j) / static_cast<double>(n_time);
        p.at.push_back(std::move(s));
    }
    return p;
}

/// One application of the Duhamel maps (Phi1..Phi4) on the sampled path:
///   Phi1 = E_eps(t) w0 + int E_eps(t-s) [ div(gamma(T) v_x) + div(ghat(T) u_x) - alpha w ] ds
///   Phi2 = E_eps(t) v0 + int E_eps(t-s) w ds
///   Phi3 = E_eps(t) u0 + int E_eps(t-s) v ds
///   Phi4 = E_D(t) T0 + int E_D(t-s) Gamma(T) v_x^2 ds
/// with trapezoidal time integrals I_j = E(tau) I_{j-1} + tau/2 (E(tau) F_{j-1} + F_j).
inline PicardPath duhamel_map(const PicardPath& it, const InitialData& init, const CoefficientSet& c, double eps) {
    if (it.size() < 2) throw InsufficientSamples("duhamel_map needs at least two time nodes");
    const Grid& g = init.grid();
    for (const auto& s : it.at) {
        if (s.grid() != g) throw GridMismatch("Picard iterate on a different grid");
        s.require_finite("duhamel_map");
    }
    const HeatSemigroup sg(g);
    const std::size_t N = it.size() - 1;
    const double tau = it.T() / static_cast<double>(N);
    const Vec Ee = sg.multipliers(eps, tau), Ed = sg.multipliers(c.D, tau);

    auto forcing = [&](const State& s) {
        State f(g, s.t);
        f.w = flux_divergence(detail::evaluate(c.gamma, s.theta), s.v) +
              flux_divergence(detail::evaluate(c.ghat, s.theta), s.u) - c.alpha * s.w;
        f.v = s.w;
        f.u = s.v;
        f.theta = detail::heating(c, s.theta, s.v);
        return f;
    };

    PicardPath out;
    out.at.reserve(it.size());
    State hom = State::from_initial(init);
    State integral(g);
    State F_prev = forcing(it.at[0]);
    State first = hom;
    first.t = it.at[0].t;
    out.at.push_back(first);
    for (std::size_t j = 1; j <= N; ++j) {
        const State F = forcing(it.at[j]);
        hom.u = sg.apply_multipliers(Ee, hom.u);
        hom.v = sg.apply_multipliers(Ee, hom.v);
        hom.w = sg.apply_multipliers(Ee, hom.w);
        hom.theta = sg.apply_multipliers(Ed, hom.theta);
        integral.u = sg.apply_multipliers(Ee, integral.u + (0.5 * tau) * F_prev.u) + (0.5 * tau) * F.u;
        integral.v = sg.apply_multipliers(Ee, integral.v + (0.5 * tau) * F_prev.v) + (0.5 * tau) * F.v;
        integral.w = sg.apply_multipliers(Ee, integral.w + (0.5 * tau) * F_prev.w) + (0.5 * tau) * F.w;
        integral.theta = sg.apply_multipliers(Ed, integral.theta + (0.5 * tau) * F_prev.theta) + (0.5 * tau) * F.theta;
        State s(g, it.at[j].t);
        s.u = hom.u + integral.u;
        s.v = hom.v + integral.v;
        s.w = hom.w + integral.w;
        s.theta = hom.theta + integral.theta;
        s.require_finite("duhamel_map");
        out.at.push_back(std::move(s));
        F_prev = F;
    }
    return out;
}

struct PicardConfig {
    double eps = 0.5;
    double R = 0.0;            ///< ball radius; 0 selects |init|_X0 + 1
    double T0 = 0.0;           ///< 0 selects compute_T0
    double T = 0.0;            ///< 0 selects T0 * horizon_fraction
    double horizon_fraction = 0.5;
    std::size_t n_time = 64;
    std::size_t max_iter = 200;
    double tol = 1e-12;
    std::uint64_t seed = 0x5eed;  ///< probe functions of the semigroup constants

    void validate() const {
        if (!(eps > 0.0)) throw ValidationError("picard: eps > 0 required");
        if (n_time < 2) throw ValidationError("picard: n_time >= 2 required");
        if (!(tol > 0.0)) throw ValidationError("picard: tol > 0 required");
        if (max_iter < 1) throw ValidationError("picard: max_iter >= 1 required");
        if (!(horizon_fraction > 0.0 && horizon_fraction <= 1.0))
            throw ValidationError("picard: 0 < horizon_fraction <= 1 required");
    }
};

struct PicardIteration {
    std::size_t k = 0;    ///< iterate index (Phi applied k times)
    double diff = 0.0;    ///< |X^k - X^{k-1}|_X
    double ratio = std::numeric_limits<double>::quiet_NaN();  ///< diff_k / diff_{k-1}
    double norm = 0.0;    ///< |X^k|_X
};

struct PicardResult {
    PicardPath path;
    std::vector<PicardIteration> history;
    SemigroupConstants constants;
    double R = 0.0, T0 = 0.0, T = 0.0;
    bool converged = false;

    [[nodiscard]] std::size_t iterations() const { return history.size(); }
    /// max over iterates of |X^k|_X - R (positive means the ball was left)
    [[nodiscard]] double ball_excess() const {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& h : history) m = std::max(m, h.norm - R);
        return m;
    }
};

/// Banach iteration of the Duhamel maps from the constant extension of the data.
/// Throws NoContraction after three consecutive ratios >= 1 and MaxIterExceeded.
inline PicardResult picard_solve(const InitialData& init, const CoefficientSet& c, const PicardConfig& cfg) {
    cfg.validate();
    PicardResult res;
    res.R = cfg.R > 0.0 ? cfg.R : x0_norm(init) + 1.0;
    if (cfg.T0 > 0.0 && cfg.T > 0.0) {
        res.T0 = cfg.T0;
    } else {
        res.constants = estimate_semigroup_constants(init.grid(), cfg.eps, c.D, cfg.seed);
        res.T0 = cfg.T0 > 0.0 ? cfg.T0 : compute_T0(res.R, res.constants, c);
    }
    res.T = cfg.T > 0.0 ? cfg.T : cfg.horizon_fraction * res.T0;
    if (res.T > res.T0 * (1.0 + 1e-12)) throw ValidationError("picard: T <= T0 required");

    PicardPath x = constant_path(init, res.T, cfg.n_time);
    std::size_t above_one = 0;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 1; k <= cfg.max_iter; ++k) {
        PicardPath next = duhamel_map(x, init, c, cfg.eps);
        PicardIteration rec;
        rec.k = k;
        rec.diff = x_distance(next, x);
        rec.norm = x_norm(next);
        if (k > 1) rec.ratio = prev > 0.0 ? rec.diff / prev : 0.0;
        res.history.push_back(rec);
        x = std::move(next);
        if (rec.diff <= cfg.tol * std::max(1.0, rec.norm)) {
            res.converged = true;
            break;
        }
        above_one = (k > 1 && rec.ratio >= 1.0) ? above_one + 1 : 0;
        if (above_one >= 3) {
            res.path = std::move(x);
            throw NoContraction("picard: contraction ratio >= 1 for 3 consecutive iterations (last " +
                                std::to_string(rec.ratio) + ")");
        }
        prev = rec.diff;
    }
    res.path = std::move(x);
    if (!res.converged)
        throw MaxIterExceeded("picard: no convergence within " + std::to_string(cfg.max_iter) + " iterations");
    return res;
}

}  // namespace mgt
