#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mgt/block_tridiagonal.hpp"
#include "mgt/errors.hpp"
#include "mgt/grid.hpp"
#include "mgt/model.hpp"
#include "mgt/semigroup.hpp"

namespace mgt {

/// (u, v = u_t, w = u_tt, Theta) at time t.
struct State {
    double t = 0.0;
    GridFunction u, v, w, theta;

    State() = default;
    explicit State(const Grid& g, double time = 0.0) : t(time), u(g), v(g), w(g), theta(g) {}
    static State from_initial(const InitialData& d) {
        State s;
        s.u = d.u0;
        s.v = d.u0t;
        s.w = d.u0tt;
        s.theta = d.theta0;
        return s;
    }

    [[nodiscard]] const Grid& grid() const { return u.grid; }
    [[nodiscard]] bool all_finite() const {
        return u.all_finite() && v.all_finite() && w.all_finite() && theta.all_finite();
    }
    void require_finite(const char* where) const {
        if (!all_finite()) throw NonFiniteState(std::string("non-finite state in ") + where + " at t = " + std::to_string(t));
    }
    void check_grids() const {
        require_same_grid(u, v);
        require_same_grid(u, w);
        require_same_grid(u, theta);
    }
};

/// Closed-form forcings f_u (added to the w-equation) and f_theta; empty means none.
struct SourceTerms {
    std::function<double(double x, double t)> f_u;
    std::function<double(double x, double t)> f_theta;

    [[nodiscard]] bool empty() const { return !f_u && !f_theta; }
};

enum class Scheme { semi_implicit, explicit_rk4 };
enum class ImplicitVariant { crank_nicolson, backward_euler };

inline const char* to_string(Scheme s) { return s == Scheme::semi_implicit ? "semi_implicit" : "explicit_rk4"; }
inline const char* to_string(ImplicitVariant v) {
    return v == ImplicitVariant::crank_nicolson ? "crank_nicolson" : "backward_euler";
}

struct EvolutionParams {
    double eps = 0.0;
    double dt = 1e-4;
    double t_end = 1.0;
    Scheme scheme = Scheme::semi_implicit;
    ImplicitVariant variant = ImplicitVariant::crank_nicolson;
    /// re-evaluate Theta-dependent coefficients at a predicted midpoint (second order in time)
    bool midpoint_coefficients = true;
    double safety = 0.9;
    /// abort when min Theta < -undershoot_limit * max(1, |Theta|_inf)
    double undershoot_limit = 1e-6;

    void validate(double t0) const {
        if (!(eps >= 0.0)) throw ValidationError("eps >= 0 required");
        if (!(dt > 0.0)) throw ValidationError("dt > 0 required");
        if (!(t_end >= t0)) throw ValidationError("t_end >= start time required");
        if (!(safety > 0.0 && safety <= 1.0)) throw ValidationError("0 < safety <= 1 required");
    }
};

struct Tendencies {
    GridFunction du, dv, dw, dtheta;
};

namespace detail {

inline GridFunction evaluate(const Coefficient& f, const GridFunction& theta) {
    GridFunction out(theta.grid);
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = f(theta[i]);
    return out;
}

inline GridFunction sample_source(const std::function<double(double, double)>& f, const Grid& g, double t) {
    GridFunction out(g);
    if (f)
        for (std::size_t i = 0; i < g.n; ++i) out[i] = f(g.x(i), t);
    return out;
}

/// Gamma(Theta) v_x^2 with v_x = 0 at the end nodes.
inline GridFunction heating(const CoefficientSet& c, const GridFunction& theta, const GridFunction& v) {
    GridFunction vx = first_difference_neumann(v);
    GridFunction out(v.grid);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = c.Gamma(theta[i]) * vx[i] * vx[i];
    return out;
}

/// Tridiagonal form of flux_divergence(a, .).
inline Tridiagonal flux_operator(const GridFunction& a) {
    const std::size_t n = a.size();
    const double ih2 = 1.0 / (a.grid.h() * a.grid.h());
    Tridiagonal t(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double face = 0.5 * (a[i] + a[i + 1]) * ih2;
        const double left_scale = (i == 0) ? 2.0 : 1.0;
        const double right_scale = (i + 2 == n) ? 2.0 : 1.0;
        const auto ii = static_cast<Eigen::Index>(i);
        // row i gains +face (p_{i+1} - p_i), row i+1 gains -face (p_{i+1} - p_i)
        t.diag[ii] -= left_scale * face;
        t.upper[ii] += left_scale * face;
        t.diag[ii + 1] -= right_scale * face;
        t.lower[ii + 1] += right_scale * face;
    }
    return t;
}

}  // namespace detail

/// Right-hand side of the first-order system
///   u' = eps lap u + v,  v' = eps lap v + w,
///   w' = eps lap w + (gamma v_x)_x + (ghat u_x)_x - alpha w + f_u,
///   Theta' = D lap Theta + Gamma(Theta) v_x^2 + f_theta.
inline Tendencies rhs(const State& s, const CoefficientSet& c, double eps, const SourceTerms& src = {}) {
    s.check_grids();
    s.require_finite("rhs");
    const Grid& g = s.grid();
    Tendencies out;
    const GridFunction g_theta = detail::evaluate(c.gamma, s.theta);
    const GridFunction gh_theta = detail::evaluate(c.ghat, s.theta);
    out.du = s.v;
    out.dv = s.w;
    out.dw = flux_divergence(g_theta, s.v) + flux_divergence(gh_theta, s.u) - c.alpha * s.w;
    if (eps != 0.0) {
        out.du += eps * laplacian(s.u);
        out.dv += eps * laplacian(s.v);
        out.dw += eps * laplacian(s.w);
    }
    out.dtheta = c.D * laplacian(s.theta) + detail::heating(c, s.theta, s.v);
    if (src.f_u) out.dw += detail::sample_source(src.f_u, g, s.t);
    if (src.f_theta) out.dtheta += detail::sample_source(src.f_theta, g, s.t);
    return out;
}

/// Largest dt admitted by the explicit reference scheme for state s.
inline double explicit_stable_dt(const State& s, const CoefficientSet& c, const EvolutionParams& p) {
    double max_gamma = 0.0, max_ghat = 0.0;
    for (std::size_t i = 0; i < s.theta.size(); ++i) {
        max_gamma = std::max(max_gamma, c.gamma(s.theta[i]));
        max_ghat = std::max(max_ghat, c.ghat(s.theta[i]));
    }
    const double h = s.grid().h();
    const double diffusive = h * h / (2.0 * p.eps + 2.0 * c.D + 2.0 * max_gamma);
    const double wave = max_ghat > 0.0 ? h / std::sqrt(max_ghat) : std::numeric_limits<double>::infinity();
    return p.safety * std::min(diffusive, wave);
}

/// Classical four-stage Runge-Kutta step of `rhs`.
inline State step_explicit_rk4(const State& s, const CoefficientSet& c, const EvolutionParams& p,
                               const SourceTerms& src = {}, std::optional<double> dt_override = {}) {
    const double dt = dt_override.value_or(p.dt);
    const double limit = explicit_stable_dt(s, c, p);
    if (dt > limit * (1.0 + 1e-12))
        throw StabilityViolation("explicit_rk4: dt = " + std::to_string(dt) + " exceeds stability limit " +
                                 std::to_string(limit));
    auto stage = [&](const Tendencies& k, double f) {
        State out = s;
        out.t = s.t + f;
        out.u = s.u + f * k.du;
        out.v = s.v + f * k.dv;
        out.w = s.w + f * k.dw;
        out.theta = s.theta + f * k.dtheta;
        return out;
    };
    const Tendencies k1 = rhs(s, c, p.eps, src);
    const Tendencies k2 = rhs(stage(k1, 0.5 * dt), c, p.eps, src);
    const Tendencies k3 = rhs(stage(k2, 0.5 * dt), c, p.eps, src);
    const Tendencies k4 = rhs(stage(k3, dt), c, p.eps, src);
    State out = s;
    out.t = s.t + dt;
    const double w = dt / 6.0;
    out.u = s.u + w * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du);
    out.v = s.v + w * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    out.w = s.w + w * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
    out.theta = s.theta + w * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
    out.require_finite("step_explicit_rk4");
    return out;
}

/// Per-step bookkeeping of the semi-implicit scheme.
struct StepInfo {
    double undershoot = 0.0;  ///< max(0, -min Theta) of the accepted state
};

/// One step of the semi-implicit scheme.
///
/// The mechanical block (u, v, w) is linear once the coefficients are frozen at
/// a temperature T*: it is advanced by the theta-method (Crank-Nicolson or
/// backward Euler) via a 3x3 block tridiagonal solve. Theta is advanced with the
/// exact discrete heat semigroup and explicit heating:
///   backward Euler:  Theta+ = E (Theta + dt S(Theta, v+))
///   Crank-Nicolson:  Theta+ = E (Theta + dt/2 S(Theta, v)) + dt/2 S(T_pred, v+)
/// with E = exp(dt D lap). T* is Theta, or the midpoint of Theta and a
/// Lie-split prediction when `midpoint_coefficients` is set.
inline State step_semi_implicit(const State& s, const CoefficientSet& c, const EvolutionParams& p,
                                const SourceTerms& src = {}, std::optional<double> dt_override = {},
                                StepInfo* info = nullptr, const HeatSemigroup* semigroup = nullptr) {
    s.check_grids();
    s.require_finite("step_semi_implicit");
    const double dt = dt_override.value_or(p.dt);
    const Grid& g = s.grid();
    const std::size_t n = g.n;
    std::optional<HeatSemigroup> own;
    if (semigroup == nullptr) semigroup = &own.emplace(g);
    const Vec decay = semigroup->multipliers(c.D, dt);

    const double theta_w = p.variant == ImplicitVariant::crank_nicolson ? 0.5 : 1.0;
    const double t1 = s.t + dt;

    GridFunction src_now = detail::heating(c, s.theta, s.v);
    if (src.f_theta) src_now += detail::sample_source(src.f_theta, g, s.t);

    GridFunction theta_pred = s.theta;
    GridFunction theta_coef = s.theta;
    if (p.midpoint_coefficients) {
        theta_pred = semigroup->apply_multipliers(decay, s.theta + dt * src_now);
        theta_coef = 0.5 * (s.theta + theta_pred);
    }

    const Tridiagonal A_gamma = detail::flux_operator(detail::evaluate(c.gamma, theta_coef));
    const Tridiagonal A_ghat = detail::flux_operator(detail::evaluate(c.ghat, theta_coef));
    const Tridiagonal lap = detail::flux_operator(GridFunction::constant(g, 1.0));

    // explicit part: X + (1 - theta) dt L X + dt f
    auto apply_L = [&](const GridFunction& u, const GridFunction& v, const GridFunction& w) {
        Vec lu = v.values, lv = w.values;
        Vec lw = A_gamma.apply(v.values) + A_ghat.apply(u.values) - c.alpha * w.values;
        if (p.eps != 0.0) {
            lu += p.eps * lap.apply(u.values);
            lv += p.eps * lap.apply(v.values);
            lw += p.eps * lap.apply(w.values);
        }
        return std::array<Vec, 3>{lu, lv, lw};
    };
    std::array<Vec, 3> r{s.u.values, s.v.values, s.w.values};
    const double explicit_w = (1.0 - theta_w) * dt;
    if (explicit_w != 0.0) {
        const auto lx = apply_L(s.u, s.v, s.w);
        for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(k)] += explicit_w * lx[static_cast<std::size_t>(k)];
    }
    if (src.f_u) {
        const GridFunction f0 = detail::sample_source(src.f_u, g, s.t);
        const GridFunction f1 = detail::sample_source(src.f_u, g, t1);
        r[2] += dt * ((1.0 - theta_w) * f0.values + theta_w * f1.values);
    }

    // implicit part: (I - theta dt L) X+ = r
    const double a = theta_w * dt;
    BlockTridiagonal3 sys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        auto& D = sys.diag(i);
        D.setIdentity();
        D(0, 0) -= a * p.eps * lap.diag[ii];
        D(1, 1) -= a * p.eps * lap.diag[ii];
        D(2, 2) -= a * (p.eps * lap.diag[ii] - c.alpha);
        D(0, 1) -= a;
        D(1, 2) -= a;
        D(2, 0) -= a * A_ghat.diag[ii];
        D(2, 1) -= a * A_gamma.diag[ii];
        if (i > 0) {
            auto& Lo = sys.lower(i);
            Lo(0, 0) = Lo(1, 1) = Lo(2, 2) = -a * p.eps * lap.lower[ii];
            Lo(2, 0) = -a * A_ghat.lower[ii];
            Lo(2, 1) = -a * A_gamma.lower[ii];
        }
        if (i + 1 < n) {
            auto& Up = sys.upper(i);
            Up(0, 0) = Up(1, 1) = Up(2, 2) = -a * p.eps * lap.upper[ii];
            Up(2, 0) = -a * A_ghat.upper[ii];
            Up(2, 1) = -a * A_gamma.upper[ii];
        }
    }
    std::vector<BlockTridiagonal3::Column> rhs_cols(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        rhs_cols[i] = {r[0][ii], r[1][ii], r[2][ii]};
    }
    const auto x = sys.solve(std::move(rhs_cols));

    State out(g, t1);
    for (std::size_t i = 0; i < n; ++i) {
        out.u[i] = x[i][0];
        out.v[i] = x[i][1];
        out.w[i] = x[i][2];
    }

    if (p.variant == ImplicitVariant::crank_nicolson) {
        GridFunction src_next = detail::heating(c, theta_pred, out.v);
        if (src.f_theta) src_next += detail::sample_source(src.f_theta, g, t1);
        out.theta = semigroup->apply_multipliers(decay, s.theta + (0.5 * dt) * src_now) + (0.5 * dt) * src_next;
    } else {
        GridFunction src_next = detail::heating(c, s.theta, out.v);
        if (src.f_theta) src_next += detail::sample_source(src.f_theta, g, t1);
        out.theta = semigroup->apply_multipliers(decay, s.theta + dt * src_next);
    }
    out.require_finite("step_semi_implicit");

    const double min_theta = out.theta.values.minCoeff();
    const double undershoot = std::max(0.0, -min_theta);
    if (undershoot > p.undershoot_limit * std::max(1.0, out.theta.max_abs()))
        throw SolverFailure("temperature undershoot " + std::to_string(undershoot) + " at t = " + std::to_string(t1));
    if (info != nullptr) info->undershoot = undershoot;
    return out;
}

/// Sum of the norms in the extensibility criterion:
///   |v|_{W^{2,2}} + |w|_{W^{1,2}} + |Theta|_{W^{2,inf}}.
inline double blowup_monitor(const State& s) {
    return sobolev_norms(s.v).W22() + w12_norm(s.w) + sobolev_norms(s.theta).W2inf;
}

struct MonitorConfig {
    std::size_t cadence = 1;          ///< snapshot every `cadence` steps (first and last always kept)
    bool blowup_armed = true;
    double blowup_threshold = 1e6;
    double blowup_growth = 1e3;
    /// called after every accepted step
    std::function<void(const State&)> observer;
};

struct StepRecord {
    double t = 0.0;
    double mean_u = 0.0, mean_v = 0.0, mean_w = 0.0;
    double min_theta = 0.0;
    double undershoot = 0.0;
};

struct Trajectory {
    std::vector<State> snapshots;
    std::vector<StepRecord> steps;
    std::vector<double> monitor;  ///< blowup_monitor at each snapshot

    [[nodiscard]] std::size_t size() const { return snapshots.size(); }
    [[nodiscard]] std::vector<double> times() const {
        std::vector<double> t;
        t.reserve(snapshots.size());
        for (const auto& s : snapshots) t.push_back(s.t);
        return t;
    }
};

enum class Outcome { completed, blowup_suspected, solver_failure, non_finite };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::completed: return "completed";
        case Outcome::blowup_suspected: return "blowup_suspected";
        case Outcome::solver_failure: return "solver_failure";
        case Outcome::non_finite: return "non_finite";
    }
    return "?";
}

struct EvolveResult {
    Trajectory trajectory;
    Outcome outcome = Outcome::completed;
    double abort_time = 0.0;
    double abort_monitor = 0.0;
    std::string message;
};

/// Time stepping from the initial data to p.t_end, aborting when the blow-up
/// monitor exceeds its absolute threshold or grows by `blowup_growth`. Step
/// failures are reported in the result instead of thrown.
inline EvolveResult run_evolution(const InitialData& init, const CoefficientSet& c, const EvolutionParams& p,
                                  const SourceTerms& src = {}, const MonitorConfig& mon = {}) {
    State s = State::from_initial(init);
    s.check_grids();
    p.validate(s.t);
    EvolveResult res;
    Trajectory& traj = res.trajectory;
    const HeatSemigroup semigroup(s.grid());

    auto record_step = [&](const State& st, double undershoot) {
        traj.steps.push_back({st.t, mean(st.u), mean(st.v), mean(st.w), st.theta.values.minCoeff(), undershoot});
    };
    const double monitor0 = blowup_monitor(s);
    auto snapshot = [&](const State& st) {
        traj.snapshots.push_back(st);
        traj.monitor.push_back(blowup_monitor(st));
    };
    snapshot(s);
    record_step(s, 0.0);

    const double span = p.t_end - s.t;
    const auto steps = span <= 0.0 ? std::size_t{0}
                                   : static_cast<std::size_t>(std::ceil(span / p.dt - 1e-9));
    const double dt = steps ? span / static_cast<double>(steps) : p.dt;
    const double t0 = s.t;
    const std::size_t cadence = std::max<std::size_t>(1, mon.cadence);

    for (std::size_t k = 1; k <= steps; ++k) {
        StepInfo info;
        try {
            s = p.scheme == Scheme::semi_implicit ? step_semi_implicit(s, c, p, src, dt, &info, &semigroup)
                                                  : step_explicit_rk4(s, c, p, src, dt);
        } catch (const NonFiniteState& e) {
            res.outcome = Outcome::non_finite;
            res.message = e.what();
            res.abort_time = s.t + dt;
            break;
        } catch (const SolverFailure& e) {
            res.outcome = Outcome::solver_failure;
            res.message = e.what();
            res.abort_time = s.t + dt;
            break;
        }
        // avoid drift in the time coordinate
        s.t = k == steps ? p.t_end : t0 + static_cast<double>(k) * dt;
        record_step(s, info.undershoot);
        if (mon.observer) mon.observer(s);
        const bool keep = (k % cadence == 0) || k == steps;
        const double m = keep || mon.blowup_armed ? blowup_monitor(s) : 0.0;
        if (keep) {
            traj.snapshots.push_back(s);
            traj.monitor.push_back(m);
        }
        if (mon.blowup_armed && (m > mon.blowup_threshold || (monitor0 > 0.0 && m >= mon.blowup_growth * monitor0))) {
            if (!keep) {
                traj.snapshots.push_back(s);
                traj.monitor.push_back(m);
            }
            res.outcome = Outcome::blowup_suspected;
            res.abort_time = s.t;
            res.abort_monitor = m;
            res.message = "extensibility monitor " + std::to_string(m) + " at t = " + std::to_string(s.t);
            break;
        }
    }
    return res;
}

/// As run_evolution, but failures are thrown (BlowupSuspected, SolverFailure, NonFiniteState).
inline Trajectory evolve(const InitialData& init, const CoefficientSet& c, const EvolutionParams& p,
                         const SourceTerms& src = {}, const MonitorConfig& mon = {}) {
    EvolveResult r = run_evolution(init, c, p, src, mon);
    switch (r.outcome) {
        case Outcome::completed: break;
        case Outcome::blowup_suspected: throw BlowupSuspected(r.message, r.abort_time, r.abort_monitor);
        case Outcome::solver_failure: throw SolverFailure(r.message);
        case Outcome::non_finite: throw NonFiniteState(r.message);
    }
    return std::move(r.trajectory);
}

}  // namespace mgt
