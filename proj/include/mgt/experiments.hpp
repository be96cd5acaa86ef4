#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <future>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mgt/diagnostics.hpp"
#include "mgt/dynamics.hpp"
#include "mgt/errors.hpp"
#include "mgt/grid.hpp"
#include "mgt/model.hpp"

namespace mgt {

// ---------------------------------------------------------------------------
// reference problems

/// gamma = ghat = Gamma = 1, alpha = D = 1.
inline CoefficientSet reference_constant_coefficients() { return CoefficientSet::constant(1.0, 1.0, 1.0, 1.0, 1.0); }

/// Mildly temperature-dependent coefficients used by the diagnostics campaigns.
inline CoefficientSet reference_varying_coefficients() {
    CoefficientSet c;
    c.alpha = 1.0;
    c.D = 1.0;
    c.gamma = Coefficient(CoefficientSpec::polynomial({1.0, 0.3}));
    c.ghat = Coefficient(CoefficientSpec::exponential(0.8, 0.4, 0.2));
    c.Gamma = Coefficient(CoefficientSpec::polynomial({0.5, 0.0, 0.1}));
    return c;
}

/// Small mean-free data: u0 = a cos(pi x/L), u0t = a cos(2 pi x/L), u0tt = 0,
/// Theta0 = 0.5 + 0.1 cos(pi x/L).
inline InitialData reference_data(const Grid& g, double amplitude = 0.1) {
    return make_initial_data(FieldSpec::cosine({{1, amplitude}}), FieldSpec::cosine({{2, amplitude}}),
                             FieldSpec::zero(), FieldSpec::cosine({{1, 0.1}}, 0.5), g, true);
}

/// Manufactured solution with exact fields
///   u = cos(k x) cos t,  Theta = 1 + cos(k x) e^{-t},  k = pi/L,
/// and the sources that make it solve the system with eps = 0.
struct ManufacturedProblem {
    double L = 1.0, alpha = 0.7, D = 0.5;

    [[nodiscard]] CoefficientSet coefficients() const {
        CoefficientSet c;
        c.alpha = alpha;
        c.D = D;
        c.gamma = Coefficient(CoefficientSpec::polynomial({1.0, 0.2}));
        c.ghat = Coefficient(CoefficientSpec::polynomial({1.0, 0.0, 0.1}));
        c.Gamma = Coefficient(CoefficientSpec::polynomial({0.5, 0.1}));
        return c;
    }
    [[nodiscard]] double k() const { return std::numbers::pi / L; }
    [[nodiscard]] double u(double x, double t) const { return std::cos(k() * x) * std::cos(t); }
    [[nodiscard]] double v(double x, double t) const { return -std::cos(k() * x) * std::sin(t); }
    [[nodiscard]] double w(double x, double t) const { return -std::cos(k() * x) * std::cos(t); }
    [[nodiscard]] double theta(double x, double t) const { return 1.0 + std::cos(k() * x) * std::exp(-t); }

    [[nodiscard]] SourceTerms sources() const {
        const CoefficientSet c = coefficients();
        const ManufacturedProblem m = *this;
        SourceTerms s;
        s.f_u = [c, m](double x, double t) {
            const double k = m.k(), C = std::cos(k * x), S = std::sin(k * x);
            const double th = m.theta(x, t), th_x = -k * S * std::exp(-t);
            const double u_ttt = C * std::sin(t), u_tt = -C * std::cos(t);
            const double u_x = -k * S * std::cos(t), u_xx = -k * k * C * std::cos(t);
            const double u_xt = k * S * std::sin(t), u_xxt = k * k * C * std::sin(t);
            const double div = c.gamma.d1(th) * th_x * u_xt + c.gamma(th) * u_xxt + c.ghat.d1(th) * th_x * u_x +
                               c.ghat(th) * u_xx;
            return u_ttt + c.alpha * u_tt - div;
        };
        s.f_theta = [c, m](double x, double t) {
            const double k = m.k(), C = std::cos(k * x), S = std::sin(k * x);
            const double u_xt = k * S * std::sin(t);
            return -C * std::exp(-t) + c.D * k * k * C * std::exp(-t) - c.Gamma(m.theta(x, t)) * u_xt * u_xt;
        };
        return s;
    }
    [[nodiscard]] InitialData initial(const Grid& g) const {
        return make_initial_data(FieldSpec::cosine({{1, 1.0}}), FieldSpec::zero(), FieldSpec::cosine({{1, -1.0}}),
                                 FieldSpec::cosine({{1, 1.0}}, 1.0), g, false);
    }
    /// max over nodes and fields of the pointwise error
    [[nodiscard]] double error(const State& s) const {
        double e = 0.0;
        for (std::size_t i = 0; i < s.grid().n; ++i) {
            const double x = s.grid().x(i);
            e = std::max({e, std::abs(s.u[i] - u(x, s.t)), std::abs(s.v[i] - v(x, s.t)),
                          std::abs(s.w[i] - w(x, s.t)), std::abs(s.theta[i] - theta(x, s.t))});
        }
        return e;
    }
};

// ---------------------------------------------------------------------------
// sweep results

/// Least-squares slope of log(err) against log(param) and the RMS residual of the fit.
struct OrderFit {
    double order = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
};

inline OrderFit fit_order(const std::vector<double>& param, const std::vector<double>& err) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < param.size() && i < err.size(); ++i) {
        if (param[i] > 0.0 && err[i] > 0.0 && std::isfinite(err[i])) {
            x.push_back(std::log(param[i]));
            y.push_back(std::log(err[i]));
        }
    }
    OrderFit f;
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    if (!(den > 0.0)) return f;
    f.order = (n * sxy - sx * sy) / den;
    const double icpt = (sy - f.order * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - icpt - f.order * x[i], 2);
    f.residual = std::sqrt(ss / n);
    return f;
}

struct SweepResult {
    std::string name;       ///< e.g. "eps_sweep"
    std::string parameter;  ///< e.g. "eps", "h", "dt"
    std::vector<double> values;
    std::vector<double> errors;
    OrderFit fit;

    [[nodiscard]] bool strictly_decreasing() const {
        for (std::size_t i = 1; i < errors.size(); ++i)
            if (!(errors[i] < errors[i - 1])) return false;
        return true;
    }
};

namespace detail {
inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
inline double number_or_nan(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
}  // namespace detail

inline nlohmann::json to_json(const SweepResult& r) {
    return {{"name", r.name},
            {"parameter", r.parameter},
            {"values", r.values},
            {"errors", r.errors},
            {"order", detail::number_or_null(r.fit.order)},
            {"order_residual", detail::number_or_null(r.fit.residual)}};
}

inline SweepResult sweep_from_json(const nlohmann::json& j) {
    SweepResult r;
    r.name = j.at("name").get<std::string>();
    r.parameter = j.at("parameter").get<std::string>();
    r.values = j.at("values").get<std::vector<double>>();
    r.errors = j.at("errors").get<std::vector<double>>();
    r.fit.order = detail::number_or_nan(j.at("order"));
    r.fit.residual = detail::number_or_nan(j.at("order_residual"));
    return r;
}

namespace detail {

/// Runs jobs concurrently and returns their results in submission order.
template <class T>
std::vector<T> run_parallel(const std::vector<std::function<T()>>& jobs) {
    std::vector<std::future<T>> futures;
    futures.reserve(jobs.size());
    for (const auto& job : jobs) futures.push_back(std::async(std::launch::async, job));
    std::vector<T> out;
    out.reserve(jobs.size());
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

/// max over snapshots and fields of |a - b|_inf (b injected onto a's grid when finer).
inline double sup_distance(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size()) throw TimeMismatch("trajectories have different numbers of snapshots");
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const State& x = a.snapshots[j];
        const State& y = b.snapshots[j];
        if (!same_time(x.t, y.t)) throw TimeMismatch("snapshot times differ");
        const Grid& g = x.grid();
        auto d = [&](const GridFunction& p, const GridFunction& q) { return (p - on_grid(q, g)).max_abs(); };
        m = std::max({m, d(x.u, y.u), d(x.v, y.v), d(x.w, y.w), d(x.theta, y.theta)});
    }
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// campaigns

/// Sup-in-time L-infinity distance of each eps run to the eps = 0 run on the same grid.
/// eps_list must be strictly decreasing; zero entries give distance 0 and are left out of the fit.
inline SweepResult eps_sweep(const InitialData& init, const CoefficientSet& c, const std::vector<double>& eps_list,
                             const EvolutionParams& params, const MonitorConfig& mon = {}) {
    if (eps_list.empty()) throw ValidationError("eps_sweep: empty eps list");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        if (!(eps_list[i] >= 0.0)) throw ValidationError("eps_sweep: eps >= 0 required");
        if (i > 0 && !(eps_list[i] < eps_list[i - 1])) throw ValidationError("eps_sweep: eps list must decrease strictly");
    }
    std::vector<std::function<Trajectory()>> jobs;
    auto job = [&](double eps) {
        return [&, eps] {
            EvolutionParams p = params;
            p.eps = eps;
            return evolve(init, c, p, {}, mon);
        };
    };
    jobs.push_back(job(0.0));
    for (double e : eps_list) jobs.push_back(job(e));
    const auto runs = detail::run_parallel(jobs);
    SweepResult r;
    r.name = "eps_sweep";
    r.parameter = "eps";
    r.values = eps_list;
    for (std::size_t i = 0; i < eps_list.size(); ++i) r.errors.push_back(detail::sup_distance(runs[i + 1], runs[0]));
    r.fit = fit_order(r.values, r.errors);
    return r;
}

enum class RefinementReference { finest, manufactured };

/// Spatial refinement over a doubling ladder n_k = 2 n_{k-1} - 1. Against `finest`, the
/// finest run is the reference and is itself left out of the table; against
/// `manufactured`, `exact_error` measures each run's final state.
inline SweepResult grid_refinement(const std::function<InitialData(const Grid&)>& make_init, const CoefficientSet& c,
                                   const EvolutionParams& params, const std::vector<std::size_t>& n_list,
                                   RefinementReference reference, double L = 1.0, const SourceTerms& src = {},
                                   const std::function<double(const State&)>& exact_error = {}) {
    if (n_list.empty()) throw ValidationError("grid_refinement: empty grid list");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] != 2 * n_list[i - 1] - 1)
            throw ValidationError("grid_refinement: grids must double (n_k = 2 n_{k-1} - 1) to share nodes");
    if (reference == RefinementReference::manufactured && !exact_error)
        throw ValidationError("grid_refinement: manufactured reference needs an exact-error functional");

    std::vector<std::function<State()>> jobs;
    for (std::size_t n : n_list) {
        jobs.push_back([&, n] {
            const Grid g(L, n);
            return evolve(make_init(g), c, params, src).snapshots.back();
        });
    }
    const auto finals = detail::run_parallel(jobs);
    SweepResult r;
    r.name = "grid_refinement";
    r.parameter = "h";
    const std::size_t count = reference == RefinementReference::finest ? n_list.size() - 1 : n_list.size();
    for (std::size_t i = 0; i < count; ++i) {
        const State& s = finals[i];
        double e = 0.0;
        if (reference == RefinementReference::manufactured) {
            e = exact_error(s);
        } else {
            const State& f = finals.back();
            const Grid& g = s.grid();
            e = std::max({(s.u - inject(f.u, g)).max_abs(), (s.v - inject(f.v, g)).max_abs(),
                          (s.w - inject(f.w, g)).max_abs(), (s.theta - inject(f.theta, g)).max_abs()});
        }
        r.values.push_back(s.grid().h());
        r.errors.push_back(e);
    }
    r.fit = fit_order(r.values, r.errors);
    return r;
}

enum class TwinPairing { grids, schemes, time_steps };

struct TwinResult {
    DifferenceSeries series;
    double y0 = 0.0;
    double sup = 0.0;
    double gronwall = std::numeric_limits<double>::quiet_NaN();  ///< fitted C when y0 > 0
};

/// Difference functional between two runs on their common monitor times.
/// Throws ValidationError when y_diff(0) exceeds tol_y0 for runs that should share data.
inline TwinResult twin_run_uniqueness(const Trajectory& a, const Trajectory& b, const CoefficientSet& c,
                                      const ConstantsEstimate& k, double tol_y0 = std::numeric_limits<double>::infinity()) {
    TwinResult r;
    r.series = difference_functional(a, b, c, k);
    if (r.series.y_diff.empty()) return r;
    r.y0 = r.series.y_diff.front();
    if (r.y0 > tol_y0)
        throw ValidationError("twin runs differ at t = 0: y_diff(0) = " + std::to_string(r.y0));
    r.sup = r.series.sup();
    if (r.y0 > 0.0) r.gronwall = fitted_gronwall_constant(r.series);
    return r;
}

/// Runs the pair described by `pairing` from data built on each grid and compares them:
///   grids:      n and 2n - 1 with identical time stepping;
///   schemes:    semi-implicit against explicit RK4 on grid n (dt taken from `params`);
///   time_steps: dt and dt / 2 (cadence doubled so monitor times coincide).
inline TwinResult twin_run_uniqueness(const std::function<InitialData(const Grid&)>& make_init,
                                      const CoefficientSet& c, const EvolutionParams& params, const MonitorConfig& mon,
                                      TwinPairing pairing, std::size_t n, const ConstantsEstimate& k, double L = 1.0) {
    const Grid ga(L, n);
    Grid gb = ga;
    EvolutionParams pb = params;
    MonitorConfig mb = mon;
    switch (pairing) {
        case TwinPairing::grids: gb = Grid(L, 2 * n - 1); break;
        case TwinPairing::schemes:
            pb.scheme = params.scheme == Scheme::semi_implicit ? Scheme::explicit_rk4 : Scheme::semi_implicit;
            break;
        case TwinPairing::time_steps:
            pb.dt = 0.5 * params.dt;
            mb.cadence = 2 * std::max<std::size_t>(1, mon.cadence);
            break;
    }
    std::vector<std::function<Trajectory()>> jobs{[&] { return evolve(make_init(ga), c, params, {}, mon); },
                                                  [&] { return evolve(make_init(gb), c, pb, {}, mb); }};
    const auto runs = detail::run_parallel(jobs);
    return twin_run_uniqueness(runs[0], runs[1], c, k, 1e-12);
}

struct BlowupDemoConfig {
    CoefficientSet growth;                     ///< coefficient growth law, e.g. all exp(Theta)
    std::vector<double> amplitudes{10.0, 5.0, 2.5};  ///< v0 = a cos(pi x/L)
    double control_amplitude = 0.1;
    double L = 1.0;
    std::size_t n = 65;
    double dt = 1e-5;
    double control_dt = 1e-3;
    double t_end = 5.0;
    int refinements = 3;
    MonitorConfig monitor = [] {
        MonitorConfig m;
        m.cadence = 100;
        m.blowup_growth = 1e2;
        return m;
    }();
};

struct BlowupCase {
    double amplitude = 0.0;
    Outcome outcome = Outcome::completed;
    double trip_time = std::numeric_limits<double>::quiet_NaN();
    double monitor = 0.0;
    double dt = 0.0;  ///< step size of the reported run
    std::string message;
};

struct BlowupReport {
    std::vector<BlowupCase> cases;  ///< in the configured amplitude order
    BlowupCase control;

    [[nodiscard]] bool all_tripped() const {
        return std::all_of(cases.begin(), cases.end(), [](const BlowupCase& c) { return c.outcome == Outcome::blowup_suspected; });
    }
    /// trip time increases as the amplitude decreases
    [[nodiscard]] bool monotone() const {
        std::vector<BlowupCase> s = cases;
        std::sort(s.begin(), s.end(), [](const BlowupCase& a, const BlowupCase& b) { return a.amplitude > b.amplitude; });
        for (std::size_t i = 1; i < s.size(); ++i)
            if (!(s[i].trip_time > s[i - 1].trip_time)) return false;
        return all_tripped();
    }
};

namespace detail {
inline InitialData blowup_data(const Grid& g, double amplitude) {
    return make_initial_data(FieldSpec::zero(), FieldSpec::cosine({{1, amplitude}}), FieldSpec::zero(),
                             FieldSpec::constant(0.0), g, true);
}
/// A failed step (the temperature overflowing inside one step) reruns the case with
/// dt / 4, at most `refinements` times, so that the monitor can resolve the growth.
inline BlowupCase blowup_case(const InitialData& d, const CoefficientSet& c, EvolutionParams p, const MonitorConfig& m,
                              double amplitude, int refinements) {
    BlowupCase out;
    out.amplitude = amplitude;
    for (int level = 0;; ++level) {
        EvolveResult r = run_evolution(d, c, p, {}, m);
        out.outcome = r.outcome;
        out.message = r.message;
        out.dt = p.dt;
        out.trip_time = r.outcome != Outcome::completed ? r.abort_time : std::numeric_limits<double>::quiet_NaN();
        out.monitor = r.outcome == Outcome::blowup_suspected ? r.abort_monitor : r.trajectory.monitor.back();
        const bool failed = r.outcome == Outcome::solver_failure || r.outcome == Outcome::non_finite;
        if (!failed || level >= refinements) return out;
        p.dt *= 0.25;
    }
}
}  // namespace detail

/// Large-data runs under the growth law with the monitor armed, plus a small-data
/// control with gamma = ghat = Gamma = 1 that is expected to complete.
inline BlowupReport blowup_demo(const BlowupDemoConfig& cfg) {
    const Grid g(cfg.L, cfg.n);
    MonitorConfig mon = cfg.monitor;
    mon.blowup_armed = true;
    std::vector<std::function<BlowupCase()>> jobs;
    for (double a : cfg.amplitudes) {
        jobs.push_back([&, a] {
            EvolutionParams p;
            p.dt = cfg.dt;
            p.t_end = cfg.t_end;
            return detail::blowup_case(detail::blowup_data(g, a), cfg.growth, p, mon, a, cfg.refinements);
        });
    }
    jobs.push_back([&] {
        EvolutionParams p;
        p.dt = cfg.control_dt;
        p.t_end = cfg.t_end;
        return detail::blowup_case(detail::blowup_data(g, cfg.control_amplitude), reference_constant_coefficients(), p,
                                   mon, cfg.control_amplitude, 0);
    });
    auto results = detail::run_parallel(jobs);
    BlowupReport rep;
    rep.control = results.back();
    results.pop_back();
    rep.cases = std::move(results);
    return rep;
}

/// Period averages for the harmonic strain S = A sin(w t) at constant stiffness c = c(theta_ref).
struct HarmonicLossReport {
    double stored = 0.0;     ///< <c S S_t>
    double work = 0.0;       ///< <P> with T_t = c S_t
    double loss = 0.0;       ///< <Q> = <(tau_ret - tau_rel) c S_t^2>
    double expected = 0.0;   ///< (tau_ret - tau_rel) c w^2 A^2 / 2
    double scale = 0.0;      ///< c A^2 w
};

inline HarmonicLossReport harmonic_loss_check(const ZenerMaterial& m, double omega, double amplitude,
                                              double theta_ref = 0.0, std::size_t samples = 4096) {
    if (!(omega > 0.0)) throw ValidationError("harmonic_loss_check: omega > 0 required");
    m.validate();
    const double c = m.stiffness(theta_ref);
    const double period = 2.0 * std::numbers::pi / omega;
    // periodic trapezoid rule: exact for trigonometric polynomials of degree < samples
    HarmonicLossReport r;
    for (std::size_t j = 0; j < samples; ++j) {
        const double t = period * static_cast<double>(j) / static_cast<double>(samples);
        const double S = amplitude * std::sin(omega * t), St = amplitude * omega * std::cos(omega * t);
        const double Tt = c * St;
        r.stored += c * S * St;
        r.work += c * S * St + m.tau_ret * c * St * St - m.tau_rel * St * Tt;
        r.loss += (m.tau_ret - m.tau_rel) * c * St * St;
    }
    const auto N = static_cast<double>(samples);
    r.stored /= N;
    r.work /= N;
    r.loss /= N;
    r.expected = (m.tau_ret - m.tau_rel) * c * omega * omega * amplitude * amplitude / 2.0;
    r.scale = c * amplitude * amplitude * omega;
    return r;
}

}  // namespace mgt
