#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mgt/config.hpp"
#include "mgt/diagnostics.hpp"
#include "mgt/dynamics.hpp"
#include "mgt/errors.hpp"
#include "mgt/experiments.hpp"
#include "mgt/io.hpp"
#include "mgt/picard.hpp"

namespace mgt {

inline constexpr const char* output_dir_env = "MGTSIM_OUT_DIR";

struct AppOptions {
    std::optional<std::string> out_dir;   ///< --out, wins over the environment and the config
    std::optional<std::uint64_t> seed;    ///< --seed
    bool quiet = false;
};

/// Column order of the diagnostics table.
inline std::vector<std::string> diagnostics_header() {
    std::vector<std::string> h{"t", "mean_u", "mean_v", "mean_w", "min_theta", "y"};
    for (std::size_t i = 0; i < energy_term_count; ++i) h.push_back("y_terms[" + std::to_string(i) + "]");
    for (const char* s : {"identity_residual", "k13_fitted", "blowup_monitor"}) h.emplace_back(s);
    return h;
}

inline std::filesystem::path resolve_output_dir(const RunConfig& cfg, const AppOptions& opt) {
    if (opt.out_dir) return *opt.out_dir;
    if (const char* env = std::getenv(output_dir_env); env != nullptr && *env != '\0') return env;
    return cfg.output.directory;
}

namespace detail {

inline nlohmann::json to_json(const ConstantsEstimate& k) {
    return {{"M", k.M},   {"k1", k.k1},   {"k2", k.k2}, {"k3", k.k3},   {"k4", k.k4},   {"k5", k.k5},
            {"k6", k.k6}, {"k7", k.k7},   {"k8", k.k8}, {"k9", k.k9},   {"k10", k.k10}, {"B", k.B},
            {"k12", k.k12}, {"B1", k.B1}, {"B2", k.B2}};
}

struct Artifacts {
    std::filesystem::path dir;
    bool quiet = false;
    std::vector<std::string> written;

    void write(const std::string& name, const std::string& text) {
        write_file_atomic(dir / name, text);
        written.push_back(name);
    }
    void say(const std::string& line) const {
        if (!quiet) std::printf("%s\n", line.c_str());
    }
};

inline std::string snapshot_csv(const State& s) {
    CsvTable t({"x", "u", "v", "w", "theta"});
    for (std::size_t i = 0; i < s.grid().n; ++i) t.add_row(std::vector<double>{s.grid().x(i), s.u[i], s.v[i], s.w[i], s.theta[i]});
    return t.text();
}

inline void write_trajectory(const Trajectory& tr, const RunConfig& cfg, const ConstantsEstimate& k, Artifacts& out,
                             nlohmann::json& summary) {
    const double eps = cfg.evolution.eps;
    const CoefficientSet& c = cfg.coefficients;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::size_t N = tr.size();

    std::vector<EnergyReport> energy;
    if (cfg.diagnostics.energy) energy = energy_series(tr, c, k, eps);
    std::vector<double> identity(N, nan), k13(N, nan);
    if (cfg.diagnostics.identity && N >= 3) {
        const IdentityResidual r = energy_identity_residual(tr, c, eps);
        for (std::size_t j = 0; j < r.residual.size(); ++j) identity[j + 1] = r.residual[j];
        summary["identity_residual_l1"] = r.l1();
        summary["identity_residual_sup"] = r.sup();
    }
    if (cfg.diagnostics.riccati && N >= 2) {
        const auto series = riccati_series(tr, c, k, eps);
        double run = 0.0;
        k13[0] = 0.0;
        for (std::size_t j = 0; j < series.size(); ++j) {
            if (!std::isnan(series[j])) run = std::max(run, series[j]);
            k13[j + 1] = run;
        }
        summary["k13_fitted"] = run;
    }
    if (!energy.empty()) summary["lower_bound_slack"] = lower_bound_slack(energy, k);

    CsvTable table(diagnostics_header());
    for (std::size_t j = 0; j < N; ++j) {
        const State& s = tr.snapshots[j];
        std::vector<double> row{s.t, mean(s.u), mean(s.v), mean(s.w), s.theta.values.minCoeff()};
        if (!energy.empty()) {
            row.push_back(energy[j].y);
            for (double term : energy[j].terms) row.push_back(term);
        } else {
            row.insert(row.end(), energy_term_count + 1, nan);
        }
        row.push_back(identity[j]);
        row.push_back(k13[j]);
        row.push_back(tr.monitor[j]);
        table.add_row(row);
    }
    out.write("diagnostics.csv", table.text());

    if (cfg.output.snapshots) {
        const std::size_t cadence = std::max<std::size_t>(1, cfg.monitor.cadence);
        const std::size_t every = cfg.output.snapshot_cadence == 0 ? 1 : std::max<std::size_t>(1, cfg.output.snapshot_cadence / cadence);
        std::size_t index = 0;
        for (std::size_t j = 0; j < N; ++j) {
            if (j % every != 0 && j + 1 != N) continue;
            char name[48];
            std::snprintf(name, sizeof name, "snapshot_%05zu.csv", index++);
            out.write(name, snapshot_csv(tr.snapshots[j]));
        }
        summary["snapshot_files"] = index;
    }
}

inline int outcome_code(Outcome o) {
    switch (o) {
        case Outcome::completed: return exit_code::ok;
        case Outcome::blowup_suspected: return exit_code::blowup;
        case Outcome::solver_failure:
        case Outcome::non_finite: return exit_code::solver_failure;
    }
    return exit_code::generic;
}

inline int run_evolve(const RunConfig& cfg, Artifacts& out, nlohmann::json& summary) {
    const Grid g = cfg.grid();
    const InitialData d = cfg.initial(g);
    const ConstantsEstimate k = estimate_k_constants(cfg.coefficients, default_theta_bound(d, cfg.coefficients));
    summary["constants"] = to_json(k);
    EvolveResult r = run_evolution(d, cfg.coefficients, cfg.evolution, {}, cfg.monitor);
    summary["outcome"] = to_string(r.outcome);
    if (r.outcome != Outcome::completed) {
        summary["abort_time"] = r.abort_time;
        summary["abort_monitor"] = r.abort_monitor;
        summary["message"] = r.message;
    }
    summary["steps"] = r.trajectory.steps.size() - 1;
    write_trajectory(r.trajectory, cfg, k, out, summary);
    out.say(std::string("run: ") + to_string(r.outcome) + " at t = " + format_double(r.trajectory.snapshots.back().t));
    return outcome_code(r.outcome);
}

inline void write_sweep(const SweepResult& r, const std::string& file, Artifacts& out, nlohmann::json& summary) {
    CsvTable t({r.parameter, "error"});
    for (std::size_t i = 0; i < r.values.size(); ++i) t.add_row(std::vector<double>{r.values[i], r.errors[i]});
    out.write(file, t.text());
    summary["sweep"] = mgt::to_json(r);
    summary["fitted_order"] = number_or_null(r.fit.order);
    out.say(r.name + ": order " + format_double(r.fit.order));
}

inline int run_eps_sweep(const RunConfig& cfg, Artifacts& out, nlohmann::json& summary) {
    const Grid g = cfg.grid();
    const SweepResult r = eps_sweep(cfg.initial(g), cfg.coefficients, cfg.params.eps_list, cfg.evolution, cfg.monitor);
    write_sweep(r, "sweep_eps.csv", out, summary);
    summary["strictly_decreasing"] = r.strictly_decreasing();
    summary["outcome"] = "completed";
    return exit_code::ok;
}

inline int run_refine(const RunConfig& cfg, Artifacts& out, nlohmann::json& summary) {
    SweepResult r;
    if (cfg.params.reference == RefinementReference::manufactured) {
        ManufacturedProblem m;
        m.L = cfg.L;
        r = grid_refinement([&](const Grid& g) { return m.initial(g); }, m.coefficients(), cfg.evolution, cfg.params.n_list,
                            RefinementReference::manufactured, cfg.L, m.sources(),
                            [&](const State& s) { return m.error(s); });
    } else {
        r = grid_refinement([&](const Grid& g) { return cfg.initial(g); }, cfg.coefficients, cfg.evolution,
                            cfg.params.n_list, RefinementReference::finest, cfg.L);
    }
    write_sweep(r, "refine.csv", out, summary);
    summary["outcome"] = "completed";
    return exit_code::ok;
}

inline int run_twins(const RunConfig& cfg, Artifacts& out, nlohmann::json& summary) {
    const Grid g = cfg.grid();
    const CoefficientSet& c = cfg.coefficients;
    const InitialData d = cfg.initial(g);
    const ConstantsEstimate k = estimate_k_constants(c, default_theta_bound(d, c));
    summary["constants"] = to_json(k);
    TwinResult r;
    if (cfg.params.perturbation != 0.0) {
        InitialData e = d;
        e.u0 = d.u0 + cfg.params.perturbation * cosine_mode(g, 1);
        r = twin_run_uniqueness(evolve(d, c, cfg.evolution, {}, cfg.monitor), evolve(e, c, cfg.evolution, {}, cfg.monitor), c, k);
        summary["pairing"] = "perturbed_data";
    } else {
        r = twin_run_uniqueness([&](const Grid& h) { return cfg.initial(h); }, c, cfg.evolution, cfg.monitor,
                                cfg.params.pairing, cfg.n, k, cfg.L);
        summary["pairing"] = cfg.echo["experiment"]["pairing"];
    }
    CsvTable t({"t", "y_diff"});
    for (std::size_t j = 0; j < r.series.t.size(); ++j) t.add_row(std::vector<double>{r.series.t[j], r.series.y_diff[j]});
    out.write("twins.csv", t.text());
    summary["y_diff_0"] = r.y0;
    summary["y_diff_sup"] = r.sup;
    summary["gronwall_constant"] = number_or_null(r.gronwall);
    summary["outcome"] = "completed";
    out.say("twins: sup y_diff " + format_double(r.sup));
    return exit_code::ok;
}

inline int run_picard(const RunConfig& cfg, Artifacts& out, nlohmann::json& summary) {
    const Grid g = cfg.grid();
    PicardConfig pc;
    pc.eps = cfg.evolution.eps;
    pc.R = cfg.params.R;
    pc.T0 = cfg.params.T0;
    pc.T = cfg.params.T;
    pc.horizon_fraction = cfg.params.horizon_fraction;
    pc.n_time = cfg.params.n_time;
    pc.max_iter = cfg.params.max_iter;
    pc.tol = cfg.params.tol;
    pc.seed = cfg.seed;
    const PicardResult r = picard_solve(cfg.initial(g), cfg.coefficients, pc);
    CsvTable t({"iteration", "diff", "ratio", "norm", "ball_excess"});
    for (const auto& h : r.history)
        t.add_row(std::vector<double>{static_cast<double>(h.k), h.diff, h.ratio, h.norm, h.norm - r.R});
    out.write("contraction.csv", t.text());
    summary["semigroup_constants"] = {{"c1", r.constants.c1}, {"c2", r.constants.c2}, {"c3", r.constants.c3}};
    summary["R"] = r.R;
    summary["T0"] = r.T0;
    summary["T"] = r.T;
    summary["iterations"] = r.iterations();
    summary["ball_excess"] = r.ball_excess();
    summary["outcome"] = r.converged ? "converged" : "not_converged";
    if (cfg.output.snapshots) {
        out.write("picard_final.csv", snapshot_csv(r.path.at.back()));
    }
    out.say("picard: " + std::to_string(r.iterations()) + " iterations, T = " + format_double(r.T));
    return exit_code::ok;
}

inline int run_blowup(const RunConfig& cfg, Artifacts& out, nlohmann::json& summary) {
    BlowupDemoConfig bc;
    bc.growth = cfg.coefficients;
    bc.amplitudes = cfg.params.amplitudes;
    bc.control_amplitude = cfg.params.control_amplitude;
    bc.L = cfg.L;
    bc.n = cfg.n;
    bc.dt = cfg.params.blowup_dt;
    bc.control_dt = cfg.evolution.dt;
    bc.t_end = cfg.evolution.t_end;
    bc.monitor = cfg.monitor;
    bc.monitor.blowup_growth = cfg.params.blowup_growth;
    const BlowupReport r = blowup_demo(bc);
    CsvTable t({"amplitude", "outcome", "trip_time", "monitor", "dt"});
    nlohmann::json cases = nlohmann::json::array();
    auto row = [&](const BlowupCase& b, const std::string& label) {
        t.add_row(std::vector<std::string>{format_double(b.amplitude), label + to_string(b.outcome),
                                           format_double(b.trip_time), format_double(b.monitor), format_double(b.dt)});
        cases.push_back({{"amplitude", b.amplitude},
                         {"outcome", to_string(b.outcome)},
                         {"t_star", number_or_null(b.trip_time)},
                         {"monitor", b.monitor},
                         {"dt", b.dt},
                         {"control", !label.empty()}});
    };
    for (const auto& b : r.cases) row(b, "");
    row(r.control, "control:");
    out.write("blowup.csv", t.text());
    summary["cases"] = cases;
    summary["monotone_trip_times"] = r.monotone();
    double t_star = std::numeric_limits<double>::quiet_NaN();
    for (const auto& b : r.cases)
        if (b.outcome == Outcome::blowup_suspected && !(b.trip_time >= t_star)) t_star = b.trip_time;
    summary["t_star"] = number_or_null(t_star);
    const bool tripped = std::any_of(r.cases.begin(), r.cases.end(),
                                     [](const BlowupCase& b) { return b.outcome == Outcome::blowup_suspected; });
    summary["outcome"] = tripped ? "blowup_suspected" : "completed";
    out.say(std::string("blowup: ") + (tripped ? "suspected, t* = " + format_double(t_star) : "not observed"));
    return tripped ? exit_code::blowup : exit_code::ok;
}

inline int run_materials(const RunConfig& cfg, Artifacts& out, nlohmann::json& summary) {
    if (!cfg.zener) throw ValidationError("materials: the configuration needs a material block");
    const ZenerMaterial& m = *cfg.zener;
    const CoefficientSet& c = cfg.coefficients;
    const ValidationReport v = validate_coefficients(c, m.theta_max);
    CsvTable t({"theta", "gamma", "ghat", "Gamma"});
    constexpr int samples = 101;
    for (int i = 0; i < samples; ++i) {
        const double th = m.theta_max * i / (samples - 1);
        t.add_row(std::vector<double>{th, c.gamma(th), c.ghat(th), c.Gamma(th)});
    }
    out.write("materials.csv", t.text());
    const HarmonicLossReport h = harmonic_loss_check(m, cfg.params.omega, cfg.params.strain_amplitude);
    summary["coefficients"] = {{"alpha", c.alpha}, {"D", c.D}, {"gamma_0", c.gamma(0.0)}, {"ghat_0", c.ghat(0.0)},
                               {"Gamma_0", c.Gamma(0.0)}};
    summary["validation"] = {{"passed", v.passed}, {"min_gamma", v.min_gamma}, {"min_ghat", v.min_ghat},
                             {"min_Gamma", v.min_Gamma}, {"derivative_error", v.derivative_error},
                             {"failures", v.failures}};
    summary["harmonic_loss"] = {{"stored", h.stored}, {"work", h.work}, {"loss", h.loss}, {"expected", h.expected},
                                {"scale", h.scale}};
    summary["outcome"] = v.passed ? "completed" : "invalid_coefficients";
    out.say("materials: <Q> = " + format_double(h.loss) + ", expected " + format_double(h.expected));
    return v.passed ? exit_code::ok : exit_code::validation;
}

}  // namespace detail

/// Runs the configured experiment, writes its artifacts and summary.json, and
/// returns the process exit status. Library errors are recorded in the summary.
inline int run_app(RunConfig cfg, const AppOptions& opt) {
    const auto start = std::chrono::steady_clock::now();
    if (opt.seed) cfg.seed = *opt.seed;
    cfg.echo = to_json(cfg);
    detail::Artifacts out{resolve_output_dir(cfg, opt), opt.quiet, {}};
    nlohmann::json summary;
    summary["experiment"] = to_string(cfg.experiment);
    summary["config"] = cfg.echo;
    summary["config_hash"] = config_hash(cfg);
    int code = exit_code::ok;
    try {
        switch (cfg.experiment) {
            case ExperimentKind::run: code = detail::run_evolve(cfg, out, summary); break;
            case ExperimentKind::eps_sweep: code = detail::run_eps_sweep(cfg, out, summary); break;
            case ExperimentKind::refine: code = detail::run_refine(cfg, out, summary); break;
            case ExperimentKind::twins: code = detail::run_twins(cfg, out, summary); break;
            case ExperimentKind::picard: code = detail::run_picard(cfg, out, summary); break;
            case ExperimentKind::blowup: code = detail::run_blowup(cfg, out, summary); break;
            case ExperimentKind::materials: code = detail::run_materials(cfg, out, summary); break;
        }
    } catch (const BlowupSuspected& e) {
        summary["outcome"] = "blowup_suspected";
        summary["t_star"] = e.time();
        summary["error"] = {{"kind", e.kind()}, {"message", e.what()}};
        code = e.code();
    } catch (const Error& e) {
        summary["outcome"] = "error";
        summary["error"] = {{"kind", e.kind()}, {"message", e.what()}};
        code = e.code();
    }
    summary["exit_code"] = code;
    summary["files"] = out.written;
    summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file_atomic(out.dir / "summary.json", summary.dump(2) + "\n");
    if (code != exit_code::ok && summary.contains("error") && !opt.quiet)
        std::fprintf(stderr, "error: %s\n", summary["error"]["message"].get<std::string>().c_str());
    return code;
}

}  // namespace mgt
