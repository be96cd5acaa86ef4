#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "mgt/app.hpp"

namespace {

int fail_before_run(const mgt::Error& e, const mgt::AppOptions& opt, const std::string& subcommand) {
    if (!opt.quiet) std::fprintf(stderr, "error: %s\n", e.what());
    nlohmann::json summary{{"experiment", subcommand},
                           {"outcome", "error"},
                           {"error", {{"kind", e.kind()}, {"message", e.what()}}},
                           {"exit_code", e.code()}};
    mgt::RunConfig defaults;
    try {
        mgt::write_file_atomic(mgt::resolve_output_dir(defaults, opt) / "summary.json", summary.dump(2) + "\n");
    } catch (const mgt::Error&) {
    }
    return e.code();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mgtsim: simulator and verification harness for the thermoviscoelastic MGT/heat system"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "mgtsim 1.0");

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool quiet = false;

    const std::pair<const char*, const char*> commands[] = {
        {"run", "time-step the configured problem and write diagnostics"},
        {"sweep-eps", "distance of eps-regularized runs to the eps = 0 run"},
        {"refine", "grid refinement against the finest run or the manufactured solution"},
        {"twins", "difference functional between two runs"},
        {"picard", "Duhamel fixed-point iteration on a short horizon"},
        {"blowup", "large-data runs under a growth law with the blow-up monitor armed"},
        {"materials", "Zener parameter mapping and harmonic loss averages"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON configuration file")->required();
        sub->add_option("--out", out_dir, std::string("output directory (default: $") + mgt::output_dir_env +
                                              ", then output.directory)");
        sub->add_option("--seed", seed, "seed of the probe functions");
        sub->add_flag("--quiet", quiet, "no progress output");
    }
    app.footer("exit codes: 0 ok, 2 validation, 3 solver failure, 4 blow-up suspected, 5 no contraction");
    CLI11_PARSE(app, argc, argv);

    const CLI::App* chosen = app.get_subcommands().front();
    mgt::AppOptions opt;
    opt.quiet = quiet;
    if (chosen->count("--out")) opt.out_dir = out_dir;
    if (chosen->count("--seed")) opt.seed = seed;

    mgt::RunConfig cfg;
    try {
        cfg = mgt::parse_config_file(config_path);
    } catch (const mgt::Error& e) {
        return fail_before_run(e, opt, chosen->get_name());
    }
    cfg.experiment = *mgt::experiment_from_string(chosen->get_name());
    return mgt::run_app(std::move(cfg), opt);
}
