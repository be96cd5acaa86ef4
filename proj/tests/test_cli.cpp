#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string output;
};

Result run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" MGTSIM_PATH "\" " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    char buf[512];
    while (std::fgets(buf, sizeof buf, p) != nullptr) r.output += buf;
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("mgt_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json summary(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "summary.json")); }

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

const std::string configs = MGT_CONFIG_DIR;

}  // namespace

TEST(Cli, HelpListsSubcommands) {
    auto r = run("--help");
    EXPECT_EQ(r.code, 0);
    for (const char* s : {"run", "sweep-eps", "refine", "twins", "picard", "blowup", "materials"})
        EXPECT_NE(r.output.find(s), std::string::npos) << s;
    EXPECT_NE(run("").code, 0);
    EXPECT_NE(run("run").code, 0);  // --config is required
}

TEST(Cli, ZeroDataRun) {
    auto dir = scratch("zero");
    auto cfg = write_config(dir, R"({"grid": {"n": 17}, "evolution": {"dt": 0.01, "t_end": 0.05}})");
    auto r = run("run --quiet --config " + cfg.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(r.output.empty()) << r.output;
    EXPECT_EQ(summary(dir / "out")["outcome"], "completed");
    EXPECT_TRUE(fs::exists(dir / "out" / "diagnostics.csv"));
}

TEST(Cli, EnvironmentOverridesOutputDirectory) {
    auto dir = scratch("env");
    auto cfg = write_config(dir, R"({"grid": {"n": 9}, "evolution": {"dt": 0.01, "t_end": 0.02}})");
    auto r = run("run --quiet --config " + cfg.string(), "MGTSIM_OUT_DIR=" + (dir / "envout").string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(dir / "envout" / "summary.json"));
}

TEST(Cli, ValidationExitCode) {
    auto dir = scratch("validation");
    auto cfg = write_config(dir, R"({"material": {"tau_rel": 2, "tau_ret": 1}})");
    auto r = run("run --config " + cfg.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("tau_rel < tau_ret required"), std::string::npos);
    EXPECT_EQ(summary(dir / "out")["error"]["kind"], "ValidationError");

    auto bad = write_config(dir, R"({"viscocity": 1})");
    EXPECT_EQ(run("run --quiet --config " + bad.string() + " --out " + (dir / "out2").string()).code, 2);
    EXPECT_EQ(summary(dir / "out2")["error"]["kind"], "SchemaError");
}

TEST(Cli, SolverFailureExitCode) {
    auto dir = scratch("failure");
    auto cfg = write_config(dir, R"({
      "grid": {"n": 65},
      "coefficients": {"gamma": {"kind": "exponential", "a": 1, "b": 1}, "ghat": {"kind": "exponential", "a": 1, "b": 1},
                       "Gamma": {"kind": "exponential", "a": 1, "b": 1}},
      "initial": {"u0t": {"kind": "cosine", "modes": [[1, 10.0]]}},
      "evolution": {"dt": 1e-3, "t_end": 0.1},
      "monitors": {"blowup_armed": false}
    })");
    auto r = run("run --quiet --config " + cfg.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 3) << r.output;
    EXPECT_EQ(summary(dir / "out")["outcome"], "solver_failure");
}

TEST(Cli, StabilityAndSignChecksAreValidationErrors) {
    auto dir = scratch("rk4");
    auto cfg = write_config(dir, R"({"grid": {"n": 65}, "evolution": {"scheme": "explicit_rk4", "dt": 0.1, "t_end": 0.2}})");
    auto r = run("run --quiet --config " + cfg.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.code, 2) << r.output;  // stability guard is a validation error
    auto neg = write_config(dir, R"({"grid": {"n": 17}, "initial": {"theta0": -1}})");
    EXPECT_EQ(run("run --quiet --config " + neg.string() + " --out " + (dir / "out2").string()).code, 2);
}

TEST(Cli, BlowupExitCodeAndTStar) {
    auto dir = scratch("blowup");
    auto r = run("blowup --quiet --config " + configs + "/blowup.json --out " + dir.string());
    EXPECT_EQ(r.code, 4) << r.output;
    auto s = summary(dir);
    EXPECT_EQ(s["outcome"], "blowup_suspected");
    EXPECT_GT(s["t_star"].get<double>(), 0.0);
    EXPECT_LT(s["t_star"].get<double>(), 5.0);
    EXPECT_TRUE(s["monotone_trip_times"].get<bool>());
}

TEST(Cli, EpsSweepTable) {
    auto dir = scratch("sweep");
    auto cfg = write_config(dir, R"({
      "grid": {"n": 33},
      "initial": {"u0": {"kind": "cosine", "modes": [[1, 0.1]]}, "u0t": {"kind": "cosine", "modes": [[2, 0.1]]},
                  "theta0": 0.5},
      "evolution": {"dt": 0.005, "t_end": 0.3},
      "experiment": {"kind": "sweep-eps", "eps_list": [0.1, 0.01, 0.001]}
    })");
    auto r = run("sweep-eps --quiet --config " + cfg.string() + " --out " + dir.string() + "/out");
    EXPECT_EQ(r.code, 0) << r.output;
    const std::string csv = slurp(dir / "out" / "sweep_eps.csv");
    EXPECT_EQ(csv.substr(0, 11), "eps,error\r\n");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_TRUE(summary(dir / "out")["fitted_order"].is_number());
}

TEST(Cli, SubcommandOverridesConfigKind) {
    auto dir = scratch("override");
    auto r = run("materials --quiet --config " + configs + "/materials.json --out " + dir.string());
    EXPECT_EQ(r.code, 0) << r.output;
    auto s = summary(dir);
    EXPECT_NEAR(s["harmonic_loss"]["loss"].get<double>(), 0.5, 1e-12);
    auto r2 = run("picard --quiet --config " + configs + "/picard.json --out " + dir.string() + "/p --seed 42");
    EXPECT_EQ(r2.code, 0) << r2.output;
    auto p = summary(dir / "p");
    EXPECT_EQ(p["config"]["seed"], 42);
    EXPECT_EQ(p["outcome"], "converged");
    EXPECT_TRUE(fs::exists(dir / "p" / "contraction.csv"));
}
