#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mgt/app.hpp"
#include "mgt/config.hpp"
#include "mgt/io.hpp"

using namespace mgt;

namespace {

const char* minimal = R"({
  "domain": {"L": 1.0},
  "grid": {"n": 128},
  "coefficients": {"alpha": 1.0, "D": 1.0, "gamma": 1.0, "ghat": 1.0, "Gamma": 0.0}
})";

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("mgt_test_config_" + name);
    std::filesystem::remove_all(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(ParseConfig, MinimalAppliesDefaults) {
    auto c = parse_config_text(minimal);
    EXPECT_EQ(c.n, 128u);
    EXPECT_EQ(c.evolution.eps, 0.0);
    EXPECT_EQ(c.evolution.scheme, Scheme::semi_implicit);
    EXPECT_EQ(c.experiment, ExperimentKind::run);
    EXPECT_EQ(c.monitor.cadence, 10u);
    EXPECT_EQ(c.echo["evolution"]["dt"], 1e-4);
    EXPECT_EQ(c.echo["output"]["directory"], "mgt_out");
    EXPECT_EQ(c.u0.kind, FieldSpec::Kind::constant);
}

TEST(ParseConfig, EchoRoundTrips) {
    auto a = parse_config_file(MGT_CONFIG_DIR "/reference_run.json");
    auto b = parse_config_text(a.echo.dump());
    EXPECT_EQ(a.echo, b.echo);
    EXPECT_EQ(config_hash(a), config_hash(b));
    for (const char* name : {"minimal", "sweep_eps", "refine_mms", "twins", "twins_perturbed", "picard", "blowup", "materials"}) {
        auto c = parse_config_file(std::string(MGT_CONFIG_DIR) + "/" + name + ".json");
        EXPECT_EQ(parse_config_text(c.echo.dump()).echo, c.echo) << name;
    }
}

TEST(ParseConfig, HashTracksContent) {
    auto a = parse_config_text(minimal);
    auto b = parse_config_text(R"({"grid": {"n": 129}})");
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(ParseConfig, MaterialOrdering) {
    try {
        parse_config_text(R"({"material": {"tau_rel": 2, "tau_ret": 1}})");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_STREQ(e.what(), "tau_rel < tau_ret required");
        EXPECT_EQ(e.code(), exit_code::validation);
    }
    auto c = parse_config_text(R"({"material": {"tau_rel": 0.5, "tau_ret": 1.5, "density": 2}})");
    ASSERT_TRUE(c.zener.has_value());
    EXPECT_DOUBLE_EQ(c.coefficients.alpha, 2.0);
    EXPECT_DOUBLE_EQ(c.coefficients.gamma(0.0), 0.5);
    EXPECT_DOUBLE_EQ(c.coefficients.Gamma(0.0), 1.0);
}

TEST(ParseConfig, UnknownKeys) {
    EXPECT_THROW(parse_config_text(R"({"viscocity": 0.1})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"evolution": {"viscocity": 0.1}})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"coefficients": {"gamma": {"kind": "constant", "valu": 1}}})"), SchemaError);
    try {
        parse_config_text(R"({"evolution": {"viscocity": 0.1}})");
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("viscocity"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("$.evolution"), std::string::npos);
    }
}

TEST(ParseConfig, TypeAndEnumErrors) {
    EXPECT_THROW(parse_config_text(R"({"grid": {"n": "many"}})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"grid": {"n": 12.5}})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"evolution": {"scheme": "leapfrog"}})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"experiment": {"kind": "dance"}})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"monitors": {"diagnostics": ["energy", "vibes"]}})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"material": {}, "coefficients": {}})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"({"seed": -1})"), SchemaError);
    EXPECT_THROW(parse_config_text(R"([1, 2])"), SchemaError);
}

TEST(ParseConfig, ParseErrorReportsLine) {
    try {
        parse_config_text("{\n  \"grid\": {\"n\": 12},\n  \"domain\": {\"L\": }\n}", "bad.json");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("bad.json:3:", 0), 0u) << e.what();
    }
    EXPECT_THROW(parse_config_file("/nonexistent/config.json"), ParseError);
}

TEST(ParseConfig, PhysicsBounds) {
    EXPECT_THROW(parse_config_text(R"({"domain": {"L": 0}})"), ValidationError);
    EXPECT_THROW(parse_config_text(R"({"grid": {"n": 2}})"), ValidationError);
    EXPECT_THROW(parse_config_text(R"({"evolution": {"dt": 0}})"), ValidationError);
    EXPECT_THROW(parse_config_text(R"({"evolution": {"eps": -1}})"), ValidationError);
    EXPECT_THROW(parse_config_text(R"({"coefficients": {"D": 0}})"), ValidationError);
    EXPECT_THROW(parse_config_text(R"({"evolution": {"safety": 1.5}})"), ValidationError);
}

TEST(Csv, FormattingAndQuoting) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_field("plain"), "plain");
    CsvTable t({"x", "y"});
    t.add_row(std::vector<double>{1.0, 2.5});
    EXPECT_EQ(t.text(), "x,y\r\n1,2.5\r\n");
    EXPECT_THROW(t.add_row(std::vector<double>{1.0}), ValidationError);
}

TEST(Io, AtomicWriteReplaces) {
    auto dir = scratch("atomic");
    write_file_atomic(dir / "a.txt", "first");
    write_file_atomic(dir / "a.txt", "second");
    EXPECT_EQ(slurp(dir / "a.txt"), "second");
    EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
}

TEST(App, ZeroDataRunWritesZeroRows) {
    auto cfg = parse_config_text(minimal);
    cfg.n = 17;
    cfg.evolution.dt = 1e-2;
    cfg.evolution.t_end = 0.1;
    cfg.monitor.cadence = 2;
    auto dir = scratch("zero");
    AppOptions opt;
    opt.out_dir = dir.string();
    opt.quiet = true;
    EXPECT_EQ(run_app(cfg, opt), 0);
    const std::string csv = slurp(dir / "diagnostics.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,mean_u,mean_v,mean_w,min_theta,y,y_terms[0],y_terms[1],y_terms[2],y_terms[3],y_terms[4],"
                    "identity_residual,k13_fitted,blowup_monitor\r");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');  // t
        while (std::getline(cells, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            EXPECT_TRUE(cell == "0" || cell == "nan" || cell == "-0") << line;
        }
    }
    EXPECT_EQ(rows, 6);
    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(summary["outcome"], "completed");
    EXPECT_EQ(summary["exit_code"], 0);
    EXPECT_EQ(summary["config"]["grid"]["n"], 17);
    EXPECT_EQ(summary["config_hash"], config_hash(cfg));
    EXPECT_TRUE(summary.contains("wall_time_s"));
    EXPECT_TRUE(std::filesystem::exists(dir / "snapshot_00000.csv"));
    EXPECT_EQ(slurp(dir / "snapshot_00000.csv").substr(0, 15), "x,u,v,w,theta\r\n");
}

TEST(App, RerunIsDeterministic) {
    auto cfg = parse_config_file(MGT_CONFIG_DIR "/reference_run.json");
    cfg.n = 17;
    cfg.evolution.t_end = 0.05;
    AppOptions opt;
    opt.quiet = true;
    auto dir = scratch("rerun");
    opt.out_dir = dir.string();
    ASSERT_EQ(run_app(cfg, opt), 0);
    const auto first = slurp(dir / "diagnostics.csv");
    ASSERT_EQ(run_app(cfg, opt), 0);
    EXPECT_EQ(slurp(dir / "diagnostics.csv"), first);
}

TEST(App, ErrorsLandInSummary) {
    auto cfg = parse_config_text(R"({"grid": {"n": 17}, "experiment": {"kind": "materials"}})");
    AppOptions opt;
    opt.quiet = true;
    auto dir = scratch("error");
    opt.out_dir = dir.string();
    EXPECT_EQ(run_app(cfg, opt), exit_code::validation);
    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(summary["error"]["kind"], "ValidationError");
    EXPECT_EQ(summary["exit_code"], exit_code::validation);
}

TEST(App, OutputDirectoryPrecedence) {
    auto cfg = parse_config_text(R"({"output": {"directory": "from_config"}})");
    AppOptions opt;
    ::unsetenv(output_dir_env);
    EXPECT_EQ(resolve_output_dir(cfg, opt), "from_config");
    ::setenv(output_dir_env, "from_env", 1);
    EXPECT_EQ(resolve_output_dir(cfg, opt), "from_env");
    opt.out_dir = "from_flag";
    EXPECT_EQ(resolve_output_dir(cfg, opt), "from_flag");
    ::unsetenv(output_dir_env);
}
