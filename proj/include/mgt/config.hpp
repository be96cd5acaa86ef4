#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mgt/dynamics.hpp"
#include "mgt/errors.hpp"
#include "mgt/experiments.hpp"
#include "mgt/model.hpp"

namespace mgt {

enum class ExperimentKind { run, eps_sweep, refine, twins, picard, blowup, materials };

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::run: return "run";
        case ExperimentKind::eps_sweep: return "sweep-eps";
        case ExperimentKind::refine: return "refine";
        case ExperimentKind::twins: return "twins";
        case ExperimentKind::picard: return "picard";
        case ExperimentKind::blowup: return "blowup";
        case ExperimentKind::materials: return "materials";
    }
    return "?";
}

inline std::optional<ExperimentKind> experiment_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::run, ExperimentKind::eps_sweep, ExperimentKind::refine, ExperimentKind::twins,
                   ExperimentKind::picard, ExperimentKind::blowup, ExperimentKind::materials})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

struct Diagnostics {
    bool energy = true;
    bool identity = true;
    bool riccati = true;
};

struct ExperimentParams {
    std::vector<double> eps_list{1e-1, 1e-2, 1e-3, 1e-4};
    std::vector<std::size_t> n_list{33, 65, 129};
    RefinementReference reference = RefinementReference::finest;
    TwinPairing pairing = TwinPairing::grids;
    double perturbation = 0.0;  ///< added to u0 as a cos(pi x/L) in the second twin
    // picard
    std::size_t n_time = 64;
    std::size_t max_iter = 200;
    double tol = 1e-12;
    double R = 0.0, T0 = 0.0, T = 0.0, horizon_fraction = 0.5;
    // blowup: the growth law is the coefficients block
    std::vector<double> amplitudes{10.0, 5.0, 2.5};
    double control_amplitude = 0.1;
    double blowup_dt = 1e-5;
    double blowup_growth = 1e2;
    // materials
    double omega = 1.0;
    double strain_amplitude = 1.0;
};

struct OutputConfig {
    std::string directory = "mgt_out";
    bool snapshots = true;
    std::size_t snapshot_cadence = 0;  ///< 0 follows the monitor cadence
};

struct RunConfig {
    double L = 1.0;
    std::size_t n = 129;
    std::optional<ZenerMaterial> zener;  ///< set when the material block was given
    CoefficientSet coefficients = CoefficientSet::constant(1.0, 1.0, 1.0, 1.0, 0.0);
    FieldSpec u0, u0t, u0tt, theta0;
    bool remove_means = true;
    EvolutionParams evolution;
    MonitorConfig monitor;
    Diagnostics diagnostics;
    ExperimentKind experiment = ExperimentKind::run;
    ExperimentParams params;
    OutputConfig output;
    std::uint64_t seed = 0x5eed;
    nlohmann::json echo;  ///< the configuration with defaults filled

    [[nodiscard]] Grid grid() const { return Grid(L, n); }
    [[nodiscard]] InitialData initial(const Grid& g) const {
        return make_initial_data(u0, u0t, u0tt, theta0, g, remove_means);
    }
};

// ---------------------------------------------------------------------------
// JSON <-> specs

inline nlohmann::json to_json(const CoefficientSpec& s) {
    switch (s.kind) {
        case CoefficientKind::constant: return {{"kind", "constant"}, {"value", s.params.at(0)}};
        case CoefficientKind::polynomial: return {{"kind", "polynomial"}, {"coeffs", s.params}};
        case CoefficientKind::exponential:
            return {{"kind", "exponential"}, {"a", s.params.at(0)}, {"b", s.params.at(1)}, {"c", s.params.at(2)}};
        case CoefficientKind::tabulated: return {{"kind", "tabulated"}, {"theta", s.abscissae}, {"values", s.params}};
    }
    return {};
}

inline nlohmann::json to_json(const FieldSpec& f) {
    switch (f.kind) {
        case FieldSpec::Kind::constant: return {{"kind", "constant"}, {"value", f.offset}};
        case FieldSpec::Kind::cosine_series: {
            nlohmann::json modes = nlohmann::json::array();
            for (const auto& [k, a] : f.modes) modes.push_back({k, a});
            return {{"kind", "cosine"}, {"offset", f.offset}, {"modes", modes}};
        }
        case FieldSpec::Kind::polynomial: return {{"kind", "polynomial"}, {"coeffs", f.coeffs}};
        case FieldSpec::Kind::tabulated: return {{"kind", "tabulated"}, {"values", f.values}};
    }
    return {};
}

namespace detail {

/// Read access to one JSON object that remembers the keys it has handed out,
/// so that leftovers can be reported as unknown.
class Section {
public:
    Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_ + ": expected an object");
    }
    ~Section() = default;
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }
    [[nodiscard]] std::string at(const std::string& key) const { return path_ + "." + key; }

    const nlohmann::json* get(const std::string& key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    const nlohmann::json& require(const std::string& key) {
        const auto* v = get(key);
        if (v == nullptr) throw SchemaError(at(key) + ": required key missing");
        return *v;
    }
    double number(const std::string& key, double fallback) {
        const auto* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_number()) throw SchemaError(at(key) + ": expected a number");
        return v->get<double>();
    }
    std::size_t count(const std::string& key, std::size_t fallback) {
        const auto* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_number_integer() || v->get<long long>() < 0)
            throw SchemaError(at(key) + ": expected a non-negative integer");
        return v->get<std::size_t>();
    }
    bool flag(const std::string& key, bool fallback) {
        const auto* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_boolean()) throw SchemaError(at(key) + ": expected true or false");
        return v->get<bool>();
    }
    std::string text(const std::string& key, const std::string& fallback) {
        const auto* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_string()) throw SchemaError(at(key) + ": expected a string");
        return v->get<std::string>();
    }
    template <class T>
    std::vector<T> list(const std::string& key, std::vector<T> fallback) {
        const auto* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_array()) throw SchemaError(at(key) + ": expected an array");
        std::vector<T> out;
        for (const auto& e : *v) {
            if (!e.is_number() || (std::is_integral_v<T> && !e.is_number_integer()))
                throw SchemaError(at(key) + ": expected an array of numbers");
            out.push_back(e.get<T>());
        }
        return out;
    }
    /// Throws SchemaError naming the first key that was never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw SchemaError(at(it.key()) + ": unknown key \"" + it.key() + "\"");
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline CoefficientSpec read_coefficient(const nlohmann::json& j, const std::string& path) {
    if (j.is_number()) return CoefficientSpec::constant(j.get<double>());
    Section s(j, path);
    const std::string kind = s.text("kind", "");
    CoefficientSpec out;
    if (kind == "constant") {
        out = CoefficientSpec::constant(s.number("value", 1.0));
    } else if (kind == "polynomial") {
        out = CoefficientSpec::polynomial(s.list<double>("coeffs", {}));
        if (out.params.empty()) throw SchemaError(s.at("coeffs") + ": at least one coefficient required");
    } else if (kind == "exponential") {
        out = CoefficientSpec::exponential(s.number("a", 1.0), s.number("b", 1.0), s.number("c", 0.0));
    } else if (kind == "tabulated") {
        out = CoefficientSpec::tabulated(s.list<double>("theta", {}), s.list<double>("values", {}));
    } else {
        throw SchemaError(s.at("kind") + ": expected constant, polynomial, exponential or tabulated");
    }
    s.finish();
    return out;
}

inline FieldSpec read_field(const nlohmann::json* j, const std::string& path) {
    if (j == nullptr) return FieldSpec::zero();
    if (j->is_number()) return FieldSpec::constant(j->get<double>());
    Section s(*j, path);
    const std::string kind = s.text("kind", "");
    FieldSpec out;
    if (kind == "constant") {
        out = FieldSpec::constant(s.number("value", 0.0));
    } else if (kind == "cosine") {
        std::vector<std::pair<double, double>> modes;
        if (const auto* m = s.get("modes")) {
            if (!m->is_array()) throw SchemaError(s.at("modes") + ": expected [[k, amplitude], ...]");
            for (const auto& e : *m) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                    throw SchemaError(s.at("modes") + ": expected [[k, amplitude], ...]");
                modes.emplace_back(e[0].get<double>(), e[1].get<double>());
            }
        }
        out = FieldSpec::cosine(std::move(modes), s.number("offset", 0.0));
    } else if (kind == "polynomial") {
        out = FieldSpec::polynomial(s.list<double>("coeffs", {}));
    } else if (kind == "tabulated") {
        out = FieldSpec::tabulated(s.list<double>("values", {}));
    } else {
        throw SchemaError(s.at("kind") + ": expected constant, cosine, polynomial or tabulated");
    }
    s.finish();
    return out;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

template <class E>
E pick(Section& s, const std::string& key, const std::vector<std::pair<std::string, E>>& options, E fallback) {
    const auto* v = s.get(key);
    if (v == nullptr) return fallback;
    if (v->is_string())
        for (const auto& [name, value] : options)
            if (v->get<std::string>() == name) return value;
    std::string names;
    for (const auto& o : options) names += (names.empty() ? "" : ", ") + o.first;
    throw SchemaError(s.at(key) + ": expected one of " + names);
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c);

/// Parses and validates a configuration document.
inline RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source + ":" + std::to_string(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1)) + ": " +
                         e.what());
    }
    RunConfig c;
    detail::Section top(root, "$");
    if (const auto* d = top.get("domain")) {
        detail::Section s(*d, "$.domain");
        c.L = s.number("L", c.L);
        s.finish();
    }
    if (const auto* g = top.get("grid")) {
        detail::Section s(*g, "$.grid");
        c.n = s.count("n", c.n);
        s.finish();
    }
    const auto* mat = top.get("material");
    const auto* coef = top.get("coefficients");
    if (mat != nullptr && coef != nullptr) throw SchemaError("$: give either material or coefficients, not both");
    if (mat != nullptr) {
        detail::Section s(*mat, "$.material");
        ZenerMaterial m;
        m.tau_rel = s.number("tau_rel", m.tau_rel);
        m.tau_ret = s.number("tau_ret", m.tau_ret);
        if (const auto* st = s.get("stiffness")) m.stiffness = Coefficient(detail::read_coefficient(*st, s.at("stiffness")));
        m.density = s.number("density", m.density);
        m.diffusivity = s.number("diffusivity", m.diffusivity);
        m.theta_max = s.number("theta_max", m.theta_max);
        s.finish();
        try {
            c.coefficients = zener_to_coefficients(m);
        } catch (const InvalidMaterial& e) {
            throw ValidationError(e.what());
        }
        c.zener = m;
    }
    if (coef != nullptr) {
        detail::Section s(*coef, "$.coefficients");
        CoefficientSet cs = c.coefficients;
        cs.alpha = s.number("alpha", cs.alpha);
        cs.D = s.number("D", cs.D);
        if (const auto* v = s.get("gamma")) cs.gamma = Coefficient(detail::read_coefficient(*v, s.at("gamma")));
        if (const auto* v = s.get("ghat")) cs.ghat = Coefficient(detail::read_coefficient(*v, s.at("ghat")));
        if (const auto* v = s.get("Gamma")) cs.Gamma = Coefficient(detail::read_coefficient(*v, s.at("Gamma")));
        s.finish();
        c.coefficients = cs;
    }
    if (const auto* init = top.get("initial")) {
        detail::Section s(*init, "$.initial");
        c.u0 = detail::read_field(s.get("u0"), s.at("u0"));
        c.u0t = detail::read_field(s.get("u0t"), s.at("u0t"));
        c.u0tt = detail::read_field(s.get("u0tt"), s.at("u0tt"));
        c.theta0 = detail::read_field(s.get("theta0"), s.at("theta0"));
        c.remove_means = s.flag("remove_means", c.remove_means);
        s.finish();
    }
    if (const auto* ev = top.get("evolution")) {
        detail::Section s(*ev, "$.evolution");
        EvolutionParams& p = c.evolution;
        p.eps = s.number("eps", p.eps);
        p.dt = s.number("dt", p.dt);
        p.t_end = s.number("t_end", p.t_end);
        p.scheme = detail::pick<Scheme>(s, "scheme", {{"semi_implicit", Scheme::semi_implicit}, {"explicit_rk4", Scheme::explicit_rk4}},
                                        p.scheme);
        p.variant = detail::pick<ImplicitVariant>(
            s, "variant", {{"crank_nicolson", ImplicitVariant::crank_nicolson}, {"backward_euler", ImplicitVariant::backward_euler}},
            p.variant);
        p.midpoint_coefficients = s.flag("midpoint_coefficients", p.midpoint_coefficients);
        p.safety = s.number("safety", p.safety);
        p.undershoot_limit = s.number("undershoot_limit", p.undershoot_limit);
        s.finish();
    }
    c.monitor.cadence = 10;
    if (const auto* mo = top.get("monitors")) {
        detail::Section s(*mo, "$.monitors");
        c.monitor.cadence = s.count("cadence", c.monitor.cadence);
        c.monitor.blowup_armed = s.flag("blowup_armed", c.monitor.blowup_armed);
        c.monitor.blowup_threshold = s.number("blowup_threshold", c.monitor.blowup_threshold);
        c.monitor.blowup_growth = s.number("blowup_growth", c.monitor.blowup_growth);
        if (const auto* d = s.get("diagnostics")) {
            if (!d->is_array()) throw SchemaError(s.at("diagnostics") + ": expected an array of names");
            c.diagnostics = {false, false, false};
            for (const auto& e : *d) {
                const std::string name = e.is_string() ? e.get<std::string>() : "";
                if (name == "energy") c.diagnostics.energy = true;
                else if (name == "identity") c.diagnostics.identity = true;
                else if (name == "riccati") c.diagnostics.riccati = true;
                else throw SchemaError(s.at("diagnostics") + ": unknown diagnostic \"" + name + "\"");
            }
        }
        s.finish();
    }
    if (const auto* ex = top.get("experiment")) {
        detail::Section s(*ex, "$.experiment");
        const std::string kind = s.text("kind", to_string(c.experiment));
        const auto k = experiment_from_string(kind);
        if (!k) throw SchemaError(s.at("kind") + ": unknown experiment \"" + kind + "\"");
        c.experiment = *k;
        ExperimentParams& p = c.params;
        p.eps_list = s.list<double>("eps_list", p.eps_list);
        p.n_list = s.list<std::size_t>("n_list", p.n_list);
        p.reference = detail::pick<RefinementReference>(
            s, "reference", {{"finest", RefinementReference::finest}, {"manufactured", RefinementReference::manufactured}},
            p.reference);
        p.pairing = detail::pick<TwinPairing>(
            s, "pairing", {{"grids", TwinPairing::grids}, {"schemes", TwinPairing::schemes}, {"time_steps", TwinPairing::time_steps}},
            p.pairing);
        p.perturbation = s.number("perturbation", p.perturbation);
        p.n_time = s.count("n_time", p.n_time);
        p.max_iter = s.count("max_iter", p.max_iter);
        p.tol = s.number("tol", p.tol);
        p.R = s.number("R", p.R);
        p.T0 = s.number("T0", p.T0);
        p.T = s.number("T", p.T);
        p.horizon_fraction = s.number("horizon_fraction", p.horizon_fraction);
        p.amplitudes = s.list<double>("amplitudes", p.amplitudes);
        p.control_amplitude = s.number("control_amplitude", p.control_amplitude);
        p.blowup_dt = s.number("blowup_dt", p.blowup_dt);
        p.blowup_growth = s.number("blowup_growth", p.blowup_growth);
        p.omega = s.number("omega", p.omega);
        p.strain_amplitude = s.number("strain_amplitude", p.strain_amplitude);
        s.finish();
    }
    if (const auto* out = top.get("output")) {
        detail::Section s(*out, "$.output");
        c.output.directory = s.text("directory", c.output.directory);
        c.output.snapshots = s.flag("snapshots", c.output.snapshots);
        c.output.snapshot_cadence = s.count("snapshot_cadence", c.output.snapshot_cadence);
        s.finish();
    }
    if (const auto* sd = top.get("seed")) {
        if (!sd->is_number_unsigned() && !(sd->is_number_integer() && sd->get<long long>() >= 0))
            throw SchemaError("$.seed: expected a non-negative integer");
        c.seed = sd->get<std::uint64_t>();
    }
    top.finish();

    // physics and numerics bounds
    if (!(c.L > 0.0)) throw ValidationError("domain.L > 0 required");
    if (c.n < 3) throw ValidationError("grid.n >= 3 required");
    if (!(c.coefficients.D > 0.0)) throw ValidationError("coefficients.D > 0 required");
    if (!(c.coefficients.alpha >= 0.0)) throw ValidationError("coefficients.alpha >= 0 required");
    c.evolution.validate(0.0);
    if (!(c.evolution.undershoot_limit > 0.0)) throw ValidationError("evolution.undershoot_limit > 0 required");
    if (!(c.monitor.blowup_threshold > 0.0) || !(c.monitor.blowup_growth > 1.0))
        throw ValidationError("monitors: blowup_threshold > 0 and blowup_growth > 1 required");
    if (c.monitor.cadence == 0) throw ValidationError("monitors.cadence >= 1 required");
    if (c.params.n_time < 2 || !(c.params.tol > 0.0)) throw ValidationError("experiment: n_time >= 2 and tol > 0 required");
    if (!(c.params.omega > 0.0)) throw ValidationError("experiment.omega > 0 required");
    if (!(c.params.blowup_dt > 0.0)) throw ValidationError("experiment.blowup_dt > 0 required");

    c.echo = to_json(c);
    return c;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// Fully populated document; parse_config_text(to_json(c).dump()) reproduces c.
inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    json j;
    j["domain"] = {{"L", c.L}};
    j["grid"] = {{"n", c.n}};
    if (c.zener) {
        const ZenerMaterial& m = *c.zener;
        j["material"] = {{"tau_rel", m.tau_rel},   {"tau_ret", m.tau_ret},
                         {"stiffness", to_json(m.stiffness.spec())},
                         {"density", m.density},   {"diffusivity", m.diffusivity},
                         {"theta_max", m.theta_max}};
    } else {
        const CoefficientSet& k = c.coefficients;
        j["coefficients"] = {{"alpha", k.alpha},
                             {"D", k.D},
                             {"gamma", to_json(k.gamma.spec())},
                             {"ghat", to_json(k.ghat.spec())},
                             {"Gamma", to_json(k.Gamma.spec())}};
    }
    j["initial"] = {{"u0", to_json(c.u0)},
                    {"u0t", to_json(c.u0t)},
                    {"u0tt", to_json(c.u0tt)},
                    {"theta0", to_json(c.theta0)},
                    {"remove_means", c.remove_means}};
    const EvolutionParams& p = c.evolution;
    j["evolution"] = {{"eps", p.eps},
                      {"dt", p.dt},
                      {"t_end", p.t_end},
                      {"scheme", to_string(p.scheme)},
                      {"variant", to_string(p.variant)},
                      {"midpoint_coefficients", p.midpoint_coefficients},
                      {"safety", p.safety},
                      {"undershoot_limit", p.undershoot_limit}};
    json diag = json::array();
    if (c.diagnostics.energy) diag.push_back("energy");
    if (c.diagnostics.identity) diag.push_back("identity");
    if (c.diagnostics.riccati) diag.push_back("riccati");
    j["monitors"] = {{"cadence", c.monitor.cadence},
                     {"blowup_armed", c.monitor.blowup_armed},
                     {"blowup_threshold", c.monitor.blowup_threshold},
                     {"blowup_growth", c.monitor.blowup_growth},
                     {"diagnostics", diag}};
    const ExperimentParams& e = c.params;
    j["experiment"] = {{"kind", to_string(c.experiment)},
                       {"eps_list", e.eps_list},
                       {"n_list", e.n_list},
                       {"reference", e.reference == RefinementReference::finest ? "finest" : "manufactured"},
                       {"pairing", e.pairing == TwinPairing::grids     ? "grids"
                                   : e.pairing == TwinPairing::schemes ? "schemes"
                                                                       : "time_steps"},
                       {"perturbation", e.perturbation},
                       {"n_time", e.n_time},
                       {"max_iter", e.max_iter},
                       {"tol", e.tol},
                       {"R", e.R},
                       {"T0", e.T0},
                       {"T", e.T},
                       {"horizon_fraction", e.horizon_fraction},
                       {"amplitudes", e.amplitudes},
                       {"control_amplitude", e.control_amplitude},
                       {"blowup_dt", e.blowup_dt},
                       {"blowup_growth", e.blowup_growth},
                       {"omega", e.omega},
                       {"strain_amplitude", e.strain_amplitude}};
    j["output"] = {{"directory", c.output.directory},
                   {"snapshots", c.output.snapshots},
                   {"snapshot_cadence", c.output.snapshot_cadence}};
    j["seed"] = c.seed;
    return j;
}

/// 64-bit FNV-1a of the canonical (sorted-key, compact) dump.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const RunConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
    return buf;
}

}  // namespace mgt
