#include "sppa/error.hpp"
#include "sppa/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sppa {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class F>
auto as_config(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

IntegrandFamily parse_family(const std::string& s) {
    if (s == "squared-distance") return IntegrandFamily::SquaredDistance;
    if (s == "distance") return IntegrandFamily::Distance;
    throw ConfigError("integrand.family must be squared-distance or distance, got '" + s + "'");
}

std::string family_key(IntegrandFamily f) {
    switch (f) {
    case IntegrandFamily::SquaredDistance: return "squared-distance";
    case IntegrandFamily::Distance: return "distance";
    default: throw ConfigError("only squared-distance and distance integrands are configurable");
    }
}

ExpectationMode parse_mode(const std::string& s) {
    if (s == "auto") return ExpectationMode::Auto;
    if (s == "exact") return ExpectationMode::Exact;
    if (s == "monte-carlo") return ExpectationMode::MonteCarlo;
    throw ConfigError("diagnostics.mode must be auto, exact or monte-carlo");
}

const std::set<std::string> kKnownChecks{"step-bound", "quasi-fejer", "summability", "tail-oscillation",
                                         "modulus", "convergence", "lipschitz-sum"};

std::size_t to_size(std::uint64_t v) { return static_cast<std::size_t>(v); }

} // namespace

// ---------------------------------------------------------------------------

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::set<std::string>& allowed) {
    KeyValueConfig kv;
    std::istringstream in(text);
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (!allowed.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!kv.values_.emplace(key, value).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return kv;
}

KeyValueConfig KeyValueConfig::load(const std::string& path, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    KeyValueConfig kv;
    try {
        kv = parse(buf.str(), allowed);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    const auto parent = std::filesystem::path(path).parent_path();
    kv.base_dir_ = parent.empty() ? "." : parent.string();
    return kv;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string KeyValueConfig::require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("key '" + key + "': expected a finite number, got '" + v + "'");
    return out;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("key '" + key + "': expected a nonnegative integer, got '" + v + "'");
    return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

// ---------------------------------------------------------------------------

std::shared_ptr<const Integrand> build_integrand(const ProblemSpec& spec, const Point& x0) {
    return as_config("integrand", [&] {
        const Point base = spec.base ? *spec.base : base_point(spec.space);
        validate(spec.space, base);
        if (!(spec.weight > 0.0)) throw ConfigError("integrand.weight must be positive");

        if (spec.events == "generator") {
            auto rule = spec.generator;
            rule.space = spec.space;
            const auto events = EventSpace::generated(rule);
            if (spec.family == IntegrandFamily::Distance)
                return std::make_shared<const Integrand>(Integrand::distance(spec.space, events, base));
            const double R = spec.operating_radius.value_or(std::max(rule.spread, distance(spec.space, x0, base)));
            return std::make_shared<const Integrand>(Integrand::squared_distance(spec.space, events, base, R));
        }

        if (spec.anchors.empty()) throw ConfigError("integrand needs at least one anchor");
        double anchor_radius = 0.0;
        std::vector<Point> pts;
        std::vector<double> weights;
        for (const auto& a : spec.anchors) {
            validate(spec.space, a.point);
            if (!(a.weight > 0.0)) throw ConfigError("anchor weights must be positive");
            anchor_radius = std::max(anchor_radius, distance(spec.space, a.point, base));
            pts.push_back(a.point);
            weights.push_back(spec.weight * a.weight);
        }
        const double R = spec.operating_radius.value_or(std::max(anchor_radius, distance(spec.space, x0, base)));
        auto make = [&](EventSpace ev) {
            return spec.family == IntegrandFamily::Distance ? Integrand::distance(spec.space, std::move(ev), base)
                                                            : Integrand::squared_distance(spec.space, std::move(ev), base, R);
        };
        if (spec.events == "anchors") {
            std::vector<double> probs(pts.size(), 1.0);
            return std::make_shared<const Integrand>(make(EventSpace::anchors(pts, probs, weights)));
        }
        if (spec.events == "finite-sum") {
            std::vector<Integrand> parts;
            for (std::size_t i = 0; i < pts.size(); ++i)
                parts.push_back(make(EventSpace::anchors({pts[i]}, {1.0}, {weights[i]})));
            return std::make_shared<const Integrand>(Integrand::finite_sum(std::move(parts)));
        }
        throw ConfigError("integrand.events must be anchors, finite-sum or generator, got '" + spec.events + "'");
    });
}

double calibrated_radius(const StepSchedule& schedule, std::size_t N, double min_F) {
    return 3.0 * std::sqrt(schedule.at(N) * std::max(min_F, 0.0));
}

// ---------------------------------------------------------------------------

const std::set<std::string>& experiment_keys() {
    static const std::set<std::string> keys{
        "space",
        "integrand.family",
        "integrand.events",
        "integrand.anchors",
        "integrand.anchors_file",
        "integrand.weight",
        "integrand.base",
        "integrand.operating_radius",
        "integrand.generator.spread",
        "integrand.generator.weight_lo",
        "integrand.generator.weight_hi",
        "run.x0",
        "run.mode",
        "run.iterations",
        "run.seed",
        "run.trace_stride",
        "run.replicas",
        "run.big_F_samples",
        "run.reference",
        "schedule.c",
        "schedule.p",
        "schedule.n0",
        "diagnostics.checks",
        "diagnostics.mc_samples",
        "diagnostics.states",
        "diagnostics.levels",
        "diagnostics.eps",
        "diagnostics.min_fraction",
        "diagnostics.mode",
        "baseline.kind",
        "output.dir",
    };
    return keys;
}

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv) {
    ExperimentConfig cfg;
    auto& pb = cfg.problem;
    pb.space = SpaceDescriptor::parse(kv.require("space"));
    const auto& space = pb.space;
    pb.family = parse_family(kv.get("integrand.family", "squared-distance"));
    pb.events = kv.get("integrand.events", "anchors");
    pb.weight = kv.get_double("integrand.weight", 1.0);
    if (kv.has("integrand.base"))
        pb.base = as_config("integrand.base", [&] { return parse_point(space, kv.get("integrand.base", "")); });
    if (kv.has("integrand.operating_radius")) {
        pb.operating_radius = kv.get_double("integrand.operating_radius", 0.0);
        if (!(*pb.operating_radius > 0.0)) throw ConfigError("integrand.operating_radius must be positive");
    }

    if (pb.events == "generator") {
        if (kv.has("integrand.anchors") || kv.has("integrand.anchors_file"))
            throw ConfigError("generator events take no anchors");
        pb.generator = GeneratedEvents{space, kv.get_double("integrand.generator.spread", 1.0),
                                       kv.get_double("integrand.generator.weight_lo", 1.0),
                                       kv.get_double("integrand.generator.weight_hi", 1.0)};
    } else {
        for (const char* k : {"integrand.generator.spread", "integrand.generator.weight_lo", "integrand.generator.weight_hi"})
            if (kv.has(k)) throw ConfigError(std::string("key '") + k + "' needs integrand.events = generator");
        if (kv.has("integrand.anchors_file")) {
            auto path = std::filesystem::path(kv.get("integrand.anchors_file", ""));
            if (path.is_relative()) path = std::filesystem::path(kv.base_dir()) / path;
            if (!std::filesystem::exists(path)) throw ConfigError("anchor file '" + path.string() + "' does not exist");
            pb.anchors = as_config("integrand.anchors_file", [&] { return read_point_file(space, path.string()); });
        }
        if (kv.has("integrand.anchors"))
            for (const auto& item : split(kv.get("integrand.anchors", ""), '|'))
                pb.anchors.push_back(as_config("integrand.anchors", [&] { return parse_weighted_point(space, item); }));
        if (pb.anchors.empty()) throw ConfigError("integrand needs anchors (integrand.anchors or integrand.anchors_file)");
    }

    auto& run = cfg.run;
    run.space = space;
    run.x0 = kv.has("run.x0") ? as_config("run.x0", [&] { return parse_point(space, kv.get("run.x0", "")); })
                              : base_point(space);
    run.schedule = as_config("schedule", [&] {
        return StepSchedule::power(kv.get_double("schedule.c", 1.0), kv.get_double("schedule.p", 0.75),
                                   kv.get_double("schedule.n0", 1.0));
    });
    const auto verdict = as_config("schedule", [&] { return validate_schedule(run.schedule); });
    if (!verdict.accepted) throw ConfigError(verdict.reason);
    run.iterations = to_size(kv.get_uint("run.iterations", 1000));
    run.seed = kv.get_uint("run.seed", 1);
    run.trace_stride = to_size(kv.get_uint("run.trace_stride", 100));
    run.big_F_samples = to_size(kv.get_uint("run.big_F_samples", 1000));
    if (run.trace_stride == 0) throw ConfigError("run.trace_stride must be positive");
    if (run.big_F_samples == 0) throw ConfigError("run.big_F_samples must be positive");
    cfg.replicas = to_size(kv.get_uint("run.replicas", 1));
    if (cfg.replicas == 0) throw ConfigError("run.replicas must be positive");
    const std::string mode = kv.get("run.mode", "sppa");
    if (mode != "sppa" && mode != "splitting") throw ConfigError("run.mode must be sppa or splitting");
    cfg.splitting = mode == "splitting";
    if (cfg.splitting && pb.events != "finite-sum")
        throw ConfigError("run.mode = splitting requires integrand.events = finite-sum");

    const std::string ref = kv.get("run.reference", "");
    if (ref == "baseline") {
        cfg.reference_from_baseline = true;
    } else if (!ref.empty()) {
        run.reference = as_config("run.reference", [&] { return parse_point(space, ref); });
    }

    run.integrand = build_integrand(pb, run.x0);

    auto& dg = cfg.diagnostics;
    dg.checks = split(kv.get("diagnostics.checks", ""), ',');
    for (const auto& c : dg.checks)
        if (!kKnownChecks.count(c)) throw ConfigError("unknown diagnostic check '" + c + "'");
    dg.mc_samples = to_size(kv.get_uint("diagnostics.mc_samples", dg.mc_samples));
    dg.states = to_size(kv.get_uint("diagnostics.states", dg.states));
    if (kv.has("diagnostics.levels")) {
        dg.levels.clear();
        for (const auto& item : split(kv.get("diagnostics.levels", ""), ',')) {
            const auto one = KeyValueConfig::parse("l = " + item, {"l"});
            const double l = one.get_double("l", 0.0);
            if (!(l > 0.0 && l < 1.0)) throw ConfigError("diagnostics.levels must lie in (0,1)");
            dg.levels.push_back(l);
        }
    }
    if (kv.has("diagnostics.eps")) {
        dg.eps = kv.get_double("diagnostics.eps", 0.0);
        if (!(*dg.eps > 0.0)) throw ConfigError("diagnostics.eps must be positive");
    }
    dg.min_fraction = kv.get_double("diagnostics.min_fraction", dg.min_fraction);
    dg.mode = parse_mode(kv.get("diagnostics.mode", "auto"));

    cfg.baseline = kv.get("baseline.kind", "auto");
    if (cfg.baseline != "auto" && cfg.baseline != "none")
        (void)as_config("baseline.kind", [&] { return parse_baseline_method(cfg.baseline); });
    cfg.output_dir = kv.get("output.dir", "");
    if (!cfg.output_dir.empty() && std::filesystem::path(cfg.output_dir).is_relative())
        cfg.output_dir = (std::filesystem::path(kv.base_dir()) / cfg.output_dir).string();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(KeyValueConfig::load(path, experiment_keys()));
}

// ---------------------------------------------------------------------------
// Manifest

nlohmann::json manifest_json(const ExperimentConfig& cfg) {
    const auto& pb = cfg.problem;
    const auto& run = cfg.run;
    const auto& space = pb.space;
    nlohmann::json j;
    j["artifact_version"] = kArtifactVersion;
    j["seed"] = run.seed;
    j["space"] = space.to_string();
    j["mode"] = cfg.splitting ? "splitting" : "sppa";
    j["iterations"] = run.iterations;
    j["trace_stride"] = run.trace_stride;
    j["replicas"] = cfg.replicas;
    j["big_F_samples"] = run.big_F_samples;
    j["threads_env"] = "SPPA_THREADS";
    j["x0"] = format_point(space, run.x0);
    j["reference"] = run.reference ? nlohmann::json(format_point(space, *run.reference)) : nlohmann::json(nullptr);
    const auto& kind = run.schedule.kind();
    if (const auto* p = std::get_if<PowerSchedule>(&kind))
        j["schedule"] = {{"kind", "power"}, {"c", p->c}, {"p", p->p}, {"n0", p->n0}};
    nlohmann::json in;
    in["family"] = family_key(pb.family);
    in["events"] = pb.events;
    in["weight"] = pb.weight;
    in["base"] = format_point(space, pb.base ? *pb.base : base_point(space));
    in["operating_radius"] = run.integrand ? nlohmann::json(run.integrand->operating_radius()) : nlohmann::json(nullptr);
    if (pb.family == IntegrandFamily::Distance) in["operating_radius"] = nullptr;
    if (pb.events == "generator") {
        in["generator"] = {{"spread", pb.generator.spread},
                           {"weight_lo", pb.generator.weight_lo},
                           {"weight_hi", pb.generator.weight_hi}};
    } else {
        in["anchors"] = nlohmann::json::array();
        for (const auto& a : pb.anchors) in["anchors"].push_back({format_point(space, a.point), a.weight});
    }
    j["integrand"] = in;
    return j;
}

ExperimentConfig config_from_manifest(const nlohmann::json& m) {
    try {
        ExperimentConfig cfg;
        auto& pb = cfg.problem;
        pb.space = SpaceDescriptor::parse(m.at("space").get<std::string>());
        const auto& space = pb.space;
        const auto& in = m.at("integrand");
        pb.family = parse_family(in.at("family").get<std::string>());
        pb.events = in.at("events").get<std::string>();
        pb.weight = in.at("weight").get<double>();
        pb.base = parse_point(space, in.at("base").get<std::string>());
        if (!in.at("operating_radius").is_null()) pb.operating_radius = in.at("operating_radius").get<double>();
        if (pb.events == "generator") {
            const auto& gj = in.at("generator");
            pb.generator = GeneratedEvents{space, gj.at("spread").get<double>(), gj.at("weight_lo").get<double>(),
                                           gj.at("weight_hi").get<double>()};
        } else {
            for (const auto& a : in.at("anchors"))
                pb.anchors.push_back({parse_point(space, a.at(0).get<std::string>()), a.at(1).get<double>()});
        }
        auto& run = cfg.run;
        run.space = space;
        run.x0 = parse_point(space, m.at("x0").get<std::string>());
        if (!m.at("reference").is_null()) run.reference = parse_point(space, m.at("reference").get<std::string>());
        const auto& s = m.at("schedule");
        run.schedule = StepSchedule::power(s.at("c").get<double>(), s.at("p").get<double>(), s.at("n0").get<double>());
        run.iterations = m.at("iterations").get<std::size_t>();
        run.seed = m.at("seed").get<std::uint64_t>();
        run.trace_stride = m.at("trace_stride").get<std::size_t>();
        run.big_F_samples = m.at("big_F_samples").get<std::size_t>();
        cfg.replicas = m.at("replicas").get<std::size_t>();
        cfg.splitting = m.at("mode").get<std::string>() == "splitting";
        cfg.baseline = "none";
        run.integrand = build_integrand(pb, run.x0);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
}

} // namespace sppa
