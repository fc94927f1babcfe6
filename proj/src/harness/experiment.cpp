#include "sppa/error.hpp"
#include "sppa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace sppa {

namespace {

bool wants(const std::vector<std::string>& checks, const std::string& name) {
    return std::find(checks.begin(), checks.end(), name) != checks.end();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

CheckResult step_bound_check(const ReplicaEnsemble& ens) {
    CheckResult c;
    c.name = "step-bound";
    c.tolerance = kGeometryTol;
    std::size_t violations = 0;
    std::size_t rows = 0;
    for (const auto& run : ens.runs) {
        violations += run.step_bound_violations();
        rows += run.iterations();
    }
    c.samples = rows;
    c.metrics["violations"] = static_cast<double>(violations);
    c.passed = violations == 0;
    return c;
}

// Mean partial sum at N against N/2, within kSigmaMargin standard errors
// (replica spread of S_N combined with the F-estimation error).
CheckResult summability_check(const ReplicaEnsemble& ens, double min_F) {
    CheckResult c;
    c.name = "summability";
    std::vector<double> full, half, sup;
    double fse = 0.0;
    std::size_t negative = 0;
    for (const auto& run : ens.runs) {
        const std::size_t N = run.iterations();
        const auto a = summability_report(run, min_F);
        const auto b = summability_report(run, min_F, N / 2);
        full.push_back(a.partial_sum);
        half.push_back(b.partial_sum);
        sup.push_back(a.sup_dist);
        fse += a.partial_sum_se * a.partial_sum_se;
        negative += a.negative_increments;
    }
    const double R = static_cast<double>(ens.runs.size());
    const double se = std::hypot(standard_error(full), std::sqrt(fse) / R);
    const double diff = std::abs(mean_of(full) - mean_of(half));
    c.samples = ens.runs.size();
    c.tolerance = kSigmaMargin * se;
    c.metrics["mean_S_N"] = mean_of(full);
    c.metrics["mean_S_half"] = mean_of(half);
    c.metrics["difference"] = diff;
    c.metrics["standard_error"] = se;
    c.metrics["max_sup_dist"] = *std::max_element(sup.begin(), sup.end());
    c.metrics["negative_increments"] = static_cast<double>(negative);
    c.passed = diff <= c.tolerance + kGeometryTol && negative == 0 && std::isfinite(c.metrics["max_sup_dist"]);
    c.note = "S_N = sum lambda_n (F(x_n) - min F); compared at N and N/2";
    return c;
}

CheckResult tail_oscillation_check(const ReplicaEnsemble& ens, double fraction) {
    CheckResult c;
    c.name = "tail-oscillation";
    std::size_t decreasing = 0;
    std::vector<double> full, half;
    for (const auto& run : ens.runs) {
        const std::size_t N = run.iterations();
        const auto a = summability_report(run, 0.0);
        const auto b = summability_report(run, 0.0, N / 2);
        full.push_back(a.tail_oscillation);
        half.push_back(b.tail_oscillation);
        if (a.tail_oscillation < b.tail_oscillation) ++decreasing;
    }
    c.samples = ens.runs.size();
    c.tolerance = fraction;
    c.metrics["fraction_decreasing"] = static_cast<double>(decreasing) / static_cast<double>(c.samples);
    c.metrics["median_oscillation_N"] = median(full);
    c.metrics["median_oscillation_half"] = median(half);
    c.passed = c.metrics["fraction_decreasing"] >= fraction;
    c.note = "oscillation of d(x_n, z) over [N/2, N] against [N/4, N/2]";
    return c;
}

CheckResult modulus_check(const ReplicaEnsemble& ens, const std::vector<double>& levels) {
    CheckResult c;
    c.name = "modulus";
    c.samples = ens.runs.size();
    c.passed = true;
    for (const auto& row : estimate_boundedness_modulus(ens, levels)) {
        std::ostringstream key;
        key << "level_" << row.level;
        if (!row.resolvable) {
            c.note += key.str() + " unresolvable with this replica count; ";
            continue;
        }
        c.metrics[key.str() + "_psi"] = row.psi;
        c.metrics[key.str() + "_exceedances"] = static_cast<double>(row.exceedances);
        c.metrics[key.str() + "_allowed"] = static_cast<double>(row.allowed);
        if (row.exceedances > row.allowed) c.passed = false;
    }
    return c;
}

CheckResult quasi_fejer_check(const ExperimentConfig& cfg, const ReplicaEnsemble& ens) {
    CheckResult c;
    c.name = "quasi-fejer";
    c.tolerance = cfg.diagnostics.quasi_fejer_pass_rate;
    const auto& run = cfg.run;
    if (!run.reference) throw ConfigError("quasi-fejer check needs a reference point (run.reference)");
    std::vector<std::pair<std::size_t, const Point*>> pool;
    for (const auto& t : ens.runs)
        for (const auto& [n, x] : t.iterates)
            if (n < t.iterations()) pool.emplace_back(n, &x);
    if (pool.empty()) throw ConfigError("quasi-fejer check has no stored iterates to sample");
    const std::size_t S = std::min(cfg.diagnostics.states, pool.size());
    std::size_t passed = 0;
    std::size_t exact = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < S; ++i) {
        const auto& [n, x] = pool[i * pool.size() / S];
        Stream stream(derive_seed(run.seed ^ 0x51F3A7C2D9E4B60FULL, i + 1));
        const auto row = check_quasi_fejer(run, *x, *run.reference, n, cfg.diagnostics.mc_samples, stream,
                                           cfg.diagnostics.mode);
        if (row.pass) ++passed;
        if (row.exact) ++exact;
        worst = std::max(worst, row.lhs - row.rhs);
    }
    c.samples = S;
    const double rate = static_cast<double>(passed) / static_cast<double>(S);
    c.metrics["pass_rate"] = rate;
    c.metrics["exact_states"] = static_cast<double>(exact);
    c.metrics["max_lhs_minus_rhs"] = worst;
    c.metrics["mc_samples"] = static_cast<double>(cfg.diagnostics.mc_samples);
    // Exact expectations leave no sampling slack.
    c.passed = exact == S ? passed == S : rate >= c.tolerance;
    return c;
}

CheckResult convergence_check(const ExperimentConfig& cfg, const ReplicaEnsemble& ens, const BaselineResult& b) {
    CheckResult c;
    c.name = "convergence";
    double eps = 0.0;
    if (cfg.diagnostics.eps) {
        eps = *cfg.diagnostics.eps;
    } else {
        if (cfg.problem.family != IntegrandFamily::SquaredDistance)
            throw ConfigError("convergence check on distance integrands needs diagnostics.eps");
        eps = calibrated_radius(cfg.run.schedule, cfg.run.iterations, b.min_F);
        c.note = "eps calibrated as 3 sqrt(lambda_N min F); ";
    }
    const auto v = convergence_verdict(ens, cfg.problem.space, b.argmin, eps);
    c.samples = v.replicas;
    c.tolerance = cfg.diagnostics.min_fraction;
    c.metrics["eps"] = eps;
    c.metrics["fraction"] = v.fraction;
    c.metrics["median_distance"] = v.median_distance;
    c.passed = v.fraction >= c.tolerance;
    c.note += v.note;
    return c;
}

CheckResult lipschitz_check(const ExperimentConfig& cfg, const ReplicaEnsemble& ens, const BaselineResult& b) {
    CheckResult c;
    c.name = "lipschitz-sum";
    LipschitzSumConfig lc;
    lc.schedule = cfg.run.schedule;
    lc.theta = 2.0 * cfg.run.integrand->mean_L();
    lc.beta = TraceBeta{b.min_F};
    lc.traces = &ens;
    lc.seed = cfg.run.seed;
    const auto rep = simulate_lipschitz_sum(lc, cfg.run.iterations, ens.runs.size());
    c.samples = ens.runs.size();
    c.tolerance = kLipschitzShrinkFraction;
    c.metrics["shrinking_fraction"] = rep.shrinking_fraction;
    c.metrics["median_tail_max"] = rep.median_tail_max;
    c.metrics["clip_events"] = static_cast<double>(rep.clip_events);
    c.passed = rep.verdict == LemmaVerdict::Converging && rep.clip_events == 0;
    c.note = to_string(rep.verdict) + ": " + rep.note;
    return c;
}

bool needs_baseline(const ExperimentConfig& cfg) {
    const auto& k = cfg.diagnostics.checks;
    return cfg.reference_from_baseline || wants(k, "summability") || wants(k, "convergence") ||
           wants(k, "lipschitz-sum");
}

nlohmann::json baseline_json(const SpaceDescriptor& space, const BaselineResult& b) {
    nlohmann::json j;
    j["method"] = to_string(b.method);
    j["argmin"] = nlohmann::json::array();
    for (const auto& p : b.argmin) j["argmin"].push_back(format_point(space, p));
    j["min_F"] = b.min_F;
    j["min_sum"] = b.min_sum;
    j["accuracy"] = b.accuracy;
    j["iterations"] = b.iterations;
    return j;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& in, std::ostream& log) {
    ExperimentConfig cfg = in;
    ExperimentResult res;
    if (!cfg.run.integrand) throw ConfigError("experiment has no integrand");

    if (cfg.baseline != "none") {
        const std::optional<BaselineMethod> method =
            cfg.baseline == "auto" ? std::nullopt : std::optional(parse_baseline_method(cfg.baseline));
        try {
            res.baseline = compute_baseline(*cfg.run.integrand, method);
        } catch (const UnsupportedError& e) {
            if (cfg.baseline != "auto" || needs_baseline(cfg)) throw ConfigError(e.what());
        }
        if (res.baseline)
            log << "baseline " << to_string(res.baseline->method) << ": min F = " << res.baseline->min_F
                << " at " << format_point(cfg.problem.space, res.baseline->argmin.front()) << '\n';
    } else if (needs_baseline(cfg)) {
        throw ConfigError("requested checks need a baseline but baseline.kind = none");
    }
    if (cfg.reference_from_baseline) cfg.run.reference = res.baseline->argmin.front();

    const auto& checks = cfg.diagnostics.checks;
    if ((wants(checks, "summability") || wants(checks, "tail-oscillation") || wants(checks, "modulus") ||
         wants(checks, "quasi-fejer")) &&
        !cfg.run.reference)
        throw ConfigError("requested checks need run.reference");
    if (wants(checks, "modulus") && cfg.replicas < 20) throw ConfigError("modulus check needs run.replicas >= 20");

    res.ensemble = run_ensemble(cfg.run, cfg.replicas, 0, cfg.splitting);
    log << "ran " << cfg.replicas << " replica(s) of " << cfg.run.iterations << " iterations\n";

    auto& rep = res.report;
    for (const auto& name : checks) {
        if (name == "step-bound") rep.checks.push_back(step_bound_check(res.ensemble));
        else if (name == "quasi-fejer") rep.checks.push_back(quasi_fejer_check(cfg, res.ensemble));
        else if (name == "summability") rep.checks.push_back(summability_check(res.ensemble, res.baseline->min_F));
        else if (name == "tail-oscillation")
            rep.checks.push_back(tail_oscillation_check(res.ensemble, cfg.diagnostics.oscillation_fraction));
        else if (name == "modulus") rep.checks.push_back(modulus_check(res.ensemble, cfg.diagnostics.levels));
        else if (name == "convergence") rep.checks.push_back(convergence_check(cfg, res.ensemble, *res.baseline));
        else if (name == "lipschitz-sum") rep.checks.push_back(lipschitz_check(cfg, res.ensemble, *res.baseline));
        else throw ConfigError("unknown diagnostic check '" + name + "'");
        const auto& c = rep.checks.back();
        log << (c.passed ? "PASS " : "FAIL ") << c.name << '\n';
    }
    res.exit_code = rep.all_passed() ? 0 : 1;

    if (!cfg.output_dir.empty()) {
        const std::filesystem::path dir(cfg.output_dir);
        std::filesystem::create_directories(dir);
        write_trace_csv((dir / "trace.csv").string(), res.ensemble);
        write_json((dir / "manifest.json").string(), manifest_json(cfg));
        nlohmann::json report = rep.to_json();
        report["artifact_version"] = kArtifactVersion;
        report["exit_code"] = res.exit_code;
        report["baseline"] = res.baseline ? baseline_json(cfg.problem.space, *res.baseline) : nlohmann::json(nullptr);
        write_json((dir / "report.json").string(), report);
        log << "wrote " << (dir / "trace.csv").string() << ", manifest.json, report.json\n";
    }
    return res;
}

DiagnosticsReport diagnose_traces(const ReplicaEnsemble& ens, const std::vector<std::string>& checks,
                                  std::optional<double> min_F, const DiagnosticsSettings& settings) {
    DiagnosticsReport rep;
    for (const auto& name : checks) {
        if (name == "step-bound") {
            rep.checks.push_back(step_bound_check(ens));
        } else if (name == "summability") {
            if (!min_F) throw ConfigError("summability from a trace needs --min-F");
            rep.checks.push_back(summability_check(ens, *min_F));
        } else if (name == "tail-oscillation") {
            rep.checks.push_back(tail_oscillation_check(ens, settings.oscillation_fraction));
        } else if (name == "modulus") {
            rep.checks.push_back(modulus_check(ens, settings.levels));
        } else {
            throw ConfigError("check '" + name + "' cannot run from a trace file alone");
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Lemma simulations

const std::set<std::string>& simulation_keys() {
    static const std::set<std::string> keys{
        "schedule.c", "schedule.p",      "schedule.n0",     "simulate.N",     "simulate.replicas",
        "simulate.seed", "simulate.alpha", "simulate.theta", "simulate.gamma", "simulate.beta",
        "simulate.admissible", "simulate.adversarial", "output.report",
    };
    return keys;
}

namespace {

std::vector<double> numbers_after(const std::string& spec, const std::string& key) {
    std::vector<double> out;
    const auto colon = spec.find(':');
    if (colon == std::string::npos) return out;
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto kv = KeyValueConfig::parse("v = " + item, {"v"});
        out.push_back(kv.get_double("v", 0.0));
    }
    if (out.empty()) throw ConfigError(key + ": missing parameters in '" + spec + "'");
    return out;
}

AlphaSampler parse_alpha(const std::string& s) {
    const std::string kind = s.substr(0, s.find(':'));
    const auto v = numbers_after(s, "simulate.alpha");
    if (kind == "constant" && v.size() == 1 && v[0] >= 0.0) return AlphaSampler::constant(v[0]);
    if (kind == "uniform" && v.size() == 2 && 0.0 <= v[0] && v[0] <= v[1]) return AlphaSampler::uniform(v[0], v[1]);
    if (kind == "exponential" && v.size() == 1 && v[0] > 0.0) return AlphaSampler::exponential(v[0]);
    throw ConfigError("simulate.alpha must be constant:v, uniform:lo,hi or exponential:mean, got '" + s + "'");
}

BetaRule parse_beta(const std::string& s) {
    const std::string kind = s.substr(0, s.find(':'));
    const auto v = numbers_after(s, "simulate.beta");
    if (kind == "constant" && v.size() == 1) return ConstantBeta{v[0]};
    if (kind == "power" && v.size() == 2) return PowerDecayBeta{v[0], v[1]};
    if (kind == "sawtooth" && v.size() == 1 && v[0] > 0.0) return SawtoothBeta{v[0]};
    throw ConfigError("simulate.beta must be constant:b0, power:b0,exponent or sawtooth:ceiling, got '" + s + "'");
}

} // namespace

nlohmann::json run_simulation(const std::string& lemma, const KeyValueConfig& kv, bool& passed) {
    StepSchedule schedule;
    try {
        schedule = StepSchedule::power(kv.get_double("schedule.c", 1.0), kv.get_double("schedule.p", 1.0),
                                       kv.get_double("schedule.n0", 1.0));
        (void)validate_schedule(schedule);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    const auto N = static_cast<std::size_t>(kv.get_uint("simulate.N", 10000));
    const auto R = static_cast<std::size_t>(kv.get_uint("simulate.replicas", 50));
    const std::uint64_t seed = kv.get_uint("simulate.seed", 1);
    if (N < 4) throw ConfigError("simulate.N must be at least 4");
    const AlphaSampler alpha = parse_alpha(kv.get("simulate.alpha", "uniform:0,2"));

    nlohmann::json j;
    j["lemma"] = lemma;
    j["schedule"] = schedule.to_string();
    j["N"] = N;
    j["replicas"] = R;
    j["alpha"] = alpha.to_string();
    if (lemma == "lipschitz-sum") {
        for (const char* k : {"simulate.adversarial"})
            if (kv.has(k)) throw ConfigError(std::string(k) + " applies to two-series only");
        LipschitzSumConfig lc;
        lc.schedule = schedule;
        lc.theta = kv.get_double("simulate.theta", 1.0);
        lc.alpha = alpha;
        lc.gamma = kv.get_double("simulate.gamma", 1.0);
        lc.beta = parse_beta(kv.get("simulate.beta", "power:1,0.25"));
        lc.admissible = kv.get_bool("simulate.admissible", true);
        lc.seed = seed;
        const auto rep = simulate_lipschitz_sum(lc, N, R);
        j["verdict"] = to_string(rep.verdict);
        j["note"] = rep.note;
        j["checkpoints"] = rep.checkpoints;
        j["shrinking_fraction"] = rep.shrinking_fraction;
        j["median_tail_max"] = rep.median_tail_max;
        j["clip_events"] = rep.clip_events;
        // Admissible configs pass when converging; adversarial ones when flagged.
        passed = lc.admissible ? rep.verdict == LemmaVerdict::Converging
                               : rep.verdict == LemmaVerdict::HypothesisViolated;
    } else if (lemma == "two-series") {
        for (const char* k : {"simulate.theta", "simulate.gamma", "simulate.beta", "simulate.admissible"})
            if (kv.has(k)) throw ConfigError(std::string(k) + " applies to lipschitz-sum only");
        const bool adversarial = kv.get_bool("simulate.adversarial", false);
        const auto rep = two_series_check(schedule, alpha, N, R, seed, adversarial);
        j["verdict"] = to_string(rep.verdict);
        j["note"] = rep.note;
        j["checkpoints"] = rep.checkpoints;
        j["median_oscillation"] = rep.median_oscillation;
        j["schedule_accepted"] = rep.schedule_accepted;
        passed = adversarial ? rep.verdict == LemmaVerdict::HypothesisViolated
                             : rep.verdict == LemmaVerdict::Converging;
    } else {
        throw ConfigError("unknown lemma '" + lemma + "' (expected lipschitz-sum or two-series)");
    }
    j["passed"] = passed;
    return j;
}

} // namespace sppa
