// Command-line front end. Exit codes: 0 pass, 1 check failure or rejected
// schedule, 2 configuration error, 3 internal error.

#include "sppa/error.hpp"
#include "sppa/harness.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_run(const std::string& config) {
    const auto cfg = sppa::load_experiment_config(config);
    const auto res = sppa::run_experiment(cfg, std::cerr);
    std::cout << res.report.to_json().dump(2) << '\n';
    return res.exit_code;
}

int cmd_validate(double c, double p, double n0) {
    try {
        const auto v = sppa::validate_schedule(sppa::StepSchedule::power(c, p, n0));
        std::cout << (v.accepted ? "accepted: " : "rejected: ") << v.reason << '\n';
        return v.accepted ? 0 : 1;
    } catch (const sppa::DomainError& e) {
        throw sppa::ConfigError(e.what());
    }
}

int cmd_diagnose(const std::string& trace, const std::string& checks, std::optional<double> min_F,
                 const std::string& report) {
    const auto ens = sppa::read_trace_csv(trace);
    sppa::DiagnosticsSettings settings;
    const auto rep = sppa::diagnose_traces(ens, split_list(checks), min_F, settings);
    const auto j = rep.to_json();
    if (!report.empty()) sppa::write_json(report, j);
    std::cout << j.dump(2) << '\n';
    return rep.all_passed() ? 0 : 1;
}

int cmd_simulate(const std::string& lemma, const std::string& config) {
    const auto kv = sppa::KeyValueConfig::load(config, sppa::simulation_keys());
    bool passed = false;
    const auto j = sppa::run_simulation(lemma, kv, passed);
    if (kv.has("output.report")) sppa::write_json(kv.get("output.report", ""), j);
    std::cout << j.dump(2) << '\n';
    return passed ? 0 : 1;
}

int cmd_baseline(const std::string& config) {
    const auto cfg = sppa::load_experiment_config(config);
    sppa::BaselineResult b;
    try {
        std::optional<sppa::BaselineMethod> m;
        if (cfg.baseline != "auto" && cfg.baseline != "none") m = sppa::parse_baseline_method(cfg.baseline);
        b = sppa::compute_baseline(*cfg.run.integrand, m);
    } catch (const sppa::UnsupportedError& e) {
        throw sppa::ConfigError(e.what());
    }
    nlohmann::json j;
    j["method"] = sppa::to_string(b.method);
    j["argmin"] = nlohmann::json::array();
    for (const auto& p : b.argmin) j["argmin"].push_back(sppa::format_point(cfg.problem.space, p));
    j["min_F"] = b.min_F;
    j["min_sum"] = b.min_sum;
    j["accuracy"] = b.accuracy;
    std::cout << j.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic proximal point runs and diagnostics on Hadamard spaces"};
    app.require_subcommand(1);

    std::string config;
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config, "experiment config")->required();

    double c = 1.0, p = 0.75, n0 = 1.0;
    auto* vs = app.add_subcommand("validate-schedule", "decide the step conditions for lambda_n = c (n+n0)^-p");
    vs->add_option("--c", c, "scale")->required();
    vs->add_option("--p", p, "exponent")->required();
    vs->add_option("--n0", n0, "offset")->default_val(1.0);

    std::string trace, checks, report;
    std::optional<double> min_F;
    auto* dg = app.add_subcommand("diagnose", "run trace-only diagnostics on a trace CSV");
    dg->add_option("--trace", trace, "trace CSV")->required();
    dg->add_option("--checks", checks, "comma list: step-bound,summability,tail-oscillation,modulus")->required();
    dg->add_option("--min-F", min_F, "min F for summability");
    dg->add_option("--report", report, "write the report JSON here");

    std::string lemma;
    auto* sim = app.add_subcommand("simulate", "simulate one of the probabilistic lemmas");
    sim->add_option("--lemma", lemma, "lipschitz-sum or two-series")
        ->required()
        ->check(CLI::IsMember({"lipschitz-sum", "two-series"}));
    sim->add_option("--config", config, "simulation config")->required();

    auto* bl = app.add_subcommand("baseline", "compute argmin F and min F for a config");
    bl->add_option("--config", config, "experiment config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(config);
        if (*vs) return cmd_validate(c, p, n0);
        if (*dg) return cmd_diagnose(trace, checks, min_F, report);
        if (*sim) return cmd_simulate(lemma, config);
        if (*bl) return cmd_baseline(config);
    } catch (const sppa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 3;
}
