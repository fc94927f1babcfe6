#pragma once

// Experiment orchestration: configuration files, baselines (argmin F and
// min F by closed form, exhaustive search, or a deterministic proximal run),
// trace/manifest/report persistence, and the end-to-end experiment driver.

#include "sppa/diagnostics.hpp"
#include "sppa/engine.hpp"
#include "sppa/geometry.hpp"
#include "sppa/integrands.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sppa {

inline constexpr const char* kArtifactVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Flat "dotted.key = value" configuration files

class KeyValueConfig {
public:
    // '#' starts a comment; blank lines are ignored; duplicate keys are an
    // error. Keys not in `allowed` are rejected.
    static KeyValueConfig parse(const std::string& text, const std::set<std::string>& allowed);
    static KeyValueConfig load(const std::string& path, const std::set<std::string>& allowed);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Directory of the file the config was loaded from, for relative paths.
    const std::string& base_dir() const noexcept { return base_dir_; }

private:
    std::map<std::string, std::string> values_;
    std::string base_dir_ = ".";
};

// ---------------------------------------------------------------------------
// Problem description (everything needed to rebuild the integrand)

struct ProblemSpec {
    SpaceDescriptor space = SpaceDescriptor::euclidean(1);
    IntegrandFamily family = IntegrandFamily::SquaredDistance;
    std::string events = "anchors";  // anchors | finite-sum | generator
    // Anchors are sampled uniformly; the optional weight column scales the
    // objective weight, w_e = weight * column.
    std::vector<WeightedPoint> anchors;
    double weight = 1.0;
    std::optional<Point> base;           // p; defaults to the space base point
    std::optional<double> operating_radius;
    GeneratedEvents generator{SpaceDescriptor::euclidean(1)};
};

// Default operating radius: max(anchor radius, d(x0, p)), the smallest ball
// around p that contains every iterate.
std::shared_ptr<const Integrand> build_integrand(const ProblemSpec& spec, const Point& x0);

// ---------------------------------------------------------------------------
// Baselines

enum class BaselineMethod { ClosedForm, ExhaustiveSearch, DeterministicProximal };

std::string to_string(BaselineMethod m);
BaselineMethod parse_baseline_method(const std::string& s);

struct BaselineResult {
    std::vector<Point> argmin;
    double min_F = 0.0;     // min of the integral F = sum_e mu(e) f(e, .)
    double min_sum = 0.0;   // sum_e f(e, argmin) over the finite event list (N * min_F when uniform)
    BaselineMethod method = BaselineMethod::ClosedForm;
    double accuracy = 0.0;
    std::size_t iterations = 0;
};

// Throws UnsupportedError for problems outside the built-in menu.
BaselineResult compute_baseline(const Integrand& g, std::optional<BaselineMethod> method = std::nullopt);

// ---------------------------------------------------------------------------
// Experiments

struct DiagnosticsSettings {
    std::vector<std::string> checks;
    std::size_t mc_samples = 10000;
    std::size_t states = 200;
    std::vector<double> levels{0.1, 0.5};
    std::optional<double> eps;  // defaults to the calibrated radius for squared distance
    double min_fraction = 0.9;
    double quasi_fejer_pass_rate = 0.99;
    double oscillation_fraction = 0.9;
    ExpectationMode mode = ExpectationMode::Auto;
};

struct ExperimentConfig {
    ProblemSpec problem;
    RunConfig run;
    bool splitting = false;
    std::size_t replicas = 1;
    bool reference_from_baseline = false;
    DiagnosticsSettings diagnostics;
    std::string baseline = "auto";  // auto | none | closed-form | exhaustive-search | deterministic-proximal
    std::string output_dir;         // empty: write nothing
};

// Throws ConfigError for anything malformed or inconsistent.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const KeyValueConfig& kv);
const std::set<std::string>& experiment_keys();

nlohmann::json manifest_json(const ExperimentConfig& cfg);
// Inverse of manifest_json for the run-defining fields.
ExperimentConfig config_from_manifest(const nlohmann::json& manifest);

// Calibrated convergence radius for squared-distance problems:
// 3 sqrt(lambda_N min_F), three times the stationary RMS error of the
// iteration around the minimizer.
double calibrated_radius(const StepSchedule& schedule, std::size_t N, double min_F);

struct ExperimentResult {
    int exit_code = 0;
    std::optional<BaselineResult> baseline;
    ReplicaEnsemble ensemble;
    DiagnosticsReport report;
};

// Runs baseline, ensemble and diagnostics and writes artifacts when
// cfg.output_dir is set. Exit code 0 when every requested check passes, 1
// otherwise. Errors propagate as exceptions.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream& log);

// ---------------------------------------------------------------------------
// Persistence

// Columns: replica,n,lambda,event,step_len,step_bound,dist_ref,F_hat,F_se.
// Reals use 17 significant digits; transition fields are empty on the final
// row and dist_ref is empty without a reference point.
void write_trace_csv(std::ostream& out, const ReplicaEnsemble& ens);
void write_trace_csv(const std::string& path, const ReplicaEnsemble& ens);
// Rebuilds the scalar rows (no iterates, growth or base distances).
ReplicaEnsemble read_trace_csv(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);

// Diagnostics that work from a trace CSV alone: step-bound, summability
// (needs min_F), tail-oscillation, modulus.
DiagnosticsReport diagnose_traces(const ReplicaEnsemble& ens, const std::vector<std::string>& checks,
                                  std::optional<double> min_F, const DiagnosticsSettings& settings);

// ---------------------------------------------------------------------------
// Lemma simulations driven from a config file

nlohmann::json run_simulation(const std::string& lemma, const KeyValueConfig& kv, bool& passed);
const std::set<std::string>& simulation_keys();

} // namespace sppa
