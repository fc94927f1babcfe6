#pragma once

// Stochastic proximal point iteration x_{n+1} = prox_{lambda_n}(xi_{n+1}, x_n)
// with i.i.d. events, its random-order splitting variant, and replica
// ensembles.

#include "sppa/geometry.hpp"
#include "sppa/integrands.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sppa {

// lambda_n = c (n + n0)^(-p), n = 0, 1, ...
struct PowerSchedule {
    double c = 1.0;
    double p = 0.75;
    double n0 = 1.0;
};

// Finite prefix followed by an optional analytic tail. Without a tail the
// schedule cannot be certified and is rejected.
struct ExplicitSchedule {
    std::vector<double> prefix;
    std::optional<PowerSchedule> tail;
};

class StepSchedule {
public:
    StepSchedule() = default;
    StepSchedule(PowerSchedule p) : kind_(p) {}
    StepSchedule(ExplicitSchedule e) : kind_(std::move(e)) {}

    static StepSchedule power(double c, double p, double n0 = 1.0) { return PowerSchedule{c, p, n0}; }
    static StepSchedule constant(double c) { return PowerSchedule{c, 0.0, 1.0}; }

    const std::variant<PowerSchedule, ExplicitSchedule>& kind() const noexcept { return kind_; }

    // Throws DomainError past an explicit prefix without a tail.
    double at(std::size_t n) const;

    std::string to_string() const;

private:
    std::variant<PowerSchedule, ExplicitSchedule> kind_ = PowerSchedule{};
};

struct ScheduleVerdict {
    bool accepted = false;
    std::string reason;
};

// Decides the Robbins-Monro conditions sum lambda_n = inf, sum lambda_n^2 < inf
// analytically. Power schedules are accepted iff p in (1/2, 1]. Throws
// DomainError for c <= 0 or n0 < 1.
ScheduleVerdict validate_schedule(const StepSchedule& s);

struct RunConfig {
    SpaceDescriptor space = SpaceDescriptor::euclidean(1);
    std::shared_ptr<const Integrand> integrand;
    Point x0;
    StepSchedule schedule;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::size_t trace_stride = 100;
    std::optional<Point> reference;
    std::size_t big_F_samples = 1000;
};

// One row per state x_n, n = 0..N. The transition fields (lambda, event,
// step_len, step_bound, growth) describe the move x_n -> x_{n+1} and are
// absent on the final row.
struct TraceRow {
    std::size_t n = 0;
    bool has_step = false;
    double lambda = 0.0;
    std::string event;
    double step_len = 0.0;
    double step_bound = 0.0;
    double growth = 0.0;      // L(xi_{n+1})
    double dist_base = 0.0;   // d(x_n, p)
    std::optional<double> dist_ref;  // d(x_n, z)
    double F_hat = 0.0;
    double F_se = 0.0;
};

struct RunTrace {
    std::uint64_t seed = 0;
    std::vector<TraceRow> rows;
    // (n, x_n) for n a multiple of the stride, plus the final iterate.
    std::vector<std::pair<std::size_t, Point>> iterates;
    Point final_iterate;

    std::size_t iterations() const noexcept { return rows.empty() ? 0 : rows.size() - 1; }
    // Number of rows with step_len > step_bound + 1e-9.
    std::size_t step_bound_violations() const noexcept;
};

struct ReplicaEnsemble {
    std::vector<RunTrace> runs;
};

// Throws ConfigError when the schedule is rejected or points do not live in
// cfg.space.
RunTrace run_sppa(const RunConfig& cfg);

// Random-order splitting: requires a FiniteSum integrand over a uniform
// event space (ConfigError otherwise).
RunTrace run_splitting(const RunConfig& cfg);

// R independent runs; replica r uses derive_seed(cfg.seed, r). Runs execute
// on up to `threads` workers (0 means thread_count()); the result does not
// depend on the worker count.
ReplicaEnsemble run_ensemble(const RunConfig& cfg, std::size_t replicas, std::size_t threads = 0,
                             bool splitting = false);

// Worker count from SPPA_THREADS, defaulting to the hardware concurrency.
std::size_t thread_count();

// Partial sums sum_{n<N} lambda_n and sum_{n<N} lambda_n^2.
std::pair<double, double> schedule_partial_sums(const StepSchedule& s, std::size_t N);

} // namespace sppa
