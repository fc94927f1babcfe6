#include "sppa/engine.hpp"

#include "sppa/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace sppa {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_power_domain(const PowerSchedule& p) {
    if (!(p.c > 0.0) || !std::isfinite(p.c)) throw DomainError("schedule constant c must be positive");
    if (!(p.n0 >= 1.0) || !std::isfinite(p.n0)) throw DomainError("schedule offset n0 must be >= 1");
    if (!std::isfinite(p.p)) throw DomainError("schedule exponent must be finite");
}

ScheduleVerdict judge_power(const PowerSchedule& p) {
    check_power_domain(p);
    if (p.p <= 0.5)
        return {false, "Robbins-Monro step condition violated: sum of lambda_n^2 diverges for exponent p = " +
                           fmt_double(p.p) + " <= 1/2"};
    if (p.p > 1.0)
        return {false, "Robbins-Monro step condition violated: sum of lambda_n converges for exponent p = " +
                           fmt_double(p.p) + " > 1"};
    return {true, "sum lambda_n = inf and sum lambda_n^2 < inf for p in (1/2, 1]"};
}

std::string event_label(const Integrand& g, const Event& e) {
    if (e.anchor) return format_point(g.space(), *e.anchor);
    return std::to_string(e.index);
}

RunTrace run_impl(const RunConfig& cfg) {
    const auto verdict = validate_schedule(cfg.schedule);
    if (!verdict.accepted) throw ConfigError(verdict.reason);
    if (!cfg.integrand) throw ConfigError("run has no integrand");
    if (!(cfg.integrand->space() == cfg.space)) throw ConfigError("integrand lives in a different space than the run");
    if (cfg.trace_stride == 0) throw ConfigError("trace_stride must be positive");
    if (cfg.big_F_samples == 0) throw ConfigError("big_F_samples must be positive");
    try {
        validate(cfg.space, cfg.x0);
        if (cfg.reference) validate(cfg.space, *cfg.reference);
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid start or reference point: ") + e.what());
    }

    const auto& g = *cfg.integrand;
    const auto& space = cfg.space;
    // Events and Monte Carlo estimates of F use separate streams so the event
    // sequence does not depend on whether F needs sampling.
    Stream events(cfg.seed);
    Stream estimates(splitmix64(cfg.seed ^ 0xF00DF00DF00DF00DULL));

    RunTrace trace;
    trace.seed = cfg.seed;
    trace.rows.reserve(cfg.iterations + 1);
    Point x = cfg.x0;
    for (std::size_t n = 0;; ++n) {
        TraceRow row;
        row.n = n;
        row.dist_base = distance(space, x, g.base());
        if (cfg.reference) row.dist_ref = distance(space, x, *cfg.reference);
        const Estimate F = big_F(g, x, cfg.big_F_samples, estimates);
        row.F_hat = F.value;
        row.F_se = F.standard_error;
        if (n % cfg.trace_stride == 0 || n == cfg.iterations) trace.iterates.emplace_back(n, x);
        if (n == cfg.iterations) {
            trace.rows.push_back(std::move(row));
            break;
        }
        const double lambda = cfg.schedule.at(n);
        const Event e = g.sample(events);
        Point next = g.prox(lambda, e, x);
        row.has_step = true;
        row.lambda = lambda;
        row.event = event_label(g, e);
        row.growth = g.growth(e);
        row.step_len = distance(space, next, x);
        row.step_bound = 2.0 * lambda * row.growth * (1.0 + row.dist_base);
        trace.rows.push_back(std::move(row));
        x = std::move(next);
    }
    trace.final_iterate = std::move(x);
    return trace;
}

} // namespace

double StepSchedule::at(std::size_t n) const {
    if (const auto* p = std::get_if<PowerSchedule>(&kind_))
        return p->c * std::pow(static_cast<double>(n) + p->n0, -p->p);
    const auto& e = std::get<ExplicitSchedule>(kind_);
    if (n < e.prefix.size()) return e.prefix[n];
    if (!e.tail) throw DomainError("explicit schedule has no tail rule past index " + std::to_string(e.prefix.size()));
    return StepSchedule(*e.tail).at(n);
}

std::string StepSchedule::to_string() const {
    auto power = [](const PowerSchedule& p) {
        return "power(c=" + fmt_double(p.c) + ",p=" + fmt_double(p.p) + ",n0=" + fmt_double(p.n0) + ")";
    };
    if (const auto* p = std::get_if<PowerSchedule>(&kind_)) return power(*p);
    const auto& e = std::get<ExplicitSchedule>(kind_);
    std::string s = "explicit(" + std::to_string(e.prefix.size()) + " values";
    if (e.tail) s += ", tail " + power(*e.tail);
    return s + ")";
}

ScheduleVerdict validate_schedule(const StepSchedule& s) {
    if (const auto* p = std::get_if<PowerSchedule>(&s.kind())) return judge_power(*p);
    const auto& e = std::get<ExplicitSchedule>(s.kind());
    for (double v : e.prefix)
        if (!(v > 0.0) || !std::isfinite(v)) return {false, "explicit schedule has a nonpositive step"};
    if (!e.tail) return {false, "undecidable from finite prefix"};
    return judge_power(*e.tail);
}

std::size_t RunTrace::step_bound_violations() const noexcept {
    std::size_t v = 0;
    for (const auto& r : rows)
        if (r.has_step && r.step_len > r.step_bound + kGeometryTol) ++v;
    return v;
}

RunTrace run_sppa(const RunConfig& cfg) { return run_impl(cfg); }

RunTrace run_splitting(const RunConfig& cfg) {
    if (!cfg.integrand) throw ConfigError("run has no integrand");
    const auto& g = *cfg.integrand;
    if (g.family() != IntegrandFamily::FiniteSum)
        throw ConfigError("splitting needs a finite-sum integrand");
    if (!g.events().is_uniform())
        throw ConfigError("splitting draws components uniformly; the finite sum has non-uniform weights");
    return run_impl(cfg);
}

std::size_t thread_count() {
    if (const char* env = std::getenv("SPPA_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

ReplicaEnsemble run_ensemble(const RunConfig& cfg, std::size_t replicas, std::size_t threads, bool splitting) {
    if (replicas == 0) throw ConfigError("ensemble needs at least one replica");
    ReplicaEnsemble ens;
    ens.runs.resize(replicas);
    std::vector<RunConfig> configs(replicas, cfg);
    for (std::size_t r = 0; r < replicas; ++r) configs[r].seed = derive_seed(cfg.seed, r);
    for (std::size_t r = 1; r < replicas; ++r)
        if (configs[r].seed == configs[0].seed) throw Error("derived replica seed collides with the master seed");

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t r = next++; r < replicas; r = next++) {
            try {
                ens.runs[r] = splitting ? run_splitting(configs[r]) : run_sppa(configs[r]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min(replicas, threads == 0 ? thread_count() : threads);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return ens;
}

std::pair<double, double> schedule_partial_sums(const StepSchedule& s, std::size_t N) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const double l = s.at(n);
        a += l;
        b += l * l;
    }
    return {a, b};
}

} // namespace sppa
