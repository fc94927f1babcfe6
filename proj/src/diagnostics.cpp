#include "sppa/diagnostics.hpp"

#include "sppa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sppa {

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------
// Quasi-Fejer

double fejer_constant(const Integrand& g, const Point& z) {
    const double d = distance(g.space(), z, g.base());
    return 8.0 * (1.0 + d * d);
}

QuasiFejerRow check_quasi_fejer(const RunConfig& cfg, const Point& state, const Point& z, std::size_t n,
                                std::size_t mc_samples, Stream& stream, ExpectationMode mode) {
    if (!cfg.integrand) throw ConfigError("run has no integrand");
    if (mc_samples == 0) throw DomainError("quasi-Fejer check needs at least one Monte Carlo sample");
    const auto& g = *cfg.integrand;
    const auto& space = g.space();
    const auto& events = g.events();
    if (mode == ExpectationMode::Exact && !events.is_finite())
        throw ConfigError("exact conditional expectation needs a finite event space");
    const bool exact = mode == ExpectationMode::Exact || (mode == ExpectationMode::Auto && events.is_finite());
    if (!exact && mc_samples < 100) throw DomainError("Monte Carlo quasi-Fejer check needs at least 100 samples");

    QuasiFejerRow row;
    row.n = n;
    row.exact = exact;
    row.lambda = cfg.schedule.at(n);
    const double dz = distance(space, state, z);
    row.dist_sq = dz * dz;

    if (exact) {
        double s = 0.0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const double d = distance(space, g.prox(row.lambda, events.event(i), state), z);
            s += events.probability(i) * d * d;
        }
        row.lhs = s;
    } else {
        double mean = 0.0;
        double m2 = 0.0;
        for (std::size_t k = 0; k < mc_samples; ++k) {
            const double d = distance(space, g.prox(row.lambda, g.sample(stream), state), z);
            const double v = d * d;
            const double delta = v - mean;
            mean += delta / static_cast<double>(k + 1);
            m2 += delta * (v - mean);
        }
        row.lhs = mean;
        row.lhs_se = std::sqrt(m2 / static_cast<double>(mc_samples - 1) / static_cast<double>(mc_samples));
    }

    row.constant = fejer_constant(g, z);
    row.chi = 2.0 * row.constant * row.lambda * row.lambda * g.mean_L_sq();
    row.eta = row.chi;
    const Estimate Fx = big_F(g, state, cfg.big_F_samples, stream);
    const Estimate Fz = big_F(g, z, cfg.big_F_samples, stream);
    row.theta = 2.0 * row.lambda * (Fx.value - Fz.value);
    row.theta_se = 2.0 * row.lambda * std::hypot(Fx.standard_error, Fz.standard_error);
    row.rhs = (1.0 + row.chi) * row.dist_sq - row.theta + row.eta;
    row.se_total = std::hypot(row.lhs_se, row.theta_se);
    row.pass = row.lhs <= row.rhs + kSigmaMargin * row.se_total + kGeometryTol;
    return row;
}

// ---------------------------------------------------------------------------
// Summability and boundedness

SummabilityReport summability_report(const RunTrace& trace, double min_F, std::optional<std::size_t> upto) {
    if (trace.rows.empty()) throw ConfigError("empty trace");
    const std::size_t N = upto.value_or(trace.iterations());
    if (N > trace.iterations()) throw DomainError("summability horizon exceeds the trace length");
    SummabilityReport rep;
    rep.N = N;
    double var = 0.0;
    double tail_min = std::numeric_limits<double>::infinity();
    double tail_max = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n <= N; ++n) {
        const auto& r = trace.rows[n];
        if (!r.dist_ref) throw ConfigError("trace has no reference point; summability needs z");
        rep.sup_dist = std::max(rep.sup_dist, *r.dist_ref);
        if (n >= N / 2) {
            tail_min = std::min(tail_min, *r.dist_ref);
            tail_max = std::max(tail_max, *r.dist_ref);
        }
        if (n == N) break;
        const double inc = r.lambda * (r.F_hat - min_F);
        rep.partial_sum += inc;
        var += r.lambda * r.lambda * r.F_se * r.F_se;
        if (inc < -kSigmaMargin * r.lambda * r.F_se - kGeometryTol) ++rep.negative_increments;
    }
    rep.partial_sum_se = std::sqrt(var);
    rep.tail_oscillation = tail_max - tail_min;
    return rep;
}

std::vector<ModulusRow> estimate_boundedness_modulus(const ReplicaEnsemble& ens, const std::vector<double>& levels) {
    const std::size_t R = ens.runs.size();
    if (R < 20) throw ConfigError("boundedness modulus needs at least 20 replicas");
    std::vector<double> sups;
    sups.reserve(R);
    for (const auto& run : ens.runs) {
        double s = 0.0;
        for (const auto& r : run.rows) {
            if (!r.dist_ref) throw ConfigError("trace has no reference point; modulus needs z");
            s = std::max(s, *r.dist_ref);
        }
        sups.push_back(s);
    }
    std::sort(sups.begin(), sups.end());
    std::vector<ModulusRow> out;
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) throw DomainError("modulus levels must lie in (0,1)");
        ModulusRow row;
        row.level = level;
        row.allowed = static_cast<std::size_t>(std::floor(level * static_cast<double>(R) + 1e-9));
        row.resolvable = row.allowed >= 1;
        if (row.resolvable) {
            // Smallest sample value with at least R - allowed samples at or below it.
            row.psi = sups[R - row.allowed - 1];
            row.exceedances = static_cast<std::size_t>(
                std::count_if(sups.begin(), sups.end(), [&](double s) { return s > row.psi; }));
        }
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lipschitz-sum simulator

double AlphaSampler::mean() const {
    switch (kind) {
    case Kind::Constant: return a;
    case Kind::Uniform: return 0.5 * (a + b);
    case Kind::Exponential: return a;
    }
    return 0.0;
}

double AlphaSampler::draw(Stream& stream) const {
    switch (kind) {
    case Kind::Constant: return a;
    case Kind::Uniform: return sppa::uniform(stream, a, b);
    case Kind::Exponential: {
        double u = uniform01(stream);
        while (u <= 0.0) u = uniform01(stream);
        return -a * std::log(u);
    }
    }
    return 0.0;
}

std::string AlphaSampler::to_string() const {
    switch (kind) {
    case Kind::Constant: return "constant(" + std::to_string(a) + ")";
    case Kind::Uniform: return "uniform(" + std::to_string(a) + "," + std::to_string(b) + ")";
    case Kind::Exponential: return "exponential(" + std::to_string(a) + ")";
    }
    return "?";
}

std::string to_string(LemmaVerdict v) {
    switch (v) {
    case LemmaVerdict::Converging: return "converging";
    case LemmaVerdict::NotShrinking: return "not-shrinking";
    case LemmaVerdict::DegenerateConstant: return "degenerate-constant";
    case LemmaVerdict::HypothesisViolated: return "hypothesis-violated";
    }
    return "?";
}

namespace {

std::vector<std::size_t> doubling_checkpoints(std::size_t N) {
    if (N < 8) throw DomainError("simulation horizon must be at least 8");
    return {N / 4, N / 2, N};
}

// max of v[n] over M/2 <= n <= M
double tail_max_at(const std::vector<double>& v, std::size_t M) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t n = M / 2; n <= M; ++n) m = std::max(m, v[n]);
    return m;
}

double tail_osc_at(const std::vector<double>& v, std::size_t M) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t n = M / 2; n <= M; ++n) {
        lo = std::min(lo, v[n]);
        hi = std::max(hi, v[n]);
    }
    return hi - lo;
}

bool strictly_shrinking(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1]) && !(v[i] == 0.0 && v[i - 1] == 0.0)) return false;
    return true;
}

} // namespace

LipschitzReport simulate_lipschitz_sum(const LipschitzSumConfig& cfg, std::size_t N, std::size_t replicas) {
    const auto verdict = validate_schedule(cfg.schedule);
    if (!verdict.accepted) throw ConfigError(verdict.reason);
    if (!(cfg.theta > 0.0)) throw ConfigError("theta must be positive");
    if (!(cfg.gamma >= 0.0)) throw ConfigError("gamma must be nonnegative");
    if (replicas == 0) throw ConfigError("simulation needs at least one replica");
    const bool from_trace = std::holds_alternative<TraceBeta>(cfg.beta);
    if (from_trace) {
        if (cfg.traces == nullptr || cfg.traces->runs.size() < replicas)
            throw ConfigError("trace-derived beta needs one trace per replica");
        for (std::size_t r = 0; r < replicas; ++r)
            if (cfg.traces->runs[r].iterations() < N) throw ConfigError("trace shorter than the simulation horizon");
    }

    LipschitzReport rep;
    rep.N = N;
    rep.checkpoints = doubling_checkpoints(N);
    bool all_constant = true;
    std::vector<double> beta(N + 1);
    std::vector<double> lambda(N);
    for (std::size_t r = 0; r < replicas; ++r) {
        Stream stream(derive_seed(cfg.seed, r));
        LipschitzReplica rr;
        const RunTrace* trace = from_trace ? &cfg.traces->runs[r] : nullptr;
        auto rule_value = [&](std::size_t n, double prev, double cap) -> double {
            return std::visit(
                [&](const auto& rule) -> double {
                    using T = std::decay_t<decltype(rule)>;
                    if constexpr (std::is_same_v<T, ConstantBeta>) {
                        return rule.beta0;
                    } else if constexpr (std::is_same_v<T, PowerDecayBeta>) {
                        return rule.beta0 * std::pow(static_cast<double>(n) + 1.0, -rule.exponent);
                    } else if constexpr (std::is_same_v<T, SawtoothBeta>) {
                        if (n == 0) return 0.0;
                        return prev >= rule.ceiling ? 0.0 : cap;
                    } else {
                        return std::max(0.0, trace->rows[n].F_hat - rule.min_F);
                    }
                },
                cfg.beta);
        };
        beta[0] = rule_value(0, 0.0, 0.0);
        for (std::size_t n = 0; n < N; ++n) {
            double alpha, gamma;
            if (trace) {
                const auto& row = trace->rows[n];
                lambda[n] = row.lambda;
                alpha = row.growth;
                gamma = (1.0 + trace->rows[n + 1].dist_base) * (1.0 + row.dist_base);
            } else {
                lambda[n] = cfg.schedule.at(n);
                alpha = cfg.alpha.draw(stream);
                gamma = cfg.gamma;
            }
            const double cap = beta[n] + cfg.theta * lambda[n] * gamma * alpha;
            double next = rule_value(n + 1, beta[n], cap);
            // Tolerate rounding in trace-derived values before counting a clip.
            if (next > cap + 1e-12 * (1.0 + std::abs(cap))) {
                next = cap;
                ++rr.clip_events;
            }
            beta[n + 1] = std::max(0.0, next);
        }
        for (std::size_t n = 1; n <= N && all_constant; ++n)
            if (beta[n] != beta[0]) all_constant = false;

        double acc = 0.0;
        std::size_t next_cp = 0;
        for (std::size_t n = 0; n < N; ++n) {
            acc += lambda[n] * beta[n];
            while (next_cp < rep.checkpoints.size() && rep.checkpoints[next_cp] == n + 1) {
                rr.weighted_sum_at.push_back(acc);
                ++next_cp;
            }
        }
        rr.weighted_sum = acc;
        for (std::size_t M : rep.checkpoints) rr.tail_max.push_back(tail_max_at(beta, M));
        rr.shrinking = strictly_shrinking(rr.tail_max);
        rep.clip_events += rr.clip_events;
        rep.replicas.push_back(std::move(rr));
    }

    std::vector<double> final_tail;
    std::size_t shrinking = 0;
    for (const auto& rr : rep.replicas) {
        final_tail.push_back(rr.tail_max.back());
        if (rr.shrinking) ++shrinking;
    }
    rep.median_tail_max = median(final_tail);
    rep.shrinking_fraction = static_cast<double>(shrinking) / static_cast<double>(replicas);

    if (!cfg.admissible) {
        rep.verdict = LemmaVerdict::HypothesisViolated;
        rep.note = "sum of lambda_n beta_n is not finite for this configuration; beta_n -> 0 is not asserted";
    } else if (all_constant) {
        rep.verdict = LemmaVerdict::DegenerateConstant;
        rep.note = "beta is constant (alpha identically zero forces no movement)";
    } else if (rep.shrinking_fraction >= kLipschitzShrinkFraction) {
        rep.verdict = LemmaVerdict::Converging;
        rep.note = "tail max of beta shrinks across both doublings in enough replicas";
    } else {
        rep.verdict = LemmaVerdict::NotShrinking;
        rep.note = "tail max of beta fails to shrink in too many replicas";
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Two-series check

TwoSeriesReport two_series_check(const StepSchedule& schedule, const AlphaSampler& alpha, std::size_t N,
                                 std::size_t replicas, std::uint64_t seed, bool adversarial) {
    const auto verdict = validate_schedule(schedule);
    if (!verdict.accepted && !adversarial) throw ConfigError(verdict.reason);
    if (replicas == 0) throw ConfigError("simulation needs at least one replica");
    TwoSeriesReport rep;
    rep.N = N;
    rep.checkpoints = doubling_checkpoints(N);
    rep.schedule_accepted = verdict.accepted;
    const double mu = alpha.mean();

    std::vector<std::vector<double>> osc(rep.checkpoints.size());
    std::vector<double> partial(N + 1);
    for (std::size_t r = 0; r < replicas; ++r) {
        Stream stream(derive_seed(seed, r));
        double acc = 0.0;
        partial[0] = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            acc += schedule.at(n) * (alpha.draw(stream) - mu);
            partial[n + 1] = acc;
        }
        for (std::size_t i = 0; i < rep.checkpoints.size(); ++i)
            osc[i].push_back(tail_osc_at(partial, rep.checkpoints[i]));
    }
    for (auto& o : osc) rep.median_oscillation.push_back(median(o));

    const bool shrinking = strictly_shrinking(rep.median_oscillation);
    if (!verdict.accepted) {
        rep.verdict = LemmaVerdict::HypothesisViolated;
        rep.note = "schedule rejected: " + verdict.reason +
                   (shrinking ? " (oscillation happened to shrink; not asserted)" : "; oscillation does not shrink");
    } else if (shrinking) {
        rep.verdict = LemmaVerdict::Converging;
        rep.note = "median tail oscillation of the centered partial sums shrinks with N";
    } else {
        rep.verdict = LemmaVerdict::NotShrinking;
        rep.note = "median tail oscillation failed to shrink";
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Asymptotic center

namespace {

double max_sq_dist(const SpaceDescriptor& space, const std::vector<Point>& window, const Point& x) {
    double m = 0.0;
    for (const auto& w : window) {
        const double d = distance(space, w, x);
        m = std::max(m, d * d);
    }
    return m;
}

} // namespace

CenterEstimate estimate_asymptotic_center(const std::vector<Point>& window, const SpaceDescriptor& space) {
    if (window.empty()) throw DomainError("asymptotic center of an empty window");
    for (const auto& w : window) validate(space, w);

    // Phase 1: iterated geodesic averaging toward the farthest point.
    Point x = window.front();
    constexpr int kAveraging = 2000;
    for (int k = 1; k <= kAveraging; ++k) {
        std::size_t far = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < window.size(); ++i) {
            const double d = distance(space, window[i], x);
            if (d > best) {
                best = d;
                far = i;
            }
        }
        if (best == 0.0) break;
        x = geodesic(space, x, window[far], 1.0 / (k + 1.0));
    }

    // Phase 2: pattern search along geodesics toward window points and toward
    // points between the currently farthest ones.
    double value = max_sq_dist(space, window, x);
    double diameter = 0.0;
    for (const auto& w : window) diameter = std::max(diameter, distance(space, w, x));
    double step = std::max(diameter, 1e-300);
    constexpr std::size_t kActive = 4;
    while (step > 1e-13 * (1.0 + diameter)) {
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t i = 0; i < window.size(); ++i) order.emplace_back(distance(space, window[i], x), i);
        std::sort(order.begin(), order.end(), std::greater<>());
        std::vector<Point> targets;
        const std::size_t active = std::min(kActive, order.size());
        if (window.size() <= 64) {
            targets = window;
        } else {
            for (std::size_t i = 0; i < active; ++i) targets.push_back(window[order[i].second]);
        }
        for (std::size_t i = 0; i < active; ++i)
            for (std::size_t j = i + 1; j < active; ++j)
                for (double s : {0.25, 0.5, 0.75})
                    targets.push_back(geodesic(space, window[order[i].second], window[order[j].second], s));

        bool improved = false;
        Point best_x = x;
        double best_v = value;
        for (const auto& t : targets) {
            const double d = distance(space, x, t);
            if (d == 0.0) continue;
            const Point cand = geodesic(space, x, t, std::min(1.0, step / d));
            const double v = max_sq_dist(space, window, cand);
            if (v < best_v) {
                best_v = v;
                best_x = cand;
                improved = true;
            }
        }
        if (improved) {
            x = std::move(best_x);
            value = best_v;
        } else {
            step *= 0.5;
        }
    }
    return {x, value};
}

ConvergenceVerdict convergence_verdict(const ReplicaEnsemble& ens, const SpaceDescriptor& space,
                                       const std::vector<Point>& argmin, double eps) {
    if (argmin.empty()) throw ConfigError("convergence verdict needs a nonempty argmin set");
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    ConvergenceVerdict v;
    v.replicas = ens.runs.size();
    std::vector<double> dists;
    for (const auto& run : ens.runs) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& z : argmin) d = std::min(d, distance(space, run.final_iterate, z));
        dists.push_back(d);
        if (d <= eps) ++v.converged;
    }
    v.fraction = v.replicas ? static_cast<double>(v.converged) / static_cast<double>(v.replicas) : 0.0;
    v.median_distance = median(dists);
    v.note = "tests strong convergence of the final iterate; a valid witness of weak convergence because every "
             "implemented space is locally compact";
    return v;
}

// ---------------------------------------------------------------------------
// Report

bool DiagnosticsReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult* DiagnosticsReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

nlohmann::json DiagnosticsReport::to_json() const {
    nlohmann::json j;
    j["all_passed"] = all_passed();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [k, v] : c.metrics) m[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
        j["checks"].push_back({{"name", c.name},
                               {"passed", c.passed},
                               {"tolerance", c.tolerance},
                               {"samples", c.samples},
                               {"metrics", m},
                               {"note", c.note}});
    }
    return j;
}

} // namespace sppa
