#pragma once

// Empirical certification of the inequalities behind the convergence of the
// stochastic proximal point method, plus standalone simulators for the two
// probabilistic lemmas it relies on (a two-series argument and a
// Lipschitz-sum recursion).
//
// Almost-sure statements are operationalized as replica fractions, limsup
// quantities as the max over the second half of the realized window, and
// Monte Carlo comparisons use a margin of kSigmaMargin standard errors.

#include "sppa/engine.hpp"
#include "sppa/geometry.hpp"
#include "sppa/integrands.hpp"

#include "json.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sppa {

inline constexpr double kSigmaMargin = 3.0;

// ---------------------------------------------------------------------------
// Quasi-Fejer inequality
//
//   E_n[d^2(x_{n+1}, z)] <= (1 + chi_n) d^2(x_n, z) - theta_n + eta_n
//   chi_n = eta_n = 2 C lambda_n^2 Lbar,  theta_n = 2 lambda_n (F(x_n) - F(z)),
//   C = 8 (1 + d^2(z, p)),  Lbar = integral of L^2.

enum class ExpectationMode { Auto, Exact, MonteCarlo };

struct QuasiFejerRow {
    std::size_t n = 0;
    double lambda = 0.0;
    double dist_sq = 0.0;   // d^2(x_n, z)
    double lhs = 0.0;       // estimate of E_n[d^2(x_{n+1}, z)]
    double lhs_se = 0.0;
    double constant = 0.0;  // C
    double chi = 0.0;
    double eta = 0.0;
    double theta = 0.0;
    double theta_se = 0.0;
    double rhs = 0.0;
    double se_total = 0.0;
    bool exact = false;
    bool pass = false;
};

// 8 (1 + d^2(z, p)).
double fejer_constant(const Integrand& g, const Point& z);

// Throws DomainError when mc_samples == 0 (Monte Carlo mode) and
// ConfigError for an Exact request on a continuous event space.
QuasiFejerRow check_quasi_fejer(const RunConfig& cfg, const Point& state, const Point& z, std::size_t n,
                                std::size_t mc_samples, Stream& stream,
                                ExpectationMode mode = ExpectationMode::Auto);

// ---------------------------------------------------------------------------
// Summability, boundedness and tail stability along a trace

struct SummabilityReport {
    std::size_t N = 0;
    double partial_sum = 0.0;      // S_N = sum_{n<N} lambda_n (F_hat(x_n) - min_F)
    double partial_sum_se = 0.0;   // from the per-row F standard errors
    double sup_dist = 0.0;         // sup_{n<=N} d(x_n, z)
    double tail_oscillation = 0.0; // max - min of d(x_n, z) over N/2 <= n <= N
    std::size_t negative_increments = 0;  // lambda_n (F_hat - min_F) < -3 lambda_n SE
};

// Uses the first `upto` iterations (default: all). Throws ConfigError when
// the trace carries no reference distances.
SummabilityReport summability_report(const RunTrace& trace, double min_F,
                                     std::optional<std::size_t> upto = std::nullopt);

struct ModulusRow {
    double level = 0.0;
    bool resolvable = false;
    double psi = 0.0;            // empirical (1 - level)-quantile of sup_n d(x_n, z)
    std::size_t exceedances = 0; // replicas with sup > psi
    std::size_t allowed = 0;     // floor(level * R)
};

// Empirical modulus of uniform boundedness: P(sup_n d(x_n, z) > psi) <= level.
// z is the reference point the ensemble was run with. Throws DomainError for
// levels outside (0,1) and ConfigError for R < 20 or missing references.
std::vector<ModulusRow> estimate_boundedness_modulus(const ReplicaEnsemble& ens,
                                                     const std::vector<double>& levels);

// ---------------------------------------------------------------------------
// Lipschitz-sum recursion beta_{n+1} - beta_n <= theta lambda_n gamma_n alpha_n

struct AlphaSampler {
    enum class Kind { Constant, Uniform, Exponential };
    Kind kind = Kind::Constant;
    double a = 1.0;  // constant value, lower bound, or mean
    double b = 1.0;  // upper bound for Uniform

    static AlphaSampler constant(double v) { return {Kind::Constant, v, v}; }
    static AlphaSampler uniform(double lo, double hi) { return {Kind::Uniform, lo, hi}; }
    static AlphaSampler exponential(double mean) { return {Kind::Exponential, mean, mean}; }

    double mean() const;
    double draw(Stream& stream) const;
    std::string to_string() const;
};

// beta_n = beta0 for every n.
struct ConstantBeta {
    double beta0 = 1.0;
};
// beta_n = beta0 (n + 1)^(-exponent).
struct PowerDecayBeta {
    double beta0 = 1.0;
    double exponent = 0.25;
};
// Climbs at the largest rate the recursion allows until it reaches `ceiling`,
// then drops to zero; sum lambda_n beta_n diverges.
struct SawtoothBeta {
    double ceiling = 1.0;
};
// beta_n = F_hat(x_n) - min_F, gamma_n = (1 + d(x_{n+1},p))(1 + d(x_n,p)),
// alpha_n = L(xi_{n+1}), lambda_n from the trace.
struct TraceBeta {
    double min_F = 0.0;
};

using BetaRule = std::variant<ConstantBeta, PowerDecayBeta, SawtoothBeta, TraceBeta>;

struct LipschitzSumConfig {
    StepSchedule schedule;
    double theta = 1.0;
    AlphaSampler alpha;
    double gamma = 1.0;  // constant gamma_n for recursion rules
    BetaRule beta = PowerDecayBeta{};
    bool admissible = true;  // whether sum lambda_n beta_n < inf is expected
    std::uint64_t seed = 1;
    // Source traces for TraceBeta; replica r uses traces->runs[r].
    const ReplicaEnsemble* traces = nullptr;
};

enum class LemmaVerdict { Converging, NotShrinking, DegenerateConstant, HypothesisViolated };

std::string to_string(LemmaVerdict v);

struct LipschitzReplica {
    std::vector<double> tail_max;   // at checkpoints N/4, N/2, N
    double weighted_sum = 0.0;      // sum_{n<N} lambda_n beta_n
    std::vector<double> weighted_sum_at;  // at the checkpoints
    std::size_t clip_events = 0;
    bool shrinking = false;
};

struct LipschitzReport {
    std::size_t N = 0;
    std::vector<std::size_t> checkpoints;
    std::vector<LipschitzReplica> replicas;
    double shrinking_fraction = 0.0;
    double median_tail_max = 0.0;   // at N
    std::size_t clip_events = 0;
    LemmaVerdict verdict = LemmaVerdict::NotShrinking;
    std::string note;
};

// Throws ConfigError when the schedule is rejected, theta <= 0 or a
// TraceBeta rule has no (or too few) traces.
LipschitzReport simulate_lipschitz_sum(const LipschitzSumConfig& cfg, std::size_t N, std::size_t replicas);

// Fraction of replicas whose tail max must shrink for a Converging verdict.
inline constexpr double kLipschitzShrinkFraction = 0.8;

// ---------------------------------------------------------------------------
// Two-series partial sums E_n = sum_{k<=n} lambda_k (alpha_k - mu)

struct TwoSeriesReport {
    std::size_t N = 0;
    std::vector<std::size_t> checkpoints;         // N/4, N/2, N
    std::vector<double> median_oscillation;       // per checkpoint
    bool schedule_accepted = false;
    LemmaVerdict verdict = LemmaVerdict::NotShrinking;
    std::string note;
};

// With `adversarial` false a rejected schedule is a ConfigError; with it true
// the run proceeds and the report is flagged.
TwoSeriesReport two_series_check(const StepSchedule& schedule, const AlphaSampler& alpha, std::size_t N,
                                 std::size_t replicas, std::uint64_t seed, bool adversarial = false);

// ---------------------------------------------------------------------------
// Asymptotic center surrogate and convergence

struct CenterEstimate {
    Point center;
    double radius = 0.0;  // max_i d^2(x_i, center)
};

// Approximate minimizer of x -> max_i d^2(x_i, x) over the window.
CenterEstimate estimate_asymptotic_center(const std::vector<Point>& window, const SpaceDescriptor& space);

struct ConvergenceVerdict {
    std::size_t replicas = 0;
    std::size_t converged = 0;
    double fraction = 0.0;
    double median_distance = 0.0;
    std::string note;
};

// Fraction of replicas whose final iterate lies within eps of the argmin set.
ConvergenceVerdict convergence_verdict(const ReplicaEnsemble& ens, const SpaceDescriptor& space,
                                       const std::vector<Point>& argmin, double eps);

// ---------------------------------------------------------------------------
// Report

struct CheckResult {
    std::string name;
    bool passed = false;
    double tolerance = 0.0;
    std::size_t samples = 0;
    std::map<std::string, double> metrics;
    std::string note;
};

struct DiagnosticsReport {
    std::vector<CheckResult> checks;

    bool all_passed() const;
    const CheckResult* find(const std::string& name) const;
    nlohmann::json to_json() const;
};

double median(std::vector<double> v);

} // namespace sppa
