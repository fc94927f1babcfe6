#include "doctest.h"

#include "sppa/diagnostics.hpp"
#include "sppa/error.hpp"

#include <cmath>

using namespace sppa;

namespace {

const SpaceDescriptor E2 = SpaceDescriptor::euclidean(2);

RunConfig single_anchor(std::size_t N, const Point& a = euclidean_point({0, 0})) {
    RunConfig cfg;
    cfg.space = E2;
    cfg.integrand = std::make_shared<const Integrand>(
        Integrand::squared_distance(E2, EventSpace::anchors({a}, {1.0}), base_point(E2), 3.0));
    cfg.x0 = euclidean_point({2, 0});
    cfg.schedule = StepSchedule::power(1.0, 1.0, 1.0);
    cfg.iterations = N;
    cfg.reference = a;
    return cfg;
}

} // namespace

TEST_CASE("quasi-Fejer closed form for a single anchor") {
    const auto cfg = single_anchor(10);
    const Point z = euclidean_point({0, 0});
    CHECK(fejer_constant(*cfg.integrand, z) == doctest::Approx(8.0));
    CHECK(fejer_constant(*cfg.integrand, euclidean_point({1, 1})) == doctest::Approx(24.0));
    Stream s(1);
    for (std::size_t n : {0u, 3u, 50u}) {
        const double lambda = cfg.schedule.at(n);
        const Point x = euclidean_point({1.5, -0.5});
        const double d2 = 2.5;
        for (auto mode : {ExpectationMode::Exact, ExpectationMode::MonteCarlo}) {
            const auto row = check_quasi_fejer(cfg, x, z, n, 1000, s, mode);
            CHECK(row.lhs == doctest::Approx(d2 / ((1 + lambda) * (1 + lambda))).epsilon(1e-12));
            CHECK(row.dist_sq == doctest::Approx(d2));
            CHECK(row.pass);
        }
    }
    const auto at_min = check_quasi_fejer(cfg, z, z, 4, 1000, s);
    CHECK(at_min.lhs == 0.0);
    CHECK(at_min.rhs >= 0.0);
    CHECK(at_min.pass);
    CHECK(at_min.exact);

    CHECK_THROWS_AS(check_quasi_fejer(cfg, z, z, 0, 0, s, ExpectationMode::MonteCarlo), DomainError);
    CHECK_THROWS_AS(check_quasi_fejer(cfg, z, z, 0, 50, s, ExpectationMode::MonteCarlo), DomainError);

    RunConfig gen = cfg;
    gen.integrand = std::make_shared<const Integrand>(
        Integrand::squared_distance(E2, EventSpace::generated({E2, 1.0, 1.0, 1.0}), base_point(E2), 3.0));
    CHECK_THROWS_AS(check_quasi_fejer(gen, z, z, 0, 1000, s, ExpectationMode::Exact), ConfigError);
    CHECK(check_quasi_fejer(gen, euclidean_point({2, 0}), z, 5, 10000, s).pass);
}

TEST_CASE("summability and oscillation on the telescoping trace") {
    for (std::size_t N : {100u, 1000u}) {
        const auto t = run_sppa(single_anchor(N));
        const auto rep = summability_report(t, 0.0);
        const double expected = 2.0 / (N / 2 + 1.0) - 2.0 / (N + 1.0);
        CHECK(rep.tail_oscillation == doctest::Approx(expected).epsilon(1e-9));
        CHECK(rep.sup_dist == doctest::Approx(2.0));
        CHECK(rep.negative_increments == 0);
        // S_N = sum_n lambda_n * (1/2) (2/(n+1))^2
        double s = 0;
        for (std::size_t n = 0; n < N; ++n) s += 2.0 / std::pow(n + 1.0, 3);
        CHECK(rep.partial_sum == doctest::Approx(s).epsilon(1e-12));
    }
    auto cfg = single_anchor(50);
    cfg.x0 = euclidean_point({0, 0});
    const auto flat = summability_report(run_sppa(cfg), 0.0);
    CHECK(flat.partial_sum == 0.0);
    CHECK(flat.sup_dist == 0.0);
    CHECK(flat.tail_oscillation == 0.0);

    cfg.reference.reset();
    CHECK_THROWS_AS(summability_report(run_sppa(cfg), 0.0), ConfigError);
}

TEST_CASE("boundedness modulus") {
    const auto det = run_ensemble(single_anchor(20), 20);
    for (const auto& row : estimate_boundedness_modulus(det, {0.1, 0.5})) {
        CHECK(row.resolvable);
        CHECK(row.psi == doctest::Approx(2.0));
        CHECK(row.exceedances == 0);
    }
    CHECK_THROWS_AS(estimate_boundedness_modulus(run_ensemble(single_anchor(5), 5), {0.1}), ConfigError);
    CHECK_THROWS_AS(estimate_boundedness_modulus(det, {1.5}), DomainError);
    CHECK_FALSE(estimate_boundedness_modulus(det, {0.01})[0].resolvable);

    // Random ensemble: psi(0.5) is a median-type quantile and exceedances stay within the allowance.
    RunConfig cfg = single_anchor(500);
    cfg.integrand = std::make_shared<const Integrand>(Integrand::squared_distance(
        E2, EventSpace::anchors({euclidean_point({0, 0}), euclidean_point({2, 2}), euclidean_point({-1, 3})}, {1, 1, 1}),
        base_point(E2), 5.0));
    cfg.schedule = StepSchedule::power(1, 0.75);
    cfg.reference = euclidean_point({1.0 / 3, 5.0 / 3});
    const auto ens = run_ensemble(cfg, 50);
    const auto rows = estimate_boundedness_modulus(ens, {0.1, 0.5});
    CHECK(rows[0].exceedances <= 5);
    CHECK(rows[1].exceedances <= 25);
    CHECK(rows[0].psi >= rows[1].psi);
}

TEST_CASE("Lipschitz-sum simulator verdicts") {
    LipschitzSumConfig zero;
    zero.schedule = StepSchedule::power(1, 1);
    zero.alpha = AlphaSampler::constant(0.0);
    zero.beta = ConstantBeta{1.0};
    const auto deg = simulate_lipschitz_sum(zero, 4000, 5);
    CHECK(deg.verdict == LemmaVerdict::DegenerateConstant);
    CHECK(deg.median_tail_max == 1.0);

    LipschitzSumConfig decay;
    decay.schedule = StepSchedule::power(1, 1);
    decay.alpha = AlphaSampler::uniform(0, 2);
    decay.beta = PowerDecayBeta{1.0, 0.25};
    const auto conv = simulate_lipschitz_sum(decay, 40000, 20);
    CHECK(conv.verdict == LemmaVerdict::Converging);
    CHECK(conv.clip_events == 0);
    CHECK(conv.median_tail_max == doctest::Approx(std::pow(20001.0, -0.25)).epsilon(1e-12));

    LipschitzSumConfig saw;
    saw.schedule = StepSchedule::power(1, 0.75);
    saw.alpha = AlphaSampler::exponential(1.0);
    saw.beta = SawtoothBeta{1.0};
    saw.admissible = false;
    const auto adv = simulate_lipschitz_sum(saw, 20000, 10);
    CHECK(adv.verdict == LemmaVerdict::HypothesisViolated);
    CHECK(adv.clip_events == 0);

    decay.schedule = StepSchedule::power(1, 0.5);
    CHECK_THROWS_AS(simulate_lipschitz_sum(decay, 100, 2), ConfigError);
    decay.schedule = StepSchedule::power(1, 1);
    decay.beta = TraceBeta{0.0};
    CHECK_THROWS_AS(simulate_lipschitz_sum(decay, 100, 2), ConfigError);
}

TEST_CASE("two-series check") {
    const auto ok = two_series_check(StepSchedule::power(1, 1), AlphaSampler::uniform(0, 2), 40000, 50, 9);
    REQUIRE(ok.median_oscillation.size() == 3);
    CHECK(ok.median_oscillation.back() < ok.median_oscillation.front());
    CHECK(ok.verdict == LemmaVerdict::Converging);

    const auto adv = two_series_check(StepSchedule::power(1, 0.5), AlphaSampler::uniform(0, 2), 4000, 10, 9, true);
    CHECK(adv.verdict == LemmaVerdict::HypothesisViolated);
    CHECK_FALSE(adv.schedule_accepted);
    CHECK_THROWS_AS(two_series_check(StepSchedule::power(1, 0.5), AlphaSampler::uniform(0, 2), 4000, 10, 9),
                    ConfigError);
}

TEST_CASE("asymptotic centers of symmetric windows") {
    const auto c = estimate_asymptotic_center({euclidean_point({0, 0}), euclidean_point({2, 0})}, E2);
    CHECK(distance(E2, c.center, euclidean_point({1, 0})) <= 1e-6);
    CHECK(c.radius == doctest::Approx(1.0).epsilon(1e-6));

    const auto S = SpaceDescriptor::spider(3);
    const auto s = estimate_asymptotic_center({spider_point(1, 1), spider_point(2, 1), spider_point(3, 1)}, S);
    CHECK(distance(S, s.center, spider_point(0, 0)) <= 1e-6);
    CHECK(s.radius == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("convergence verdict and report") {
    const auto ens = run_ensemble(single_anchor(99), 4);
    const auto v = convergence_verdict(ens, E2, {euclidean_point({0, 0})}, 0.05);
    CHECK(v.fraction == 1.0);
    CHECK(v.median_distance == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(convergence_verdict(ens, E2, {euclidean_point({0, 0})}, 0.01).fraction == 0.0);
    CHECK_THROWS_AS(convergence_verdict(ens, E2, {}, 0.1), ConfigError);

    DiagnosticsReport rep;
    rep.checks.push_back({"a", true, 0.1, 10, {{"x", 1.0}}, ""});
    CHECK(rep.all_passed());
    rep.checks.push_back({"b", false, 0.1, 10, {}, "note"});
    CHECK_FALSE(rep.all_passed());
    CHECK(rep.find("b")->note == "note");
    CHECK(rep.find("c") == nullptr);
    CHECK(rep.to_json()["checks"][0]["metrics"]["x"] == 1.0);
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
}
