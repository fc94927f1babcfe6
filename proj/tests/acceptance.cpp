// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include "sppa/diagnostics.hpp"
#include "sppa/engine.hpp"
#include "sppa/error.hpp"
#include "sppa/geometry.hpp"
#include "sppa/harness.hpp"
#include "sppa/integrands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

using namespace sppa;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
        o.pass = false;
        o.detail += "; over the " + std::to_string(static_cast<int>(budget_s)) + " s budget";
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d: %s  %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::vector<SpaceDescriptor> model_spaces() {
    return {SpaceDescriptor::euclidean(3), SpaceDescriptor::hyperboloid(2), SpaceDescriptor::spider(3),
            SpaceDescriptor::product(
                {SpaceDescriptor::euclidean(2), SpaceDescriptor::hyperboloid(2), SpaceDescriptor::spider(3)})};
}

// ---------------------------------------------------------------------------

Outcome geometry_axioms() {
    double worst = 0.0, cn_min = 0.0, cn_euclid = 0.0;
    for (const auto& space : model_spaces()) {
        Stream rng(derive_seed(1001, static_cast<std::uint64_t>(space.family())));
        for (int i = 0; i < 10000; ++i) {
            const Point x = random_point(space, rng, 2.5);
            const Point y = random_point(space, rng, 2.5);
            const Point z = random_point(space, rng, 2.5);
            const double t = uniform01(rng);
            const double dxy = distance(space, x, y);
            const Point m = geodesic(space, x, y, t);
            worst = std::max({worst, distance(space, x, x), std::abs(dxy - distance(space, y, x)),
                              dxy - distance(space, x, z) - distance(space, z, y),
                              std::abs(distance(space, x, m) - t * dxy),
                              std::abs(distance(space, m, y) - (1 - t) * dxy)});
            const double cn = cn_residual(space, z, x, y, t);
            cn_min = std::min(cn_min, cn);
            if (space.family() == SpaceFamily::Euclidean) cn_euclid = std::max(cn_euclid, std::abs(cn));
        }
    }
    return {worst <= 1e-9 && cn_min >= -1e-9 && cn_euclid <= 1e-9,
            fmt("4 spaces x 1e4 triples: worst axiom/additivity error %.2e, min CN %.2e, max |CN| Euclidean %.2e",
                worst, cn_min, cn_euclid)};
}

Integrand external_squared(const SpaceDescriptor& E, const std::vector<Point>& anchors) {
    ExternalRules r;
    r.name = "squared-distance-rule";
    r.eval = [E, anchors](const Event& e, const Point& x) {
        const double d = distance(E, x, anchors[e.index]);
        return 0.5 * d * d;
    };
    r.prox = [E, anchors](double l, const Event& e, const Point& x) {
        return geodesic(E, x, anchors[e.index], l / (1 + l));
    };
    r.growth = [](const Event&) { return 1.0 * (1 + 1 + 3); };
    return Integrand::external(E, EventSpace::uniform(anchors.size()), base_point(E), r);
}

Outcome prox_correctness() {
    double res = -1e300, gap = -1e300, opt = -1e300;
    std::size_t combos = 0;
    for (const auto& space : model_spaces()) {
        Stream rng(derive_seed(2002, static_cast<std::uint64_t>(space.family())));
        std::vector<Point> anchors;
        for (int i = 0; i < 6; ++i) anchors.push_back(random_point(space, rng, 1.0));
        const std::vector<double> probs(6, 1.0), weights{0.5, 1, 1, 2, 3, 1.5};
        const auto ev = EventSpace::anchors(anchors, probs, weights);
        std::vector<Integrand> parts;
        for (int i = 0; i < 6; ++i) {
            auto one = EventSpace::anchors({anchors[i]}, {1.0}, {weights[i]});
            parts.push_back(i % 2 ? Integrand::distance(space, one, base_point(space))
                                  : Integrand::squared_distance(space, one, base_point(space), 3.0));
        }
        std::vector<Integrand> families{Integrand::squared_distance(space, ev, base_point(space), 3.0),
                                        Integrand::distance(space, ev, base_point(space)),
                                        Integrand::finite_sum(parts)};
        if (space.family() == SpaceFamily::Euclidean) families.push_back(external_squared(space, anchors));
        for (const auto& g : families) {
            ++combos;
            for (int i = 0; i < 10000; ++i) {
                const double lambda = std::exp(sppa::uniform(rng, std::log(1e-3), std::log(1e2)));
                const Event e = g.sample(rng);
                const Point x = random_point(space, rng, 3.0);
                const Point y = random_point(space, rng, 3.0);
                res = std::max(res, prox_inequality_residual(g, lambda, e, x, y));
                gap = std::max(gap, nonexpansiveness_gap(g, lambda, e, x, y));
                opt = std::max(opt, prox_optimality_gap(g, lambda, e, x, rng));
            }
        }
    }
    return {res <= 1e-9 && gap <= 1e-9 && opt <= 1e-8,
            fmt("%.0f family x space combos x 1e4 tuples: max residual %.2e, max nonexpansiveness gap %.2e, "
                "max optimality gap %.2e",
                double(combos), res, gap, opt)};
}

Outcome telescoping() {
    const auto E = SpaceDescriptor::euclidean(2);
    RunConfig cfg;
    cfg.space = E;
    cfg.integrand = std::make_shared<const Integrand>(
        Integrand::squared_distance(E, EventSpace::anchors({euclidean_point({0, 0})}, {1.0}), base_point(E), 2.0));
    cfg.x0 = euclidean_point({2, 0});
    cfg.schedule = StepSchedule::power(1, 1, 1);
    cfg.iterations = 1000;
    const auto t = run_sppa(cfg);
    const double d = distance(E, t.final_iterate, euclidean_point({0, 0}));
    const double err = std::abs(d - 2.0 / 1001.0);
    return {err <= 1e-10, fmt("d(x_1000, a) = %.17g, oracle 2/1001, error %.2e", d, err)};
}

Outcome schedules() {
    struct Row {
        double c, p;
        bool expect;
    };
    const Row table[] = {{1, 1, true}, {1, 0.75, true}, {1, 0.5, false}, {1, 1.2, false},
                         {0.1, 0, false}, {1, 0, false}, {5, 0, false}};
    int agree = 0;
    for (const auto& r : table)
        if (validate_schedule(StepSchedule::power(r.c, r.p)).accepted == r.expect) ++agree;
    const int n = static_cast<int>(std::size(table));
    return {agree == n, fmt("%.0f/%.0f verdicts match (p=1, 0.75 accepted; p=0.5, 1.2 and constants rejected)",
                            double(agree), double(n))};
}

// ---------------------------------------------------------------------------
// Euclidean Frechet mean: dimension 5, 100 anchors in the unit ball.

struct FrechetSetup {
    ExperimentConfig cfg;
    std::vector<double> oracle_mean;
    ExperimentResult result;
    double eps = 0.0;
    double min_F = 0.0;
    std::string calibration;
    bool calibrated = false;
};

FrechetSetup& frechet() {
    static FrechetSetup s = [] {
        FrechetSetup f;
        const auto E5 = SpaceDescriptor::euclidean(5);
        Stream rng(20240501);
        f.oracle_mean.assign(5, 0.0);
        auto& pb = f.cfg.problem;
        pb.space = E5;
        pb.family = IntegrandFamily::SquaredDistance;
        pb.events = "anchors";
        for (int i = 0; i < 100; ++i) {
            const Point a = random_point(E5, rng, 1.0);
            const auto& c = std::get<EuclideanPoint>(a.value).coords;
            for (int k = 0; k < 5; ++k) f.oracle_mean[k] += c[k] / 100.0;
            pb.anchors.push_back({a, 1.0});
        }
        auto& run = f.cfg.run;
        run.space = E5;
        run.x0 = euclidean_point({0.9, -0.9, 0.9, -0.9, 0.9});
        run.schedule = StepSchedule::power(1, 0.75, 1);
        run.iterations = 100000;
        run.seed = 5;
        run.trace_stride = 500;
        run.integrand = build_integrand(pb, run.x0);
        run.reference = euclidean_point(f.oracle_mean);
        f.cfg.replicas = 50;
        f.cfg.baseline = "closed-form";
        f.cfg.diagnostics.checks = {"step-bound", "summability", "tail-oscillation", "modulus", "lipschitz-sum"};
        f.cfg.diagnostics.levels = {0.1};

        // Calibration oracle: deterministic proximal run on F, independent of
        // the closed form, fixes min F and the radius before any stochastic run.
        const auto dp = compute_baseline(*run.integrand, BaselineMethod::DeterministicProximal);
        const double dp_err = distance(E5, dp.argmin.front(), euclidean_point(f.oracle_mean));
        f.min_F = dp.min_F;
        f.eps = calibrated_radius(run.schedule, run.iterations, f.min_F);
        f.calibrated = dp_err <= 1e-9;
        f.calibration = fmt("calibration: deterministic-proximal argmin within %.1e of the mean, min F %.6f, eps %.4f",
                            dp_err, f.min_F, f.eps);

        std::ostringstream log;
        f.result = run_experiment(f.cfg, log);
        return f;
    }();
    return s;
}

Outcome frechet_mean() {
    auto& f = frechet();
    const auto E5 = f.cfg.problem.space;
    const Point mean = euclidean_point(f.oracle_mean);
    std::vector<double> d;
    std::size_t violations = 0;
    for (std::size_t r = 0; r < 20; ++r) {
        const auto& run = f.result.ensemble.runs[r];
        d.push_back(distance(E5, run.final_iterate, mean));
        violations += run.step_bound_violations();
    }
    const double med = median(d);
    const bool closed_ok = f.result.baseline &&
                           distance(E5, f.result.baseline->argmin.front(), mean) <= 1e-12;
    return {f.calibrated && closed_ok && med <= f.eps && violations == 0,
            fmt("R=20, N=1e5: median d(x_N, mean) %.4e <= eps %.4e; step-bound violations %.0f; ", med, f.eps,
                double(violations)) +
                f.calibration};
}

Outcome spider_splitting() {
    const auto S = SpaceDescriptor::spider(3);
    std::vector<Integrand> parts;
    for (int k = 1; k <= 3; ++k)
        parts.push_back(Integrand::distance(S, EventSpace::anchors({spider_point(k, 1.0)}, {1.0}), base_point(S)));
    RunConfig cfg;
    cfg.space = S;
    cfg.integrand = std::make_shared<const Integrand>(Integrand::finite_sum(parts));
    cfg.x0 = spider_point(2, 0.75);
    cfg.schedule = StepSchedule::power(1, 0.75);
    cfg.iterations = 10000;
    cfg.seed = 6;
    const auto b = compute_baseline(*cfg.integrand, BaselineMethod::ExhaustiveSearch);
    const auto ens = run_ensemble(cfg, 20, 0, true);
    const auto v = convergence_verdict(ens, S, b.argmin, 1e-2);
    return {v.fraction >= 0.9 && b.argmin.front() == spider_point(0, 0),
            fmt("exhaustive-search argmin = origin, min of the sum %.6f; fraction within 1e-2 = %.2f "
                "(median distance %.2e)",
                b.min_sum, v.fraction, v.median_distance)};
}

Outcome quasi_fejer() {
    auto& f = frechet();
    const auto& run0 = f.result.ensemble.runs[0];
    const Point z = *f.cfg.run.reference;
    std::vector<std::pair<std::size_t, Point>> states;
    for (std::size_t i = 0; i < 200; ++i) states.push_back(run0.iterates[i * (run0.iterates.size() - 1) / 200]);
    std::size_t mc_pass = 0, exact_pass = 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        Stream s(derive_seed(7007, i + 1));
        const auto mc = check_quasi_fejer(f.cfg.run, states[i].second, z, states[i].first, 10000, s,
                                          ExpectationMode::MonteCarlo);
        const auto ex = check_quasi_fejer(f.cfg.run, states[i].second, z, states[i].first, 10000, s,
                                          ExpectationMode::Exact);
        mc_pass += mc.pass;
        exact_pass += ex.pass;
    }
    // A continuous event space on the hyperboloid, Monte Carlo only.
    const auto H = SpaceDescriptor::hyperboloid(2);
    RunConfig h;
    h.space = H;
    h.integrand = std::make_shared<const Integrand>(
        Integrand::squared_distance(H, EventSpace::generated({H, 1.0, 0.5, 1.5}), base_point(H), 2.0));
    Stream init(31);
    h.x0 = random_point(H, init, 2.0);
    h.iterations = 2000;
    h.trace_stride = 10;
    h.big_F_samples = 50;
    h.seed = 31;
    const auto ht = run_sppa(h);
    const Point zh = base_point(H);
    std::size_t h_pass = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        Stream s(derive_seed(8008, i + 1));
        const auto& [n, x] = ht.iterates[i];
        h_pass += check_quasi_fejer(h, x, zh, n, 10000, s).pass;
    }
    const double rate = mc_pass / 200.0, h_rate = h_pass / 200.0;
    return {rate >= 0.99 && h_rate >= 0.99 && exact_pass == 200,
            fmt("Monte Carlo M=1e4: Euclidean %.3f, hyperbolic generated events %.3f; exact mode %.0f/200", rate,
                h_rate, double(exact_pass))};
}

Outcome lipschitz_sum() {
    LipschitzSumConfig decay;
    decay.schedule = StepSchedule::power(1, 1);
    decay.alpha = AlphaSampler::uniform(0, 2);
    decay.beta = PowerDecayBeta{1.0, 0.25};
    decay.seed = 81;
    const auto a = simulate_lipschitz_sum(decay, 40000, 50);

    auto& f = frechet();
    const auto* tr = f.result.report.find("lipschitz-sum");
    const double trace_fraction = tr ? tr->metrics.at("shrinking_fraction") : 0.0;
    const bool trace_ok = tr && tr->passed;

    LipschitzSumConfig saw;
    saw.schedule = StepSchedule::power(1, 0.75);
    saw.alpha = AlphaSampler::exponential(1.0);
    saw.beta = SawtoothBeta{1.0};
    saw.admissible = false;
    saw.seed = 82;
    const auto adv = simulate_lipschitz_sum(saw, 40000, 50);
    double adv_sum = 0.0;
    for (const auto& r : adv.replicas) adv_sum += r.weighted_sum;

    return {a.verdict == LemmaVerdict::Converging && trace_ok && adv.verdict == LemmaVerdict::HypothesisViolated,
            fmt("power-decay beta: shrinking in %.2f of 50; trace-derived beta: %.2f of 50; "
                "adversarial sawtooth (mean sum lambda beta %.1f): ",
                a.shrinking_fraction, trace_fraction, adv_sum / 50.0) +
                to_string(adv.verdict)};
}

Outcome two_series() {
    const auto ok = two_series_check(StepSchedule::power(1, 1), AlphaSampler::uniform(0, 2), 40000, 50, 91);
    const auto adv =
        two_series_check(StepSchedule::power(1, 0.5), AlphaSampler::uniform(0, 2), 40000, 50, 92, true);
    const bool shrinks = ok.median_oscillation.back() < ok.median_oscillation.front();
    return {shrinks && adv.verdict == LemmaVerdict::HypothesisViolated,
            fmt("median tail oscillation %.3e at N=1e4 -> %.3e at N=4e4; adversarial p=0.5: ",
                ok.median_oscillation.front(), ok.median_oscillation.back()) +
                to_string(adv.verdict)};
}

Outcome summability_boundedness() {
    auto& f = frechet();
    const auto& rep = f.result.report;
    const auto* s = rep.find("summability");
    const auto* m = rep.find("modulus");
    const auto* o = rep.find("tail-oscillation");
    if (!s || !m || !o) return {false, "missing report entries"};
    const double exceed = m->metrics.at("level_0.1_exceedances");
    return {s->passed && m->passed && exceed <= 5 && o->passed,
            fmt("|S_N - S_N/2| = %.2e vs 3 SE = %.2e; psi(0.1) exceedances %.0f/50; ", s->metrics.at("difference"),
                s->tolerance, exceed) +
                fmt("tail oscillation decreasing in %.2f of replicas", o->metrics.at("fraction_decreasing"))};
}

} // namespace

int main() {
    criterion(1, 30, geometry_axioms);
    criterion(2, 60, prox_correctness);
    criterion(3, 1, telescoping);
    criterion(4, 1, schedules);
    criterion(5, 180, frechet_mean);  // includes the R=50 ensemble reused by 7, 8 and 10
    criterion(6, 60, spider_splitting);
    criterion(7, 120, quasi_fejer);
    criterion(8, 120, lipschitz_sum);
    criterion(9, 60, two_series);
    criterion(10, 1, summability_boundedness);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
