#include "doctest.h"

#include "sppa/error.hpp"
#include "sppa/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sppa;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("sppa_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig from_text(const std::string& text) {
    return parse_experiment_config(KeyValueConfig::parse(text, experiment_keys()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

const char* kFrechet = R"(
space = euclidean:2
integrand.anchors = 0,0 | 2,0 | 0,2 | 2,2,3
run.x0 = 5,-3
run.iterations = 4000
run.replicas = 20
run.seed = 7
run.reference = baseline
diagnostics.checks = step-bound,quasi-fejer,summability,modulus,convergence
diagnostics.states = 40
diagnostics.mc_samples = 1000
)";

} // namespace

TEST_CASE("key-value parsing is strict") {
    const std::set<std::string> keys{"a", "b.c"};
    const auto kv = KeyValueConfig::parse("# comment\n a = 1.5 \n\nb.c=hello world\n", keys);
    CHECK(kv.get_double("a", 0) == 1.5);
    CHECK(kv.get("b.c", "") == "hello world");
    CHECK(kv.get_uint("missing", 4) == 4);
    CHECK_THROWS_AS(KeyValueConfig::parse("z = 1", keys), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2", keys), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a 1", keys), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = x", keys).get_double("a", 0), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = -3", keys).get_uint("a", 0), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = maybe", keys).get_bool("a", false), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/file.conf", keys), ConfigError);
}

TEST_CASE("experiment configs are validated") {
    try {
        from_text("space = euclidean:1\nintegrand.anchors = 0\nschedule.p = 0.5\n");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("Robbins-Monro") != std::string::npos);
    }
    CHECK_THROWS_AS(from_text("space = euclidean:1\nintegrand.anchors = 0\nschedule.c = 0\n"), ConfigError);
    CHECK_THROWS_AS(from_text("space = euclidean:1\nintegrand.anchors = 0\nrun.mode = splitting\n"), ConfigError);
    CHECK_THROWS_AS(from_text("space = euclidean:1\nintegrand.anchors = 0,1,2\n"), ConfigError);
    CHECK_THROWS_AS(from_text("space = euclidean:1\n"), ConfigError);
    CHECK_THROWS_AS(from_text("space = euclidean:1\nintegrand.anchors = 0\ndiagnostics.checks = bogus\n"), ConfigError);
    CHECK_THROWS_AS(from_text("space = euclidean:1\nintegrand.anchors_file = missing.txt\n"), ConfigError);
    CHECK_THROWS_AS(from_text("space = spider:2\nintegrand.anchors = 3,1\n"), ConfigError);
    CHECK_THROWS_AS(from_text("space = euclidean:1\nintegrand.anchors = 0\nbaseline.kind = magic\n"), ConfigError);

    const auto cfg = from_text(kFrechet);
    CHECK(cfg.replicas == 20);
    CHECK(cfg.reference_from_baseline);
    CHECK(cfg.problem.anchors.size() == 4);
    CHECK(cfg.problem.anchors[3].weight == 3.0);
    // Default operating radius: max(anchor radius, d(x0, p)).
    CHECK(cfg.run.integrand->operating_radius() == doctest::Approx(std::sqrt(34.0)));
}

TEST_CASE("baselines") {
    const auto E2 = SpaceDescriptor::euclidean(2);
    const auto two = Integrand::squared_distance(
        E2, EventSpace::anchors({euclidean_point({0, 0}), euclidean_point({2, 0})}, {1, 1}), base_point(E2), 5.0);
    const auto b = compute_baseline(two);
    CHECK(b.method == BaselineMethod::ClosedForm);
    CHECK(b.argmin.front() == euclidean_point({1, 0}));
    CHECK(b.min_sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(b.min_F == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b.accuracy == 0.0);

    const auto dp = compute_baseline(two, BaselineMethod::DeterministicProximal);
    CHECK(distance(E2, dp.argmin.front(), euclidean_point({1, 0})) <= 1e-10);
    CHECK(dp.accuracy <= 1e-9);

    const auto S = SpaceDescriptor::spider(3);
    std::vector<Integrand> parts;
    for (int k = 1; k <= 3; ++k)
        parts.push_back(Integrand::distance(S, EventSpace::anchors({spider_point(k, 1.0)}, {1.0}), base_point(S)));
    const auto sb = compute_baseline(Integrand::finite_sum(parts));
    CHECK(sb.method == BaselineMethod::ExhaustiveSearch);
    CHECK(sb.argmin.front() == spider_point(0, 0));
    CHECK(sb.min_sum == doctest::Approx(3.0));
    CHECK(sb.min_F == doctest::Approx(1.0));

    // Two anchors on one leg and one elsewhere: the squared-distance minimizer
    // is the leg-1 point at radius (1 + 2 - 1)/3.
    const auto lopsided = Integrand::squared_distance(
        S, EventSpace::anchors({spider_point(1, 1), spider_point(1, 2), spider_point(2, 1)}, {1, 1, 1}), base_point(S), 3.0);
    const auto lb = compute_baseline(lopsided);
    CHECK(distance(S, lb.argmin.front(), spider_point(1, 2.0 / 3.0)) <= 1e-6);

    const auto single = Integrand::squared_distance(E2, EventSpace::anchors({euclidean_point({3, 4})}, {1}), base_point(E2), 6.0);
    const auto sg = compute_baseline(single);
    CHECK(sg.argmin.front() == euclidean_point({3, 4}));
    CHECK(sg.min_F == 0.0);
    CHECK(sg.min_sum == 0.0);

    // Hyperboloid: two anchors symmetric about the base point.
    const auto H = SpaceDescriptor::hyperboloid(2);
    const auto sym = Integrand::squared_distance(
        H, EventSpace::anchors({hyperboloid_from_spatial({1.2, 0.3}), hyperboloid_from_spatial({-1.2, -0.3})}, {1, 1}),
        base_point(H), 3.0);
    const auto hb = compute_baseline(sym);
    CHECK(hb.method == BaselineMethod::DeterministicProximal);
    CHECK(distance(H, hb.argmin.front(), base_point(H)) <= 1e-9);
    const double r = distance(H, base_point(H), hyperboloid_from_spatial({1.2, 0.3}));
    CHECK(hb.min_F == doctest::Approx(0.5 * r * r).epsilon(1e-12));

    // Three anchors: compare against the geodesic midpoint-free oracle of a
    // brute-force search over a fine grid in intrinsic coordinates.
    const std::vector<Point> tri{hyperboloid_from_spatial({1, 0}), hyperboloid_from_spatial({0, 1.5}),
                                 hyperboloid_from_spatial({-0.5, -0.5})};
    const auto tg = Integrand::squared_distance(H, EventSpace::anchors(tri, {1, 1, 1}), base_point(H), 3.0);
    const auto tb = compute_baseline(tg);
    double best = 1e300;
    for (int i = -300; i <= 300; ++i)
        for (int j = -300; j <= 300; ++j) {
            const Point y = hyperboloid_from_spatial({i * 0.005, j * 0.005});
            double f = 0;
            for (const auto& a : tri) f += std::pow(distance(H, y, a), 2) / 6.0;
            best = std::min(best, f);
        }
    CHECK(tb.min_F <= best + 1e-12);
    CHECK(tb.min_F >= best - 1e-4);

    const auto gen = Integrand::squared_distance(E2, EventSpace::generated({E2, 1.0, 1.0, 1.0}), base_point(E2), 2.0);
    CHECK_THROWS_AS(compute_baseline(gen), UnsupportedError);
    const auto P = SpaceDescriptor::product({E2, S});
    const auto prod = Integrand::squared_distance(P, EventSpace::anchors({base_point(P)}, {1}), base_point(P), 1.0);
    CHECK_THROWS_AS(compute_baseline(prod), UnsupportedError);
    CHECK_THROWS_AS(compute_baseline(two, BaselineMethod::ExhaustiveSearch), UnsupportedError);
}

TEST_CASE("minimal experiment") {
    const auto dir = scratch("minimal");
    auto cfg = from_text("space = euclidean:2\nintegrand.anchors = 1,2\nrun.iterations = 10\n");
    cfg.output_dir = dir.string();
    std::ostringstream log;
    const auto res = run_experiment(cfg, log);
    CHECK(res.exit_code == 0);
    CHECK(res.ensemble.runs.at(0).rows.size() == 11);
    std::ifstream in(dir / "trace.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 12);
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "report.json"));
}

TEST_CASE("full Euclidean pipeline, reproducibility and manifest replay") {
    const auto dir = scratch("frechet");
    auto cfg = from_text(kFrechet);
    cfg.output_dir = (dir / "a").string();
    std::ostringstream log;
    const auto res = run_experiment(cfg, log);
    CHECK(res.exit_code == 0);
    const auto* qf = res.report.find("quasi-fejer");
    REQUIRE(qf != nullptr);
    CHECK(qf->metrics.at("pass_rate") == 1.0);
    const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
    CHECK(report["baseline"]["method"] == "closed-form");
    CHECK(report["checks"][1]["metrics"].contains("pass_rate"));

    cfg.output_dir = (dir / "b").string();
    const auto again = run_experiment(cfg, log);
    CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
    CHECK(again.report.to_json() == res.report.to_json());

    const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    CHECK(manifest["artifact_version"] == kArtifactVersion);
    auto replay = config_from_manifest(manifest);
    replay.output_dir = (dir / "c").string();
    run_experiment(replay, log);
    CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "c" / "trace.csv"));
    CHECK_THROWS_AS(config_from_manifest(nlohmann::json::object()), ConfigError);
}

TEST_CASE("trace CSV round trip and trace-only diagnostics") {
    const auto dir = scratch("csv");
    auto cfg = from_text(
        "space = spider:3\nintegrand.family = distance\nintegrand.events = finite-sum\n"
        "integrand.anchors = 1,1 | 2,1 | 3,1\nrun.x0 = 1,0.5\nrun.mode = splitting\nrun.iterations = 300\n"
        "run.replicas = 20\nrun.reference = 0,0\n");
    cfg.output_dir = dir.string();
    std::ostringstream log;
    const auto res = run_experiment(cfg, log);
    const auto back = read_trace_csv((dir / "trace.csv").string());
    REQUIRE(back.runs.size() == 20);
    for (std::size_t r = 0; r < 20; ++r) {
        const auto& a = res.ensemble.runs[r].rows;
        const auto& b = back.runs[r].rows;
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].lambda == b[i].lambda);
            CHECK(a[i].event == b[i].event);
            CHECK(a[i].step_len == b[i].step_len);
            CHECK(*a[i].dist_ref == *b[i].dist_ref);
            CHECK(a[i].F_hat == b[i].F_hat);
        }
    }
    std::ostringstream again;
    write_trace_csv(again, back);
    CHECK(again.str() == slurp(dir / "trace.csv"));

    const auto rep = diagnose_traces(back, {"step-bound", "summability", "modulus"}, 1.0, DiagnosticsSettings{});
    CHECK(rep.find("step-bound")->passed);
    CHECK(rep.find("modulus")->passed);
    CHECK(rep.find("summability")->metrics.at("negative_increments") == 0.0);
    CHECK_THROWS_AS(diagnose_traces(back, {"summability"}, std::nullopt, DiagnosticsSettings{}), ConfigError);
    CHECK_THROWS_AS(diagnose_traces(back, {"quasi-fejer"}, 1.0, DiagnosticsSettings{}), ConfigError);

    std::ofstream(dir / "bad.csv") << "replica,n\n";
    CHECK_THROWS_AS(read_trace_csv((dir / "bad.csv").string()), ConfigError);
}

TEST_CASE("experiment-level configuration errors") {
    std::ostringstream log;
    auto cfg = from_text("space = euclidean:1\nintegrand.anchors = 0 | 1\ndiagnostics.checks = summability\n"
                         "baseline.kind = none\n");
    CHECK_THROWS_AS(run_experiment(cfg, log), ConfigError);
    cfg = from_text("space = euclidean:1\nintegrand.anchors = 0 | 1\ndiagnostics.checks = quasi-fejer\n");
    CHECK_THROWS_AS(run_experiment(cfg, log), ConfigError);
    cfg = from_text("space = euclidean:1\nintegrand.anchors = 0 | 1\nrun.reference = 0\ndiagnostics.checks = modulus\n");
    CHECK_THROWS_AS(run_experiment(cfg, log), ConfigError);
}

TEST_CASE("lemma simulations from config text") {
    bool passed = false;
    const auto ts = run_simulation(
        "two-series", KeyValueConfig::parse("schedule.p = 1\nsimulate.N = 8000\nsimulate.replicas = 20\n", simulation_keys()),
        passed);
    CHECK(passed);
    CHECK(ts["verdict"] == "converging");

    const auto adv = run_simulation(
        "two-series",
        KeyValueConfig::parse("schedule.p = 0.5\nsimulate.N = 4000\nsimulate.replicas = 10\nsimulate.adversarial = true\n",
                              simulation_keys()),
        passed);
    CHECK(passed);
    CHECK(adv["verdict"] == "hypothesis-violated");

    run_simulation("lipschitz-sum",
                   KeyValueConfig::parse("schedule.p = 0.75\nsimulate.beta = sawtooth:1\nsimulate.admissible = false\n"
                                         "simulate.N = 4000\nsimulate.replicas = 5\n",
                                         simulation_keys()),
                   passed);
    CHECK(passed);
    CHECK_THROWS_AS(run_simulation("lipschitz-sum", KeyValueConfig::parse("simulate.alpha = normal:1\n", simulation_keys()),
                                   passed),
                    ConfigError);
    CHECK_THROWS_AS(run_simulation("three-series", KeyValueConfig::parse("", simulation_keys()), passed), ConfigError);
}
