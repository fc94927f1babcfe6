#pragma once

// Convex integrands f(e, x) over a Hadamard space together with the event
// distribution mu, the growth data L(e) of the condition
//
//     f(e,x) - f(e,y) <= L(e) (1 + d(x,p)) d(x,y),
//
// and exact proximal maps prox_lambda(e, x) = argmin_y f(e,y) + d^2(x,y)/(2 lambda).

#include "sppa/geometry.hpp"
#include "sppa/random.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sppa {

// Tolerance for sampled inequality checks on integrands.
inline constexpr double kIntegrandTol = 1e-9;

// A realized event. Finite kinds identify the event by `index`; generated
// events carry their own anchor.
struct Event {
    std::size_t index = 0;
    double weight = 1.0;
    std::optional<Point> anchor;
};

// Abstract finite event set {0..N-1} with probabilities (used by FiniteSum).
struct FiniteEvents {
    std::vector<double> probabilities;
};

// Finite list of anchors a_e with sampling probabilities and objective
// weights w_e.
struct AnchorEvents {
    std::vector<Point> anchors;
    std::vector<double> probabilities;
    std::vector<double> weights;
};

// Continuous rule: anchor drawn by random_point(space, ., spread) around the
// space's base point, weight uniform on [weight_lo, weight_hi].
struct GeneratedEvents {
    SpaceDescriptor space;
    double spread = 1.0;
    double weight_lo = 1.0;
    double weight_hi = 1.0;
};

class EventSpace {
public:
    using Kind = std::variant<FiniteEvents, AnchorEvents, GeneratedEvents>;

    static EventSpace finite(std::vector<double> probabilities);
    static EventSpace uniform(std::size_t n);
    // Empty `weights` means w_e = 1 for every anchor. Probabilities are
    // normalized if they sum to a positive value other than 1.
    static EventSpace anchors(std::vector<Point> anchors, std::vector<double> probabilities,
                              std::vector<double> weights = {});
    static EventSpace generated(GeneratedEvents rule);

    const Kind& kind() const noexcept { return kind_; }
    bool is_finite() const noexcept { return !std::holds_alternative<GeneratedEvents>(kind_); }
    bool is_uniform() const noexcept;

    // Finite kinds only.
    std::size_t size() const;
    double probability(std::size_t i) const;
    Event event(std::size_t i) const;

    // Independent draw from mu; deterministic given the stream state.
    Event sample(Stream& stream) const;

private:
    explicit EventSpace(Kind k);
    void build_cdf();

    Kind kind_;
    std::vector<double> cdf_;
};

enum class IntegrandFamily { SquaredDistance, Distance, FiniteSum, ExternalOracle };

std::string to_string(IntegrandFamily f);

// User-supplied rules for ExternalOracle integrands.
struct ExternalRules {
    std::string name = "external";
    std::function<double(const Event&, const Point&)> eval;
    std::function<Point(double, const Event&, const Point&)> prox;
    std::function<double(const Event&)> growth;
};

// Sampling effort of the registration gate for external prox rules.
struct GateOptions {
    std::size_t samples = 2000;
    double radius = 2.0;
    std::uint64_t seed = 0x5eed;
};

class Integrand {
public:
    // f(e,x) = (w_e/2) d^2(x, a_e). L(e) = w_e (1 + R_a + R) where R_a bounds
    // d(a_e, p) and R = operating_radius; the growth bound is certified for
    // y within R of p.
    static Integrand squared_distance(SpaceDescriptor space, EventSpace events, Point base,
                                      double operating_radius);
    // f(e,x) = w_e d(x, a_e), L(e) = w_e globally.
    static Integrand distance(SpaceDescriptor space, EventSpace events, Point base);
    // f(k,x) = f_k(x); every component must have a single-event space. Empty
    // probabilities means uniform.
    static Integrand finite_sum(std::vector<Integrand> components, std::vector<double> probabilities = {});
    // Registration runs the prox-inequality and nonexpansiveness gate and
    // throws ConfigError if the supplied prox rule fails it.
    static Integrand external(SpaceDescriptor space, EventSpace events, Point base, ExternalRules rules,
                              GateOptions gate = {});

    IntegrandFamily family() const noexcept { return family_; }
    const SpaceDescriptor& space() const noexcept { return space_; }
    const EventSpace& events() const noexcept { return events_; }
    const Point& base() const noexcept { return base_; }
    double operating_radius() const noexcept { return operating_radius_; }
    double anchor_radius() const noexcept { return anchor_radius_; }
    const std::vector<Integrand>& components() const noexcept { return components_; }

    // Integral of L and of L^2 against mu.
    double mean_L() const noexcept { return mean_L_; }
    double mean_L_sq() const noexcept { return mean_L_sq_; }

    // Anchor a_e and weight w_e of built-in families.
    Point anchor(const Event& e) const;
    double weight(const Event& e) const;

    double growth(const Event& e) const;
    double eval(const Event& e, const Point& x) const;
    Point prox(double lambda, const Event& e, const Point& x) const;
    Event sample(Stream& stream) const { return events_.sample(stream); }

    // f(e,y) + d^2(x,y) / (2 lambda)
    double prox_objective(double lambda, const Event& e, const Point& x, const Point& y) const;

private:
    Integrand(IntegrandFamily family, SpaceDescriptor space, EventSpace events, Point base);
    void compute_growth_moments();
    void check_event(const Event& e) const;

    IntegrandFamily family_;
    SpaceDescriptor space_;
    EventSpace events_;
    Point base_;
    double operating_radius_ = std::numeric_limits<double>::infinity();
    double anchor_radius_ = 0.0;
    double mean_L_ = 0.0;
    double mean_L_sq_ = 0.0;
    std::vector<Integrand> components_;
    ExternalRules rules_;
};

struct Estimate {
    double value = 0.0;
    double standard_error = 0.0;
};

// F(x) = integral of f(e,x) dmu(e). Exact (standard error 0) for finite event
// spaces, Monte Carlo over `samples` fresh events otherwise.
Estimate big_F(const Integrand& g, const Point& x, std::size_t samples, Stream& stream);
// Monte Carlo estimate regardless of the event space kind.
Estimate big_F_monte_carlo(const Integrand& g, const Point& x, std::size_t samples, Stream& stream);

// max over sampled (e, x, y) with x, y within `radius` of p of
//     f(e,x) - f(e,y) - L(e)(1 + d(x,p)) d(x,y).
double growth_check(const Integrand& g, Stream& stream, std::size_t pairs, double radius);

// f(e, prox) - f(e, y) - [d^2(x,y) - d^2(prox,y)] / (2 lambda); <= 0 for a
// correct prox rule.
double prox_inequality_residual(const Integrand& g, double lambda, const Event& e, const Point& x,
                                const Point& y);

// d(prox(x), prox(y)) - d(x, y); <= 0 for a nonexpansive prox rule.
double nonexpansiveness_gap(const Integrand& g, double lambda, const Event& e, const Point& x,
                            const Point& y);

// Largest decrease of the prox objective found by moving the returned prox
// point along geodesics toward `directions` random points, at each of a few
// step fractions. Zero or negative means no descent direction was found.
double prox_optimality_gap(const Integrand& g, double lambda, const Event& e, const Point& x,
                           Stream& stream, int directions = 20);

// f(e, geodesic(x,y,t)) - (1-t) f(e,x) - t f(e,y); <= 0 for convex f(e,.).
double convexity_gap(const Integrand& g, const Event& e, const Point& x, const Point& y, double t);

} // namespace sppa
