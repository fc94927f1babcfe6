#include "sppa/integrands.hpp"

#include "sppa/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sppa {

namespace {

constexpr double kProbabilityTol = 1e-12;

std::vector<double> normalized(std::vector<double> p, std::size_t expected) {
    if (p.empty()) p.assign(expected, 1.0);
    if (p.size() != expected) throw ConfigError("probability vector has the wrong length");
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("probabilities must be finite and nonnegative");
        s += v;
    }
    if (!(s > 0.0)) throw ConfigError("probabilities sum to zero");
    if (std::abs(s - 1.0) > kProbabilityTol)
        for (double& v : p) v /= s;
    return p;
}

} // namespace

// ---------------------------------------------------------------------------
// EventSpace

EventSpace::EventSpace(Kind k) : kind_(std::move(k)) { build_cdf(); }

EventSpace EventSpace::finite(std::vector<double> probabilities) {
    if (probabilities.empty()) throw ConfigError("finite event space must be nonempty");
    const std::size_t n = probabilities.size();
    return EventSpace(FiniteEvents{normalized(std::move(probabilities), n)});
}

EventSpace EventSpace::uniform(std::size_t n) {
    if (n == 0) throw ConfigError("finite event space must be nonempty");
    return EventSpace(FiniteEvents{std::vector<double>(n, 1.0 / static_cast<double>(n))});
}

EventSpace EventSpace::anchors(std::vector<Point> anchors, std::vector<double> probabilities,
                               std::vector<double> weights) {
    if (anchors.empty()) throw ConfigError("anchor list must be nonempty");
    const std::size_t n = anchors.size();
    if (weights.empty()) weights.assign(n, 1.0);
    if (weights.size() != n) throw ConfigError("anchor weights have the wrong length");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("anchor weights must be positive");
    return EventSpace(AnchorEvents{std::move(anchors), normalized(std::move(probabilities), n), std::move(weights)});
}

EventSpace EventSpace::generated(GeneratedEvents rule) {
    if (!(rule.spread > 0.0)) throw ConfigError("generator spread must be positive");
    if (!(rule.weight_lo > 0.0) || !(rule.weight_hi >= rule.weight_lo))
        throw ConfigError("generator weights need 0 < weight_lo <= weight_hi");
    return EventSpace(std::move(rule));
}

void EventSpace::build_cdf() {
    cdf_.clear();
    if (!is_finite()) return;
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        acc += probability(i);
        cdf_.push_back(acc);
    }
    cdf_.back() = 1.0;
}

bool EventSpace::is_uniform() const noexcept {
    if (!is_finite()) return false;
    const double p0 = probability(0);
    for (std::size_t i = 1; i < size(); ++i)
        if (std::abs(probability(i) - p0) > kProbabilityTol) return false;
    return true;
}

std::size_t EventSpace::size() const {
    if (const auto* f = std::get_if<FiniteEvents>(&kind_)) return f->probabilities.size();
    if (const auto* a = std::get_if<AnchorEvents>(&kind_)) return a->anchors.size();
    throw DomainError("generated event space has no finite size");
}

double EventSpace::probability(std::size_t i) const {
    if (const auto* f = std::get_if<FiniteEvents>(&kind_)) return f->probabilities.at(i);
    if (const auto* a = std::get_if<AnchorEvents>(&kind_)) return a->probabilities.at(i);
    throw DomainError("generated event space has no point masses");
}

Event EventSpace::event(std::size_t i) const {
    if (i >= size()) throw DomainError("unknown event index " + std::to_string(i));
    Event e;
    e.index = i;
    if (const auto* a = std::get_if<AnchorEvents>(&kind_)) e.weight = a->weights[i];
    return e;
}

Event EventSpace::sample(Stream& stream) const {
    if (const auto* g = std::get_if<GeneratedEvents>(&kind_)) {
        Event e;
        e.anchor = random_point(g->space, stream, g->spread);
        e.weight = g->weight_lo == g->weight_hi ? g->weight_lo : sppa::uniform(stream, g->weight_lo, g->weight_hi);
        return e;
    }
    if (cdf_.size() == 1) return event(0);
    const double u = uniform01(stream);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
    return event(i);
}

// ---------------------------------------------------------------------------
// Integrand

std::string to_string(IntegrandFamily f) {
    switch (f) {
    case IntegrandFamily::SquaredDistance: return "squared-distance";
    case IntegrandFamily::Distance: return "distance";
    case IntegrandFamily::FiniteSum: return "finite-sum";
    case IntegrandFamily::ExternalOracle: return "external";
    }
    return "?";
}

Integrand::Integrand(IntegrandFamily family, SpaceDescriptor space, EventSpace events, Point base)
    : family_(family), space_(std::move(space)), events_(std::move(events)), base_(std::move(base)) {
    validate(space_, base_);
}

namespace {

double anchor_radius_of(const SpaceDescriptor& space, const EventSpace& events, const Point& base) {
    if (const auto* a = std::get_if<AnchorEvents>(&events.kind())) {
        double r = 0.0;
        for (const auto& p : a->anchors) r = std::max(r, distance(space, p, base));
        return r;
    }
    if (const auto* g = std::get_if<GeneratedEvents>(&events.kind())) {
        if (!(g->space == space)) throw TagMismatchError("generator space differs from integrand space");
        return g->spread + distance(space, base_point(space), base);
    }
    throw ConfigError("distance-type integrands need anchor or generated events");
}

} // namespace

Integrand Integrand::squared_distance(SpaceDescriptor space, EventSpace events, Point base,
                                      double operating_radius) {
    if (!(operating_radius > 0.0)) throw ConfigError("operating radius must be positive");
    Integrand g(IntegrandFamily::SquaredDistance, std::move(space), std::move(events), std::move(base));
    g.operating_radius_ = operating_radius;
    g.anchor_radius_ = anchor_radius_of(g.space_, g.events_, g.base_);
    g.compute_growth_moments();
    return g;
}

Integrand Integrand::distance(SpaceDescriptor space, EventSpace events, Point base) {
    Integrand g(IntegrandFamily::Distance, std::move(space), std::move(events), std::move(base));
    g.anchor_radius_ = anchor_radius_of(g.space_, g.events_, g.base_);
    g.compute_growth_moments();
    return g;
}

Integrand Integrand::finite_sum(std::vector<Integrand> components, std::vector<double> probabilities) {
    if (components.empty()) throw ConfigError("finite sum needs at least one component");
    for (const auto& c : components) {
        if (!(c.space_ == components.front().space_)) throw TagMismatchError("finite sum components live in different spaces");
        if (!c.events_.is_finite() || c.events_.size() != 1)
            throw ConfigError("finite sum components must have a single-event space");
    }
    const std::size_t n = components.size();
    EventSpace events = probabilities.empty() ? EventSpace::uniform(n) : EventSpace::finite(std::move(probabilities));
    if (events.size() != n) throw ConfigError("finite sum probabilities have the wrong length");
    Integrand g(IntegrandFamily::FiniteSum, components.front().space_, std::move(events), components.front().base_);
    for (const auto& c : components) {
        if (!(c.base_ == g.base_)) throw ConfigError("finite sum components must share the base point");
        g.anchor_radius_ = std::max(g.anchor_radius_, c.anchor_radius_);
        g.operating_radius_ = std::min(g.operating_radius_, c.operating_radius_);
    }
    g.components_ = std::move(components);
    g.compute_growth_moments();
    return g;
}

Integrand Integrand::external(SpaceDescriptor space, EventSpace events, Point base, ExternalRules rules,
                              GateOptions gate) {
    if (!rules.eval || !rules.prox || !rules.growth) throw ConfigError("external integrand needs eval, prox and growth rules");
    Integrand g(IntegrandFamily::ExternalOracle, std::move(space), std::move(events), std::move(base));
    g.rules_ = std::move(rules);
    g.operating_radius_ = gate.radius;
    g.compute_growth_moments();

    Stream stream(gate.seed);
    for (std::size_t i = 0; i < gate.samples; ++i) {
        const Event e = g.sample(stream);
        const double lambda = std::exp(uniform(stream, std::log(1e-2), std::log(1e1)));
        const Point x = random_point(g.space_, stream, gate.radius);
        const Point y = random_point(g.space_, stream, gate.radius);
        const double res = prox_inequality_residual(g, lambda, e, x, y);
        if (!(res <= kIntegrandTol))
            throw ConfigError("external prox rule '" + g.rules_.name + "' fails the prox inequality (residual " +
                              std::to_string(res) + ")");
        const double gap = nonexpansiveness_gap(g, lambda, e, x, y);
        if (!(gap <= kIntegrandTol))
            throw ConfigError("external prox rule '" + g.rules_.name + "' is not nonexpansive (gap " +
                              std::to_string(gap) + ")");
    }
    return g;
}

void Integrand::compute_growth_moments() {
    if (events_.is_finite()) {
        mean_L_ = 0.0;
        mean_L_sq_ = 0.0;
        for (std::size_t i = 0; i < events_.size(); ++i) {
            const double p = events_.probability(i);
            const double l = growth(events_.event(i));
            mean_L_ += p * l;
            mean_L_sq_ += p * l * l;
        }
        return;
    }
    const auto& rule = std::get<GeneratedEvents>(events_.kind());
    if (family_ != IntegrandFamily::ExternalOracle) {
        // L(e) = c * w_e with w_e ~ U[lo, hi].
        const double c = family_ == IntegrandFamily::SquaredDistance ? 1.0 + anchor_radius_ + operating_radius_ : 1.0;
        const double lo = rule.weight_lo;
        const double hi = rule.weight_hi;
        mean_L_ = c * 0.5 * (lo + hi);
        mean_L_sq_ = c * c * (lo * lo + lo * hi + hi * hi) / 3.0;
        return;
    }
    // Monte Carlo with a fixed stream for user rules on continuous events.
    Stream stream(0x6d65616eULL);
    constexpr std::size_t n = 100000;
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = growth(sample(stream));
        s += l;
        s2 += l * l;
    }
    mean_L_ = s / n;
    mean_L_sq_ = s2 / n;
}

void Integrand::check_event(const Event& e) const {
    if (events_.is_finite() && e.index >= events_.size()) throw DomainError("unknown event index " + std::to_string(e.index));
    if (!events_.is_finite() && !e.anchor && family_ != IntegrandFamily::ExternalOracle)
        throw DomainError("generated event carries no anchor");
}

Point Integrand::anchor(const Event& e) const {
    check_event(e);
    if (e.anchor) return *e.anchor;
    if (const auto* a = std::get_if<AnchorEvents>(&events_.kind())) return a->anchors[e.index];
    if (family_ == IntegrandFamily::FiniteSum) {
        const auto& c = components_[e.index];
        return c.anchor(c.events_.event(0));
    }
    throw DomainError("integrand has no anchors");
}

double Integrand::weight(const Event& e) const {
    check_event(e);
    if (family_ == IntegrandFamily::FiniteSum) {
        const auto& c = components_[e.index];
        return c.weight(c.events_.event(0));
    }
    if (const auto* a = std::get_if<AnchorEvents>(&events_.kind())) return a->weights[e.index];
    return e.weight;
}

double Integrand::growth(const Event& e) const {
    switch (family_) {
    case IntegrandFamily::SquaredDistance: return weight(e) * (1.0 + anchor_radius_ + operating_radius_);
    case IntegrandFamily::Distance: return weight(e);
    case IntegrandFamily::FiniteSum: {
        check_event(e);
        const auto& c = components_[e.index];
        return c.growth(c.events_.event(0));
    }
    case IntegrandFamily::ExternalOracle: return rules_.growth(e);
    }
    return 0.0;
}

double Integrand::eval(const Event& e, const Point& x) const {
    switch (family_) {
    case IntegrandFamily::SquaredDistance: {
        const double d = sppa::distance(space_, x, anchor(e));
        return 0.5 * weight(e) * d * d;
    }
    case IntegrandFamily::Distance: return weight(e) * sppa::distance(space_, x, anchor(e));
    case IntegrandFamily::FiniteSum: {
        check_event(e);
        const auto& c = components_[e.index];
        return c.eval(c.events_.event(0), x);
    }
    case IntegrandFamily::ExternalOracle: validate(space_, x); return rules_.eval(e, x);
    }
    return 0.0;
}

Point Integrand::prox(double lambda, const Event& e, const Point& x) const {
    if (!(lambda > 0.0)) throw DomainError("prox needs lambda > 0");
    switch (family_) {
    case IntegrandFamily::SquaredDistance: {
        const double lw = lambda * weight(e);
        return geodesic(space_, x, anchor(e), lw / (1.0 + lw));
    }
    case IntegrandFamily::Distance: {
        const Point a = anchor(e);
        const double d = sppa::distance(space_, x, a);
        if (d == 0.0) return x;
        const double lw = lambda * weight(e);
        return lw >= d ? a : geodesic(space_, x, a, lw / d);
    }
    case IntegrandFamily::FiniteSum: {
        check_event(e);
        const auto& c = components_[e.index];
        return c.prox(lambda, c.events_.event(0), x);
    }
    case IntegrandFamily::ExternalOracle: {
        validate(space_, x);
        Point p = rules_.prox(lambda, e, x);
        validate(space_, p);
        return p;
    }
    }
    return x;
}

double Integrand::prox_objective(double lambda, const Event& e, const Point& x, const Point& y) const {
    const double d = sppa::distance(space_, x, y);
    return eval(e, y) + d * d / (2.0 * lambda);
}

// ---------------------------------------------------------------------------
// Checks and estimates

Estimate big_F(const Integrand& g, const Point& x, std::size_t samples, Stream& stream) {
    if (samples == 0) throw DomainError("big_F needs at least one sample");
    const auto& es = g.events();
    if (!es.is_finite()) return big_F_monte_carlo(g, x, samples, stream);
    double s = 0.0;
    for (std::size_t i = 0; i < es.size(); ++i) s += es.probability(i) * g.eval(es.event(i), x);
    return {s, 0.0};
}

Estimate big_F_monte_carlo(const Integrand& g, const Point& x, std::size_t samples, Stream& stream) {
    if (samples == 0) throw DomainError("big_F needs at least one sample");
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double v = g.eval(g.sample(stream), x);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double var = samples > 1 ? m2 / static_cast<double>(samples - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(samples))};
}

double growth_check(const Integrand& g, Stream& stream, std::size_t pairs, double radius) {
    if (!(radius > 0.0)) throw DomainError("growth_check radius must be positive");
    if (g.family() == IntegrandFamily::SquaredDistance && radius > g.operating_radius() * (1.0 + 1e-12))
        throw DomainError("growth_check radius exceeds the certified operating radius");
    const auto& space = g.space();
    const auto& p = g.base();
    // Points within `radius` of p: walk from p toward a random point.
    auto near_p = [&](void) {
        const Point q = random_point(space, stream, radius + distance(space, base_point(space), p));
        const double d = distance(space, p, q);
        const double r = radius * uniform01(stream);
        return d <= r || d == 0.0 ? q : geodesic(space, p, q, r / d);
    };
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pairs; ++i) {
        const Event e = g.sample(stream);
        const Point x = near_p();
        const Point y = near_p();
        const double dxy = distance(space, x, y);
        const double v = g.eval(e, x) - g.eval(e, y) - g.growth(e) * (1.0 + distance(space, x, p)) * dxy;
        worst = std::max(worst, v);
    }
    return worst;
}

double prox_inequality_residual(const Integrand& g, double lambda, const Event& e, const Point& x,
                                const Point& y) {
    if (!(lambda > 0.0)) throw DomainError("prox inequality needs lambda > 0");
    const auto& space = g.space();
    const Point p = g.prox(lambda, e, x);
    const double dxy = distance(space, x, y);
    const double dpy = distance(space, p, y);
    return g.eval(e, p) - g.eval(e, y) - (dxy * dxy - dpy * dpy) / (2.0 * lambda);
}

double nonexpansiveness_gap(const Integrand& g, double lambda, const Event& e, const Point& x,
                            const Point& y) {
    const auto& space = g.space();
    return distance(space, g.prox(lambda, e, x), g.prox(lambda, e, y)) - distance(space, x, y);
}

double prox_optimality_gap(const Integrand& g, double lambda, const Event& e, const Point& x,
                           Stream& stream, int directions) {
    const auto& space = g.space();
    const Point p = g.prox(lambda, e, x);
    const double best = g.prox_objective(lambda, e, x, p);
    const double scale = 1.0 + distance(space, p, base_point(space));
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < directions; ++k) {
        const Point q = random_point(space, stream, scale + 1.0);
        const double d = distance(space, p, q);
        if (d == 0.0) continue;
        for (double step : {1e-6, 1e-4, 1e-2, 1e-1}) {
            const Point moved = geodesic(space, p, q, std::min(1.0, step / d));
            worst = std::max(worst, best - g.prox_objective(lambda, e, x, moved));
        }
    }
    return worst;
}

double convexity_gap(const Integrand& g, const Event& e, const Point& x, const Point& y, double t) {
    return g.eval(e, geodesic(g.space(), x, y, t)) - (1.0 - t) * g.eval(e, x) - t * g.eval(e, y);
}

} // namespace sppa
