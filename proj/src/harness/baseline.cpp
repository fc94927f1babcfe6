#include "sppa/error.hpp"
#include "sppa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sppa {

namespace {

// f(e, .) = mass * phi(d(., anchor)), phi(d) = d^2/2 or d; mass = mu(e) w_e.
struct Atom {
    Point anchor;
    double mass = 0.0;
    double weight = 0.0;  // w_e alone, for the unnormalized total
};

struct Flattened {
    IntegrandFamily family = IntegrandFamily::SquaredDistance;
    std::vector<Atom> atoms;
};

Flattened flatten(const Integrand& g) {
    Flattened out;
    if (g.family() == IntegrandFamily::FiniteSum) {
        const auto& parts = g.components();
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const auto& c = parts[k];
            if (c.family() != IntegrandFamily::SquaredDistance && c.family() != IntegrandFamily::Distance)
                throw UnsupportedError("baseline: finite-sum component of family " + to_string(c.family()));
            if (k == 0) out.family = c.family();
            if (c.family() != out.family) throw UnsupportedError("baseline: finite sum mixes integrand families");
            const Event e = c.events().event(0);
            out.atoms.push_back({c.anchor(e), g.events().probability(k) * c.weight(e), c.weight(e)});
        }
        return out;
    }
    if (g.family() != IntegrandFamily::SquaredDistance && g.family() != IntegrandFamily::Distance)
        throw UnsupportedError("baseline: integrand family " + to_string(g.family()) + " has no built-in oracle");
    if (!g.events().is_finite()) throw UnsupportedError("baseline: continuous event spaces have no built-in oracle");
    out.family = g.family();
    for (std::size_t i = 0; i < g.events().size(); ++i) {
        const Event e = g.events().event(i);
        out.atoms.push_back({g.anchor(e), g.events().probability(i) * g.weight(e), g.weight(e)});
    }
    return out;
}

double phi(IntegrandFamily f, double d) { return f == IntegrandFamily::SquaredDistance ? 0.5 * d * d : d; }

double objective(const SpaceDescriptor& space, const Flattened& fl, const Point& x) {
    double s = 0.0;
    for (const auto& a : fl.atoms) s += a.mass * phi(fl.family, distance(space, x, a.anchor));
    return s;
}

double sum_objective(const SpaceDescriptor& space, const Flattened& fl, const Point& x) {
    double s = 0.0;
    for (const auto& a : fl.atoms) s += a.weight * phi(fl.family, distance(space, x, a.anchor));
    return s;
}

BaselineResult finish(const SpaceDescriptor& space, const Flattened& fl, Point x, BaselineMethod m, double acc,
                      std::size_t iters) {
    BaselineResult r;
    r.min_F = objective(space, fl, x);
    r.min_sum = sum_objective(space, fl, x);
    r.argmin.push_back(std::move(x));
    r.method = m;
    r.accuracy = acc;
    r.iterations = iters;
    return r;
}

BaselineResult closed_form(const SpaceDescriptor& space, const Flattened& fl) {
    if (space.family() != SpaceFamily::Euclidean || fl.family != IntegrandFamily::SquaredDistance)
        throw UnsupportedError("baseline: closed form needs squared distance on a Euclidean space");
    std::vector<double> m(static_cast<std::size_t>(space.dim()), 0.0);
    double total = 0.0;
    for (const auto& a : fl.atoms) {
        const auto& c = std::get<EuclideanPoint>(a.anchor.value).coords;
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += a.mass * c[i];
        total += a.mass;
    }
    for (auto& v : m) v /= total;
    return finish(space, fl, euclidean_point(std::move(m)), BaselineMethod::ClosedForm, 0.0, 0);
}

// F restricted to a leg is convex in the radius, so a grid followed by
// repeated zooming around the best node finds the per-leg minimum.
BaselineResult exhaustive_search(const SpaceDescriptor& space, const Flattened& fl) {
    if (space.family() != SpaceFamily::Spider) throw UnsupportedError("baseline: exhaustive search needs a spider");
    double rmax = 0.0;
    for (const auto& a : fl.atoms) rmax = std::max(rmax, std::get<SpiderPoint>(a.anchor.value).radius);
    Point best = spider_point(0, 0.0);
    double best_v = objective(space, fl, best);
    std::size_t evals = 1;
    if (rmax > 0.0) {
        constexpr int kGrid = 1000;
        constexpr int kZoom = 20;
        for (int leg = 1; leg <= space.legs(); ++leg) {
            auto at = [&](double r) {
                ++evals;
                return objective(space, fl, spider_point(leg, r));
            };
            double lo = 0.0;
            double hi = rmax;
            int nodes = kGrid;
            double r_best = 0.0;
            double v_best = at(0.0);
            while (hi - lo > 1e-9) {
                const double h = (hi - lo) / nodes;
                for (int i = 0; i <= nodes; ++i) {
                    const double r = std::min(rmax, lo + i * h);
                    const double v = at(r);
                    if (v < v_best) {
                        v_best = v;
                        r_best = r;
                    }
                }
                lo = std::max(0.0, r_best - h);
                hi = std::min(rmax, r_best + h);
                nodes = kZoom;
            }
            if (v_best < best_v) {
                best_v = v_best;
                best = spider_point(leg, r_best);
            }
        }
    }
    return finish(space, fl, best, BaselineMethod::ExhaustiveSearch, 1e-6, evals);
}

// Tangent-space maps used by the weighted Karcher-mean solve.
std::vector<double> log_map(const SpaceDescriptor& space, const Point& x, const Point& y) {
    if (space.family() == SpaceFamily::Euclidean) {
        const auto& a = std::get<EuclideanPoint>(x.value).coords;
        const auto& b = std::get<EuclideanPoint>(y.value).coords;
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) v[i] = b[i] - a[i];
        return v;
    }
    const auto& a = std::get<HyperboloidPoint>(x.value).coords;
    const auto& b = std::get<HyperboloidPoint>(y.value).coords;
    const double d = distance(space, x, y);
    std::vector<double> u(a.size());
    const double ip = minkowski(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) u[i] = b[i] + ip * a[i];
    const double nu = std::sqrt(std::max(0.0, minkowski(u, u)));
    if (d == 0.0 || nu == 0.0) return std::vector<double>(a.size(), 0.0);
    for (auto& c : u) c *= d / nu;
    return u;
}

Point exp_map(const SpaceDescriptor& space, const Point& x, const std::vector<double>& v) {
    if (space.family() == SpaceFamily::Euclidean) {
        auto c = std::get<EuclideanPoint>(x.value).coords;
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += v[i];
        return euclidean_point(std::move(c));
    }
    const auto& a = std::get<HyperboloidPoint>(x.value).coords;
    const double nv = std::sqrt(std::max(0.0, minkowski(v, v)));
    if (nv == 0.0) return x;
    std::vector<double> spatial(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i) spatial[i - 1] = std::cosh(nv) * a[i] + std::sinh(nv) / nv * v[i];
    return hyperboloid_from_spatial(spatial);
}

double tangent_norm(const SpaceDescriptor& space, const std::vector<double>& v) {
    if (space.family() == SpaceFamily::Euclidean) {
        double s = 0.0;
        for (double c : v) s += c * c;
        return std::sqrt(s);
    }
    return std::sqrt(std::max(0.0, minkowski(v, v)));
}

// argmin_y sum_j omega_j d^2(y, b_j) by the Karcher fixed-point iteration.
Point karcher(const SpaceDescriptor& space, const std::vector<Point>& pts, const std::vector<double>& omega,
              Point y) {
    double total = 0.0;
    for (double w : omega) total += w;
    for (int it = 0; it < 10000; ++it) {
        std::vector<double> g;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const auto l = log_map(space, y, pts[j]);
            if (g.empty()) g.assign(l.size(), 0.0);
            for (std::size_t i = 0; i < l.size(); ++i) g[i] += omega[j] / total * l[i];
        }
        y = exp_map(space, y, g);
        if (tangent_norm(space, g) < 1e-15) break;
    }
    return y;
}

// Full proximal iteration x_{k+1} = prox_{lambda_k F}(x_k), lambda_k = c/(k+1).
// F is m-strongly convex with m = total mass, so d(x_{k+1}, argmin) is at
// most d(x_{k+1}, x_k) / (lambda_k m).
BaselineResult deterministic_proximal(const SpaceDescriptor& space, const Flattened& fl) {
    if ((space.family() != SpaceFamily::Euclidean && space.family() != SpaceFamily::Hyperboloid) ||
        fl.family != IntegrandFamily::SquaredDistance)
        throw UnsupportedError("baseline: deterministic proximal run needs squared distance on a Euclidean or "
                               "hyperbolic space");
    double m = 0.0;
    for (const auto& a : fl.atoms) m += a.mass;
    const double c = 1e3 / m;
    std::vector<Point> pts;
    std::vector<double> omega;
    for (const auto& a : fl.atoms) {
        pts.push_back(a.anchor);
        omega.push_back(a.mass);
    }
    pts.push_back(Point{});
    omega.push_back(0.0);

    Point x = fl.atoms.front().anchor;
    double accuracy = std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    for (; k < 100000; ++k) {
        const double lambda = c / static_cast<double>(k + 1);
        pts.back() = x;
        omega.back() = 1.0 / lambda;
        Point next = karcher(space, pts, omega, x);
        const double step = distance(space, next, x);
        x = std::move(next);
        if (step < 1e-10) {
            accuracy = std::max(1e-10, step / (lambda * m));
            ++k;
            break;
        }
    }
    return finish(space, fl, x, BaselineMethod::DeterministicProximal, accuracy, k);
}

} // namespace

std::string to_string(BaselineMethod m) {
    switch (m) {
    case BaselineMethod::ClosedForm: return "closed-form";
    case BaselineMethod::ExhaustiveSearch: return "exhaustive-search";
    case BaselineMethod::DeterministicProximal: return "deterministic-proximal";
    }
    return "unknown";
}

BaselineMethod parse_baseline_method(const std::string& s) {
    if (s == "closed-form") return BaselineMethod::ClosedForm;
    if (s == "exhaustive-search") return BaselineMethod::ExhaustiveSearch;
    if (s == "deterministic-proximal") return BaselineMethod::DeterministicProximal;
    throw ConfigError("unknown baseline method '" + s + "'");
}

BaselineResult compute_baseline(const Integrand& g, std::optional<BaselineMethod> method) {
    const Flattened fl = flatten(g);
    if (fl.atoms.empty()) throw UnsupportedError("baseline: integrand has no anchors");
    const auto& space = g.space();
    if (!method) {
        switch (space.family()) {
        case SpaceFamily::Euclidean:
            method = fl.family == IntegrandFamily::SquaredDistance ? BaselineMethod::ClosedForm
                                                                   : BaselineMethod::DeterministicProximal;
            break;
        case SpaceFamily::Spider: method = BaselineMethod::ExhaustiveSearch; break;
        case SpaceFamily::Hyperboloid: method = BaselineMethod::DeterministicProximal; break;
        case SpaceFamily::Product: throw UnsupportedError("baseline: product spaces have no built-in oracle");
        }
    }
    switch (*method) {
    case BaselineMethod::ClosedForm: return closed_form(space, fl);
    case BaselineMethod::ExhaustiveSearch: return exhaustive_search(space, fl);
    case BaselineMethod::DeterministicProximal: return deterministic_proximal(space, fl);
    }
    throw UnsupportedError("baseline: unknown method");
}

} // namespace sppa
