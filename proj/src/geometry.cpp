#include "sppa/geometry.hpp"

#include "sppa/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sppa {

namespace {

std::string family_name(SpaceFamily f) {
    switch (f) {
    case SpaceFamily::Euclidean: return "euclidean";
    case SpaceFamily::Hyperboloid: return "hyperboloid";
    case SpaceFamily::Spider: return "spider";
    case SpaceFamily::Product: return "product";
    }
    return "?";
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_real(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw InvalidPointError("cannot parse number '" + std::string(s) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Minimal recursive-descent parser for descriptor strings.
struct DescriptorParser {
    std::string_view text;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("bad space descriptor '" + std::string(text) + "': " + what);
    }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    std::string word() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos]))) ++pos;
        return std::string(text.substr(start, pos - start));
    }

    int integer() {
        skip_ws();
        int v = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + text.size(), v);
        if (ec != std::errc()) fail("expected an integer");
        pos = static_cast<std::size_t>(ptr - text.data());
        return v;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    SpaceDescriptor descriptor() {
        const std::string name = word();
        if (name == "product") {
            if (!eat('(')) fail("expected '(' after product");
            std::vector<SpaceDescriptor> parts;
            do {
                parts.push_back(descriptor());
            } while (eat(','));
            if (!eat(')')) fail("expected ')'");
            return SpaceDescriptor::product(std::move(parts));
        }
        if (!eat(':')) fail("expected ':' after '" + name + "'");
        const int n = integer();
        try {
            if (name == "euclidean") return SpaceDescriptor::euclidean(n);
            if (name == "hyperboloid") return SpaceDescriptor::hyperboloid(n);
            if (name == "spider") return SpaceDescriptor::spider(n);
        } catch (const DomainError& e) {
            fail(e.what());
        }
        fail("unknown family '" + name + "'");
    }
};

template <class T>
const T& as(const SpaceDescriptor& space, const Point& x) {
    const T* p = std::get_if<T>(&x.value);
    if (p == nullptr)
        throw TagMismatchError("point does not belong to a " + space.to_string() + " space");
    return *p;
}

double sq(double v) { return v * v; }

// Sheet check with tolerance relative to coordinate magnitude; at unit scale
// this is the absolute 1e-9 bound.
bool on_sheet(const std::vector<double>& c) {
    if (c.empty() || !(c[0] >= 1.0 - kGeometryTol)) return false;
    for (double v : c)
        if (!std::isfinite(v)) return false;
    return std::abs(minkowski(c, c) + 1.0) <= kGeometryTol * std::max(1.0, c[0] * c[0]);
}

std::vector<double> renormalize(std::vector<double> c) {
    const double s = std::sqrt(std::max(-minkowski(c, c), 1e-300));
    for (double& v : c) v /= s;
    if (c[0] < 1.0) c[0] = 1.0;
    return c;
}

} // namespace

// ---------------------------------------------------------------------------
// SpaceDescriptor

SpaceDescriptor SpaceDescriptor::euclidean(int dim) {
    if (dim < 1) throw DomainError("euclidean dimension must be >= 1");
    SpaceDescriptor d;
    d.family_ = SpaceFamily::Euclidean;
    d.dim_ = dim;
    return d;
}

SpaceDescriptor SpaceDescriptor::hyperboloid(int dim) {
    if (dim < 1) throw DomainError("hyperboloid dimension must be >= 1");
    SpaceDescriptor d;
    d.family_ = SpaceFamily::Hyperboloid;
    d.dim_ = dim;
    return d;
}

SpaceDescriptor SpaceDescriptor::spider(int legs) {
    if (legs < 1) throw DomainError("spider needs at least one leg");
    SpaceDescriptor d;
    d.family_ = SpaceFamily::Spider;
    d.legs_ = legs;
    return d;
}

SpaceDescriptor SpaceDescriptor::product(std::vector<SpaceDescriptor> components) {
    if (components.size() < 2) throw DomainError("product needs at least two components");
    SpaceDescriptor d;
    d.family_ = SpaceFamily::Product;
    d.dim_ = 0;
    for (const auto& c : components) d.dim_ += c.dim_;
    d.components_ = std::move(components);
    return d;
}

std::string SpaceDescriptor::to_string() const {
    switch (family_) {
    case SpaceFamily::Euclidean:
    case SpaceFamily::Hyperboloid: return family_name(family_) + ":" + std::to_string(dim_);
    case SpaceFamily::Spider: return "spider:" + std::to_string(legs_);
    case SpaceFamily::Product: {
        std::string s = "product(";
        for (std::size_t i = 0; i < components_.size(); ++i) {
            if (i) s += ",";
            s += components_[i].to_string();
        }
        return s + ")";
    }
    }
    return "?";
}

SpaceDescriptor SpaceDescriptor::parse(std::string_view text) {
    DescriptorParser p{text};
    SpaceDescriptor d = p.descriptor();
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing characters");
    return d;
}

// ---------------------------------------------------------------------------
// Points

Point euclidean_point(std::vector<double> coords) { return EuclideanPoint{std::move(coords)}; }

Point hyperboloid_point(std::vector<double> coords) { return HyperboloidPoint{std::move(coords)}; }

Point spider_point(int leg, double radius) {
    if (radius == 0.0) return SpiderPoint{0, 0.0};
    return SpiderPoint{leg, radius};
}

Point product_point(std::vector<Point> parts) { return ProductPoint{std::move(parts)}; }

Point hyperboloid_from_spatial(const std::vector<double>& spatial) {
    std::vector<double> c(spatial.size() + 1);
    double s = 0.0;
    for (std::size_t i = 0; i < spatial.size(); ++i) {
        c[i + 1] = spatial[i];
        s += spatial[i] * spatial[i];
    }
    c[0] = std::sqrt(1.0 + s);
    return HyperboloidPoint{std::move(c)};
}

double minkowski(const std::vector<double>& a, const std::vector<double>& b) {
    double s = -a[0] * b[0];
    for (std::size_t i = 1; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void validate(const SpaceDescriptor& space, const Point& x) {
    switch (space.family()) {
    case SpaceFamily::Euclidean: {
        const auto& p = as<EuclideanPoint>(space, x);
        if (p.coords.size() != static_cast<std::size_t>(space.dim()))
            throw InvalidPointError("euclidean point has wrong dimension");
        for (double v : p.coords)
            if (!std::isfinite(v)) throw InvalidPointError("non-finite coordinate");
        return;
    }
    case SpaceFamily::Hyperboloid: {
        const auto& p = as<HyperboloidPoint>(space, x);
        if (p.coords.size() != static_cast<std::size_t>(space.dim()) + 1)
            throw InvalidPointError("hyperboloid point needs dim+1 coordinates");
        if (!on_sheet(p.coords)) throw InvalidPointError("hyperboloid point is off the upper sheet");
        return;
    }
    case SpaceFamily::Spider: {
        const auto& p = as<SpiderPoint>(space, x);
        if (!std::isfinite(p.radius) || p.radius < 0.0)
            throw InvalidPointError("spider radius must be finite and nonnegative");
        if (p.radius == 0.0 && p.leg != 0)
            throw InvalidPointError("spider origin must be stored on leg 0");
        if (p.radius > 0.0 && (p.leg < 1 || p.leg > space.legs()))
            throw InvalidPointError("spider leg index out of range");
        return;
    }
    case SpaceFamily::Product: {
        const auto& p = as<ProductPoint>(space, x);
        if (p.parts.size() != space.components().size())
            throw InvalidPointError("product point has wrong number of components");
        for (std::size_t i = 0; i < p.parts.size(); ++i) validate(space.components()[i], p.parts[i]);
        return;
    }
    }
}

bool is_valid(const SpaceDescriptor& space, const Point& x) noexcept {
    try {
        validate(space, x);
        return true;
    } catch (const Error&) {
        return false;
    }
}

Point base_point(const SpaceDescriptor& space) {
    switch (space.family()) {
    case SpaceFamily::Euclidean: return euclidean_point(std::vector<double>(space.dim(), 0.0));
    case SpaceFamily::Hyperboloid: {
        std::vector<double> c(space.dim() + 1, 0.0);
        c[0] = 1.0;
        return hyperboloid_point(std::move(c));
    }
    case SpaceFamily::Spider: return spider_point(0, 0.0);
    case SpaceFamily::Product: {
        std::vector<Point> parts;
        for (const auto& c : space.components()) parts.push_back(base_point(c));
        return product_point(std::move(parts));
    }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Metric and geodesics

double distance(const SpaceDescriptor& space, const Point& x, const Point& y) {
    validate(space, x);
    validate(space, y);
    switch (space.family()) {
    case SpaceFamily::Euclidean: {
        const auto& a = std::get<EuclideanPoint>(x.value).coords;
        const auto& b = std::get<EuclideanPoint>(y.value).coords;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += sq(a[i] - b[i]);
        return std::sqrt(s);
    }
    case SpaceFamily::Hyperboloid: {
        // arcosh(-<x,y>) rewritten as 2 asinh(|x-y|_M / 2), which stays accurate
        // for nearby points where arcosh loses half the digits.
        const auto& a = std::get<HyperboloidPoint>(x.value).coords;
        const auto& b = std::get<HyperboloidPoint>(y.value).coords;
        double s = -sq(a[0] - b[0]);
        for (std::size_t i = 1; i < a.size(); ++i) s += sq(a[i] - b[i]);
        return 2.0 * std::asinh(0.5 * std::sqrt(std::max(s, 0.0)));
    }
    case SpaceFamily::Spider: {
        const auto& a = std::get<SpiderPoint>(x.value);
        const auto& b = std::get<SpiderPoint>(y.value);
        if (a.leg == b.leg || a.leg == 0 || b.leg == 0) return std::abs(a.radius - b.radius);
        return a.radius + b.radius;
    }
    case SpaceFamily::Product: {
        const auto& a = std::get<ProductPoint>(x.value).parts;
        const auto& b = std::get<ProductPoint>(y.value).parts;
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += sq(distance(space.components()[i], a[i], b[i]));
        return std::sqrt(s);
    }
    }
    return 0.0;
}

Point geodesic(const SpaceDescriptor& space, const Point& x, const Point& y, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("geodesic parameter must lie in [0,1]");
    validate(space, x);
    validate(space, y);
    if (t == 0.0) return x;
    if (t == 1.0) return y;
    switch (space.family()) {
    case SpaceFamily::Euclidean: {
        const auto& a = std::get<EuclideanPoint>(x.value).coords;
        const auto& b = std::get<EuclideanPoint>(y.value).coords;
        std::vector<double> c(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + t * (b[i] - a[i]);
        return euclidean_point(std::move(c));
    }
    case SpaceFamily::Hyperboloid: {
        const auto& a = std::get<HyperboloidPoint>(x.value).coords;
        const auto& b = std::get<HyperboloidPoint>(y.value).coords;
        const double d = distance(space, x, y);
        if (d == 0.0) return x;
        // gamma(s) = cosh(s) a + sinh(s) u with u the unit tangent at a toward
        // b; expanded, this is the ratio form below.
        const double sd = std::sinh(d);
        const double wa = std::sinh((1.0 - t) * d) / sd;
        const double wb = std::sinh(t * d) / sd;
        std::vector<double> c(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) c[i] = wa * a[i] + wb * b[i];
        return hyperboloid_point(renormalize(std::move(c)));
    }
    case SpaceFamily::Spider: {
        const auto& a = std::get<SpiderPoint>(x.value);
        const auto& b = std::get<SpiderPoint>(y.value);
        if (a.leg == b.leg || a.leg == 0 || b.leg == 0) {
            const int leg = a.leg != 0 ? a.leg : b.leg;
            return spider_point(leg, (1.0 - t) * a.radius + t * b.radius);
        }
        const double travel = t * (a.radius + b.radius);
        if (travel < a.radius) return spider_point(a.leg, a.radius - travel);
        return spider_point(b.leg, travel - a.radius);
    }
    case SpaceFamily::Product: {
        const auto& a = std::get<ProductPoint>(x.value).parts;
        const auto& b = std::get<ProductPoint>(y.value).parts;
        std::vector<Point> parts;
        parts.reserve(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            parts.push_back(geodesic(space.components()[i], a[i], b[i], t));
        return product_point(std::move(parts));
    }
    }
    return x;
}

double cn_residual(const SpaceDescriptor& space, const Point& x, const Point& a, const Point& b,
                   double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("geodesic parameter must lie in [0,1]");
    if (t == 0.0) {
        validate(space, x);
        validate(space, a);
        validate(space, b);
        return 0.0;
    }
    const double dax = distance(space, a, x);
    const double dbx = distance(space, b, x);
    const double dab = distance(space, a, b);
    const double dmx = distance(space, geodesic(space, a, b, t), x);
    return (1.0 - t) * dax * dax + t * dbx * dbx - t * (1.0 - t) * dab * dab - dmx * dmx;
}

Point random_point(const SpaceDescriptor& space, Stream& stream, double scale) {
    if (!(scale > 0.0)) throw DomainError("random_point scale must be positive");
    switch (space.family()) {
    case SpaceFamily::Euclidean:
    case SpaceFamily::Hyperboloid: {
        const int n = space.dim();
        std::vector<double> dir(n);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& v : dir) {
                v = standard_normal(stream);
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        // Radius law r^(n-1) gives the uniform ball in Euclidean space; on the
        // hyperboloid the same radius is used as geodesic distance.
        const double r = scale * std::pow(uniform01(stream), 1.0 / n);
        if (space.family() == SpaceFamily::Euclidean) {
            for (double& v : dir) v = v / norm * r;
            return euclidean_point(std::move(dir));
        }
        std::vector<double> c(n + 1);
        c[0] = std::cosh(r);
        for (int i = 0; i < n; ++i) c[i + 1] = std::sinh(r) * dir[i] / norm;
        return hyperboloid_point(renormalize(std::move(c)));
    }
    case SpaceFamily::Spider: {
        const int leg = 1 + static_cast<int>(uniform01(stream) * space.legs());
        return spider_point(std::min(leg, space.legs()), scale * uniform01(stream));
    }
    case SpaceFamily::Product: {
        const double part_scale = scale / std::sqrt(static_cast<double>(space.components().size()));
        std::vector<Point> parts;
        for (const auto& c : space.components()) parts.push_back(random_point(c, stream, part_scale));
        return product_point(std::move(parts));
    }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Text encoding

std::string format_point(const SpaceDescriptor& space, const Point& x) {
    validate(space, x);
    std::string s;
    auto join = [&s](const std::vector<double>& c) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (i) s += ",";
            s += format_real(c[i]);
        }
    };
    switch (space.family()) {
    case SpaceFamily::Euclidean: join(std::get<EuclideanPoint>(x.value).coords); break;
    case SpaceFamily::Hyperboloid: join(std::get<HyperboloidPoint>(x.value).coords); break;
    case SpaceFamily::Spider: {
        const auto& p = std::get<SpiderPoint>(x.value);
        s = std::to_string(p.leg) + "," + format_real(p.radius);
        break;
    }
    case SpaceFamily::Product: {
        const auto& parts = std::get<ProductPoint>(x.value).parts;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i) s += ";";
            s += format_point(space.components()[i], parts[i]);
        }
        break;
    }
    }
    return s;
}

namespace {

// Leaf component encodings in product order.
void leaves(const SpaceDescriptor& space, std::vector<const SpaceDescriptor*>& out) {
    if (space.family() == SpaceFamily::Product) {
        for (const auto& c : space.components()) leaves(c, out);
    } else {
        out.push_back(&space);
    }
}

std::size_t leaf_width(const SpaceDescriptor& s) {
    switch (s.family()) {
    case SpaceFamily::Euclidean: return static_cast<std::size_t>(s.dim());
    case SpaceFamily::Hyperboloid: return static_cast<std::size_t>(s.dim()) + 1;
    default: return 2;
    }
}

Point parse_leaf(const SpaceDescriptor& space, const std::vector<std::string_view>& fields) {
    if (fields.size() != leaf_width(space))
        throw InvalidPointError("expected " + std::to_string(leaf_width(space)) + " values for " +
                                space.to_string() + ", got " + std::to_string(fields.size()));
    Point p;
    if (space.family() == SpaceFamily::Spider) {
        const double leg = parse_real(fields[0]);
        if (leg != std::floor(leg)) throw InvalidPointError("spider leg must be an integer");
        p = spider_point(static_cast<int>(leg), parse_real(fields[1]));
    } else {
        std::vector<double> c;
        for (auto f : fields) c.push_back(parse_real(f));
        p = space.family() == SpaceFamily::Euclidean ? euclidean_point(std::move(c))
                                                     : hyperboloid_point(std::move(c));
    }
    validate(space, p);
    return p;
}

Point assemble(const SpaceDescriptor& space, std::vector<Point>& leaf_points, std::size_t& next) {
    if (space.family() != SpaceFamily::Product) return std::move(leaf_points[next++]);
    std::vector<Point> parts;
    for (const auto& c : space.components()) parts.push_back(assemble(c, leaf_points, next));
    return product_point(std::move(parts));
}

WeightedPoint parse_impl(const SpaceDescriptor& space, std::string_view text, bool allow_weight) {
    std::vector<const SpaceDescriptor*> specs;
    leaves(space, specs);
    const auto chunks = split(trim(text), ';');
    if (chunks.size() != specs.size())
        throw InvalidPointError("expected " + std::to_string(specs.size()) + " ';'-separated components");
    WeightedPoint out;
    std::vector<Point> leaf_points;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        auto fields = split(chunks[i], ',');
        if (allow_weight && i + 1 == chunks.size() && fields.size() == leaf_width(*specs[i]) + 1) {
            out.weight = parse_real(fields.back());
            fields.pop_back();
            if (!(out.weight >= 0.0) || !std::isfinite(out.weight))
                throw InvalidPointError("weight must be finite and nonnegative");
        }
        leaf_points.push_back(parse_leaf(*specs[i], fields));
    }
    std::size_t next = 0;
    out.point = assemble(space, leaf_points, next);
    return out;
}

} // namespace

Point parse_point(const SpaceDescriptor& space, std::string_view text) {
    return parse_impl(space, text, false).point;
}

WeightedPoint parse_weighted_point(const SpaceDescriptor& space, std::string_view text) {
    return parse_impl(space, text, true);
}

std::vector<WeightedPoint> read_point_file(const SpaceDescriptor& space, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open point file '" + path + "'");
    std::vector<WeightedPoint> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        try {
            out.push_back(parse_weighted_point(space, t));
        } catch (const InvalidPointError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace sppa
