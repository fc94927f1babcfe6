#pragma once

// Concrete Hadamard spaces: Euclidean space, the hyperboloid model of
// hyperbolic space, spiders (finitely many rays glued at a common origin) and
// l2-products of these. All operations are pure functions of their values.

#include "sppa/random.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sppa {

// Comparison tolerance shared by every geometry check.
inline constexpr double kGeometryTol = 1e-9;

enum class SpaceFamily { Euclidean, Hyperboloid, Spider, Product };

class SpaceDescriptor {
public:
    static SpaceDescriptor euclidean(int dim);
    static SpaceDescriptor hyperboloid(int dim);
    static SpaceDescriptor spider(int legs);
    static SpaceDescriptor product(std::vector<SpaceDescriptor> components);

    SpaceFamily family() const noexcept { return family_; }
    // Intrinsic dimension for Euclidean/Hyperboloid, 1 for spiders.
    int dim() const noexcept { return dim_; }
    int legs() const noexcept { return legs_; }
    const std::vector<SpaceDescriptor>& components() const noexcept { return components_; }

    // "euclidean:3", "hyperboloid:2", "spider:3", "product(euclidean:2,spider:3)"
    std::string to_string() const;
    static SpaceDescriptor parse(std::string_view text);

    friend bool operator==(const SpaceDescriptor&, const SpaceDescriptor&) = default;

private:
    SpaceDescriptor() = default;

    SpaceFamily family_ = SpaceFamily::Euclidean;
    int dim_ = 1;
    int legs_ = 1;
    std::vector<SpaceDescriptor> components_;
};

struct Point;

struct EuclideanPoint {
    std::vector<double> coords;
    friend bool operator==(const EuclideanPoint&, const EuclideanPoint&) = default;
};

// Coordinates (x0, x1, ..., xd) on the upper sheet <x,x>_M = -1, x0 >= 1.
struct HyperboloidPoint {
    std::vector<double> coords;
    friend bool operator==(const HyperboloidPoint&, const HyperboloidPoint&) = default;
};

// Legs are numbered 1..legs. The origin is stored as leg 0, radius 0.
struct SpiderPoint {
    int leg = 0;
    double radius = 0.0;
    friend bool operator==(const SpiderPoint&, const SpiderPoint&) = default;
};

struct ProductPoint {
    std::vector<Point> parts;
    friend bool operator==(const ProductPoint&, const ProductPoint&);
};

struct Point {
    std::variant<EuclideanPoint, HyperboloidPoint, SpiderPoint, ProductPoint> value;

    Point() = default;
    Point(EuclideanPoint p) : value(std::move(p)) {}
    Point(HyperboloidPoint p) : value(std::move(p)) {}
    Point(SpiderPoint p) : value(std::move(p)) {}
    Point(ProductPoint p) : value(std::move(p)) {}

    friend bool operator==(const Point&, const Point&) = default;
};

inline bool operator==(const ProductPoint& a, const ProductPoint& b) { return a.parts == b.parts; }

// Convenience constructors. spider_point canonicalizes the origin.
Point euclidean_point(std::vector<double> coords);
Point hyperboloid_point(std::vector<double> coords);
Point spider_point(int leg, double radius);
Point product_point(std::vector<Point> parts);

// Lift intrinsic coordinates v in R^dim to the sheet: (sqrt(1+|v|^2), v).
Point hyperboloid_from_spatial(const std::vector<double>& spatial);

// Minkowski bilinear form -a0*b0 + sum_{i>=1} ai*bi.
double minkowski(const std::vector<double>& a, const std::vector<double>& b);

// Throws TagMismatchError or InvalidPointError when `x` is not a valid point
// of `space`.
void validate(const SpaceDescriptor& space, const Point& x);
bool is_valid(const SpaceDescriptor& space, const Point& x) noexcept;

// Euclidean origin, (1,0,...,0) on the hyperboloid, the spider origin, or the
// tuple of component base points.
Point base_point(const SpaceDescriptor& space);

double distance(const SpaceDescriptor& space, const Point& x, const Point& y);

// Point at fraction t in [0,1] of the way from x to y along the unique
// geodesic. Throws DomainError for t outside [0,1].
Point geodesic(const SpaceDescriptor& space, const Point& x, const Point& y, double t);

// (1-t)d^2(a,x) + t d^2(b,x) - t(1-t)d^2(a,b) - d^2(geodesic(a,b,t), x).
// Nonnegative in every CAT(0) space, zero in Euclidean space.
double cn_residual(const SpaceDescriptor& space, const Point& x, const Point& a, const Point& b,
                   double t);

// Valid point at distance at most `scale` from base_point(space).
Point random_point(const SpaceDescriptor& space, Stream& stream, double scale);

// Text encoding: Euclidean and hyperboloid points are comma-separated reals,
// spider points are "leg,radius", product points join component encodings
// with ';'. Numbers are written with 17 significant digits.
std::string format_point(const SpaceDescriptor& space, const Point& x);
Point parse_point(const SpaceDescriptor& space, std::string_view text);

struct WeightedPoint {
    Point point;
    double weight = 1.0;
};

// As parse_point, but accepts one extra trailing number (after the last
// coordinate of the last component) which is read as a weight.
WeightedPoint parse_weighted_point(const SpaceDescriptor& space, std::string_view text);

// One point per line; blank lines and lines starting with '#' are skipped.
std::vector<WeightedPoint> read_point_file(const SpaceDescriptor& space, const std::string& path);

} // namespace sppa
