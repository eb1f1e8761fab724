#pragma once

#include <lsr/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace lsr {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double squared_norm(Point2 p) { return p.x * p.x + p.y * p.y; }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Ordered landmark coordinates of one face. At least five points, all finite.
class Shape {
public:
    static constexpr std::size_t min_landmarks = 5;

    Shape() = default;

    explicit Shape(std::vector<Point2> points) : points_(std::move(points))
    {
        if (points_.size() < min_landmarks) {
            throw InvalidShape("a shape needs at least 5 landmarks, got " + std::to_string(points_.size()));
        }
        for (const auto& p : points_) {
            if (!is_finite(p)) {
                throw InvalidShape("non-finite landmark coordinate");
            }
        }
    }

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Point2& operator[](std::size_t i) const { return points_[i]; }
    Point2& operator[](std::size_t i) { return points_[i]; }
    std::span<const Point2> points() const { return points_; }
    auto begin() const { return points_.begin(); }
    auto end() const { return points_.end(); }

    friend bool operator==(const Shape&, const Shape&) = default;

private:
    std::vector<Point2> points_;
};

/// Axis-aligned face box in pixels.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// p -> scale * R(rotation) * p + translation
struct SimilarityTransform {
    double scale = 1.0;
    double rotation = 0.0;
    Point2 translation{};

    static SimilarityTransform identity() { return {}; }

    Point2 apply(Point2 p) const
    {
        return linear(p) + translation;
    }

    /// Rotation and scale only; used for offsets and displacement vectors.
    Point2 linear(Point2 p) const
    {
        const double c = scale * std::cos(rotation);
        const double s = scale * std::sin(rotation);
        return {c * p.x - s * p.y, s * p.x + c * p.y};
    }

    SimilarityTransform inverse() const
    {
        SimilarityTransform inv;
        inv.scale = 1.0 / scale;
        inv.rotation = -rotation;
        const Point2 t = inv.linear(translation);
        inv.translation = {-t.x, -t.y};
        return inv;
    }

    /// (*this) after `first`: x -> this(first(x)).
    SimilarityTransform compose(const SimilarityTransform& first) const
    {
        SimilarityTransform out;
        out.scale = scale * first.scale;
        out.rotation = rotation + first.rotation;
        out.translation = apply(first.translation);
        return out;
    }
};

inline Shape apply_transform(const SimilarityTransform& t, const Shape& s)
{
    std::vector<Point2> out;
    out.reserve(s.size());
    for (const auto& p : s) {
        out.push_back(t.apply(p));
    }
    return Shape(std::move(out));
}

inline Point2 centroid(std::span<const Point2> pts)
{
    Point2 c{};
    for (const auto& p : pts) {
        c = c + p;
    }
    const double n = static_cast<double>(pts.size());
    return {c.x / n, c.y / n};
}

namespace detail {

// Coordinates relative to the centroid, computed through differences to the
// first point so that integer translations of the input give identical output.
inline std::vector<Point2> centered(std::span<const Point2> pts)
{
    std::vector<Point2> rel(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        rel[i] = pts[i] - pts[0];
    }
    const Point2 c = centroid(rel);
    for (auto& p : rel) {
        p = p - c;
    }
    return rel;
}

} // namespace detail

/// Root-mean-square distance of the points to their centroid.
inline double rms_radius(const Shape& s)
{
    const auto rel = detail::centered(s.points());
    double sum = 0.0;
    for (const auto& p : rel) {
        sum += squared_norm(p);
    }
    return std::sqrt(sum / static_cast<double>(rel.size()));
}

/// Least-squares similarity mapping `src` onto `ref`.
inline SimilarityTransform procrustes_align(const Shape& src, const Shape& ref)
{
    if (src.size() != ref.size()) {
        throw DimensionMismatch("procrustes_align: landmark counts differ");
    }
    const auto a = detail::centered(src.points());
    const auto b = detail::centered(ref.points());
    double ss = 0.0;
    double dot = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ss += squared_norm(a[i]);
        dot += a[i].x * b[i].x + a[i].y * b[i].y;
        cross += a[i].x * b[i].y - a[i].y * b[i].x;
    }
    if (!(ss > 0.0)) {
        throw DegenerateShape("source shape has zero spatial variance");
    }
    SimilarityTransform t;
    t.scale = std::hypot(dot, cross) / ss;
    t.rotation = std::atan2(cross, dot);
    if (!(t.scale > 0.0)) {
        throw DegenerateShape("reference shape has zero spatial variance");
    }
    const Point2 src_c = centroid(src.points());
    const Point2 ref_c = centroid(ref.points());
    t.translation = ref_c - t.linear(src_c);
    return t;
}

/// Centered at the origin with unit RMS radius; orientation untouched.
inline Shape normalize_shape(const Shape& s)
{
    auto rel = detail::centered(s.points());
    double sum = 0.0;
    for (const auto& p : rel) {
        sum += squared_norm(p);
    }
    const double r = std::sqrt(sum / static_cast<double>(rel.size()));
    if (!(r > 0.0)) {
        throw DegenerateShape("shape has zero spatial variance");
    }
    for (auto& p : rel) {
        p = (1.0 / r) * p;
    }
    return Shape(std::move(rel));
}

struct MeanShapeOptions {
    int iterations = 10;
    double tolerance = 1e-8;
};

/// Generalized Procrustes mean with unit RMS radius, centered at the origin.
///
/// Starts from the plain average of the normalized shapes (so the result does
/// not depend on input order) and then alternates aligning every shape to the
/// current mean and re-averaging. The orientation gauge is pinned to the
/// starting average.
inline Shape mean_shape(std::span<const Shape> shapes, MeanShapeOptions opts = {})
{
    if (shapes.empty()) {
        throw EmptyInput("mean_shape needs at least one shape");
    }
    const std::size_t n_pts = shapes.front().size();
    for (const auto& s : shapes) {
        if (s.size() != n_pts) {
            throw DimensionMismatch("mean_shape: landmark counts differ");
        }
    }

    auto average = [&](auto&& shape_at) {
        std::vector<Point2> acc(n_pts);
        for (std::size_t k = 0; k < shapes.size(); ++k) {
            const Shape s = shape_at(k);
            for (std::size_t i = 0; i < n_pts; ++i) {
                acc[i] = acc[i] + s[i];
            }
        }
        const double inv = 1.0 / static_cast<double>(shapes.size());
        for (auto& p : acc) {
            p = inv * p;
        }
        return Shape(std::move(acc));
    };

    const Shape gauge = normalize_shape(average([&](std::size_t k) { return normalize_shape(shapes[k]); }));
    Shape mean = gauge;
    for (int it = 0; it < opts.iterations; ++it) {
        Shape next = normalize_shape(average([&](std::size_t k) {
            return apply_transform(procrustes_align(shapes[k], mean), shapes[k]);
        }));
        // Re-pin the rotation to the gauge; scale stays at one and the centroid at zero.
        const auto g = procrustes_align(next, gauge);
        next = normalize_shape(apply_transform({1.0, g.rotation, {}}, next));
        double disp = 0.0;
        for (std::size_t i = 0; i < n_pts; ++i) {
            disp += norm(next[i] - mean[i]);
        }
        mean = std::move(next);
        if (disp / static_cast<double>(n_pts) < opts.tolerance) {
            break;
        }
    }
    return mean;
}

inline double shape_width(const Shape& s)
{
    auto [lo, hi] = std::minmax_element(s.begin(), s.end(), [](Point2 a, Point2 b) { return a.x < b.x; });
    return hi->x - lo->x;
}

/// Extent box of a shape grown by `margin` (fraction of the extent) on each side.
inline BoundingBox bounding_box(const Shape& s, double margin = 0.0)
{
    double x0 = s[0].x, x1 = s[0].x, y0 = s[0].y, y1 = s[0].y;
    for (const auto& p : s) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const double w = x1 - x0;
    const double h = y1 - y0;
    return {x0 - margin * w, y0 - margin * h, w * (1.0 + 2.0 * margin), h * (1.0 + 2.0 * margin)};
}

/// Places `templ` in `box` so that its extent box, grown by `margin`, has the
/// box's width and center. Inverse of `bounding_box(s, margin)` up to aspect.
inline Shape place_in_box(const Shape& templ, const BoundingBox& box, double margin)
{
    const BoundingBox own = bounding_box(templ, margin);
    const double s = box.w / own.w;
    const Point2 c_own = own.center();
    const Point2 c_box = box.center();
    std::vector<Point2> out;
    out.reserve(templ.size());
    for (const auto& p : templ) {
        out.push_back(c_box + s * (p - c_own));
    }
    return Shape(std::move(out));
}

/// Landmark groups whose centroids are the two pupils.
struct PupilPair {
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;

    static PupilPair single(std::size_t l, std::size_t r) { return {{l}, {r}}; }

    Point2 left_center(const Shape& s) const { return group_center(s, left); }
    Point2 right_center(const Shape& s) const { return group_center(s, right); }
    double distance(const Shape& s) const { return norm(left_center(s) - right_center(s)); }

    bool valid_for(std::size_t n_landmarks) const
    {
        auto ok = [&](const std::vector<std::size_t>& g) {
            return !g.empty() && std::all_of(g.begin(), g.end(), [&](std::size_t i) { return i < n_landmarks; });
        };
        return ok(left) && ok(right);
    }

    friend bool operator==(const PupilPair&, const PupilPair&) = default;

private:
    static Point2 group_center(const Shape& s, const std::vector<std::size_t>& idx)
    {
        Point2 c{};
        for (auto i : idx) {
            c = c + s[i];
        }
        return (1.0 / static_cast<double>(idx.size())) * c;
    }
};

} // namespace lsr
