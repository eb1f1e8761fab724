#pragma once

#include <lsr/error.hpp>
#include <lsr/geometry.hpp>
#include <lsr/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsr {

// ---------------------------------------------------------------------------
// Plane projective invariants of 5 and 6 points

/// Determinant of the homogeneous points (a, 1), (b, 1), (c, 1).
inline double det3(Point2 a, Point2 b, Point2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

/// |det| below this, on centered unit-RMS points, counts as collinear.
inline constexpr double collinearity_threshold = 1e-9;

namespace detail {

inline std::vector<Point2> normalized_points(std::span<const Point2> pts)
{
    auto c = centered(pts);
    double ss = 0.0;
    for (const auto& p : c) {
        ss += squared_norm(p);
    }
    const double r = std::sqrt(ss / static_cast<double>(c.size()));
    if (!(r > 0.0)) {
        throw DegenerateConfiguration("all points coincide");
    }
    for (auto& p : c) {
        p = (1.0 / r) * p;
    }
    return c;
}

inline double checked_det(const std::vector<Point2>& p, int a, int b, int c)
{
    const double d = std::abs(det3(p[static_cast<std::size_t>(a)], p[static_cast<std::size_t>(b)],
                                   p[static_cast<std::size_t>(c)]));
    if (d < collinearity_threshold) {
        throw DegenerateConfiguration("points " + std::to_string(a + 1) + "," + std::to_string(b + 1) + "," +
                                      std::to_string(c + 1) + " are collinear");
    }
    return d;
}

} // namespace detail

/// k = 5: |m124||m135| / (|m125||m134|).
/// k = 6: |m123||m456| / (|m124||m356|).
/// m_abc is the determinant of homogeneous points a, b, c (1-based).
inline double projective_invariant(std::span<const Point2> points)
{
    if (points.size() != 5 && points.size() != 6) {
        throw InvalidConfig("projective_invariant needs 5 or 6 points");
    }
    const auto p = detail::normalized_points(points);
    auto m = [&](int a, int b, int c) { return detail::checked_det(p, a - 1, b - 1, c - 1); };
    if (p.size() == 5) {
        return (m(1, 2, 4) * m(1, 3, 5)) / (m(1, 2, 5) * m(1, 3, 4));
    }
    return (m(1, 2, 3) * m(4, 5, 6)) / (m(1, 2, 4) * m(3, 5, 6));
}

inline double projective_invariant(const Shape& s, std::span<const std::size_t> indices)
{
    std::vector<Point2> pts;
    pts.reserve(indices.size());
    for (auto i : indices) {
        if (i >= s.size()) {
            throw DimensionMismatch("combination index out of range");
        }
        pts.push_back(s[i]);
    }
    return projective_invariant(pts);
}

// ---------------------------------------------------------------------------
// Combination discovery and scoring

struct IntrinsicRange {
    double c_min = 0.0;
    double c_max = 0.0;
    double mean = 0.0;
    double std = 0.0;

    friend bool operator==(const IntrinsicRange&, const IntrinsicRange&) = default;
};

struct LandmarkCombination {
    std::vector<std::size_t> indices;
    IntrinsicRange range;

    double relative_std() const { return range.std / std::abs(range.mean); }
    friend bool operator==(const LandmarkCombination&, const LandmarkCombination&) = default;
};

struct GeometryModel {
    std::vector<std::size_t> subset;
    std::vector<LandmarkCombination> combinations;
    /// Relative slack on both range ends, absorbing rounding on zero-width ranges.
    double range_tolerance = 1e-9;

    std::size_t size() const { return combinations.size(); }
    friend bool operator==(const GeometryModel&, const GeometryModel&) = default;
};

struct DiscoveryConfig {
    double rel_std_threshold = 0.05;
    std::size_t max_combinations = 256;
    std::size_t min_shapes = 10;
};

/// All k-subsets of `items` (ascending), in lexicographic order.
inline std::vector<std::vector<std::size_t>> k_subsets(const std::vector<std::size_t>& items, std::size_t k)
{
    std::vector<std::vector<std::size_t>> out;
    if (k > items.size()) {
        return out;
    }
    std::vector<std::size_t> pos(k);
    for (std::size_t i = 0; i < k; ++i) {
        pos[i] = i;
    }
    while (true) {
        std::vector<std::size_t> combo(k);
        for (std::size_t i = 0; i < k; ++i) {
            combo[i] = items[pos[i]];
        }
        out.push_back(std::move(combo));
        std::size_t i = k;
        while (i > 0 && pos[i - 1] == items.size() - k + (i - 1)) {
            --i;
        }
        if (i == 0) {
            break;
        }
        ++pos[i - 1];
        for (std::size_t j = i; j < k; ++j) {
            pos[j] = pos[j - 1] + 1;
        }
    }
    return out;
}

/// Intrinsic statistics of one combination over the shapes, or nothing when
/// any evaluation is degenerate.
inline std::optional<IntrinsicRange> intrinsic_range(std::span<const Shape> shapes, std::span<const std::size_t> indices)
{
    std::vector<double> values;
    values.reserve(shapes.size());
    try {
        for (const auto& s : shapes) {
            values.push_back(projective_invariant(s, indices));
        }
    } catch (const DegenerateConfiguration&) {
        return std::nullopt;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    IntrinsicRange r;
    r.mean = mean;
    r.std = sd;
    r.c_min = std::max(mean - 3.0 * sd, *lo);
    r.c_max = std::min(mean + 3.0 * sd, *hi);
    return r;
}

/// Keeps 5- and 6-point combinations of `subset` whose invariant has relative
/// std <= threshold over the shapes; the lowest relative std first, ties in
/// lexicographic index order, truncated to max_combinations.
inline GeometryModel discover_combinations(std::span<const Shape> shapes, std::vector<std::size_t> subset,
                                           const DiscoveryConfig& cfg = {})
{
    if (shapes.size() < cfg.min_shapes) {
        throw InvalidConfig("discover_combinations needs at least " + std::to_string(cfg.min_shapes) + " shapes");
    }
    if (!(cfg.rel_std_threshold >= 0.0) || cfg.max_combinations < 1) {
        throw InvalidConfig("rel_std_threshold must be >= 0 and max_combinations >= 1");
    }
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    if (subset.size() < 5) {
        throw InvalidConfig("stable subset needs at least 5 distinct landmarks");
    }
    const std::size_t n_landmarks = shapes.front().size();
    for (const auto& s : shapes) {
        if (s.size() != n_landmarks) {
            throw DimensionMismatch("shapes have different landmark counts");
        }
    }
    if (subset.back() >= n_landmarks) {
        throw DimensionMismatch("stable subset index out of range");
    }

    auto candidates = k_subsets(subset, 5);
    for (auto& c : k_subsets(subset, 6)) {
        candidates.push_back(std::move(c));
    }
    std::vector<std::optional<IntrinsicRange>> ranges(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) { ranges[i] = intrinsic_range(shapes, candidates[i]); });

    GeometryModel model;
    model.subset = subset;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!ranges[i] || !std::isfinite(ranges[i]->mean) || ranges[i]->mean == 0.0) {
            continue;
        }
        LandmarkCombination c{std::move(candidates[i]), *ranges[i]};
        if (c.relative_std() <= cfg.rel_std_threshold) {
            model.combinations.push_back(std::move(c));
        }
    }
    if (model.combinations.empty()) {
        throw NoStableCombination("no combination has relative std <= " + std::to_string(cfg.rel_std_threshold));
    }
    std::stable_sort(model.combinations.begin(), model.combinations.end(),
                     [](const LandmarkCombination& a, const LandmarkCombination& b) {
                         const double ra = a.relative_std();
                         const double rb = b.relative_std();
                         if (ra != rb) {
                             return ra < rb;
                         }
                         return a.indices < b.indices;
                     });
    if (model.combinations.size() > cfg.max_combinations) {
        model.combinations.resize(cfg.max_combinations);
    }
    return model;
}

/// 1 if the shape's invariant for `c` lies in its intrinsic range; degenerate
/// evaluations are out of range.
inline bool combination_in_range(const Shape& s, const LandmarkCombination& c, double tolerance)
{
    double v = 0.0;
    try {
        v = projective_invariant(s, c.indices);
    } catch (const DegenerateConfiguration&) {
        return false;
    }
    const double slack = tolerance * std::abs(c.range.mean);
    return v >= c.range.c_min - slack && v <= c.range.c_max + slack;
}

/// g = (#combinations in range) / C.
inline double geometry_score(const Shape& s, const GeometryModel& model)
{
    if (model.combinations.empty()) {
        throw EmptyInput("geometry model has no combinations");
    }
    std::size_t in = 0;
    for (const auto& c : model.combinations) {
        if (combination_in_range(s, c, model.range_tolerance)) {
            ++in;
        }
    }
    return static_cast<double>(in) / static_cast<double>(model.combinations.size());
}

/// Tab-separated table: indices, mean, std, c_min, c_max.
inline std::string format_geometry_table(const GeometryModel& model)
{
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string out = "indices\tmean\tstd\tc_min\tc_max\n";
    for (const auto& c : model.combinations) {
        std::string idx;
        for (std::size_t i = 0; i < c.indices.size(); ++i) {
            idx += (i ? "," : "") + std::to_string(c.indices[i]);
        }
        out += idx + "\t" + num(c.range.mean) + "\t" + num(c.range.std) + "\t" + num(c.range.c_min) + "\t" +
               num(c.range.c_max) + "\n";
    }
    return out;
}

} // namespace lsr
