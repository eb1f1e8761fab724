#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace lsr;
using namespace lsr::test;

namespace {

std::vector<Point2> random_points(std::mt19937_64& rng, std::size_t k)
{
    std::vector<Point2> p(k);
    for (auto& q : p) {
        q = {2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
    }
    return p;
}

// 5-point invariant on the raw coordinates, no normalization.
double raw_invariant(const std::vector<Point2>& p)
{
    auto m = [&](int a, int b, int c) { return std::abs(det3(p[a - 1], p[b - 1], p[c - 1])); };
    return m(1, 2, 4) * m(1, 3, 5) / (m(1, 2, 5) * m(1, 3, 4));
}

} // namespace

TEST(ProjectiveInvariant, UnchangedUnderHomographies)
{
    auto rng = make_rng(51);
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        for (std::size_t k : {5u, 6u}) {
            const auto p = random_points(rng, k);
            const auto h = random_homography(rng);
            std::vector<Point2> q;
            bool ok = true;
            for (auto x : p) {
                ok = ok && std::abs(h[6] * x.x + h[7] * x.y + h[8]) > 0.3;
                q.push_back(apply_homography(h, x));
            }
            if (!ok) {
                continue;
            }
            try {
                const double a = projective_invariant(p);
                const double b = projective_invariant(q);
                EXPECT_LE(std::abs(a - b) / std::abs(a), 1e-6);
                ++checked;
            } catch (const DegenerateConfiguration&) {
            }
        }
    }
    EXPECT_GT(checked, 600);
}

TEST(ProjectiveInvariant, MatchesDeterminantRatioOnRawPoints)
{
    auto rng = make_rng(52);
    const auto p = random_points(rng, 5);
    EXPECT_NEAR(projective_invariant(p), raw_invariant(p), 1e-10);
}

TEST(ProjectiveInvariant, CollinearTripleIsDegenerate)
{
    const std::vector<Point2> p{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 2}};
    // m124 and m135 are fine, but the 6-point form touches m123.
    const std::vector<Point2> six{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 2}, {3, 1}};
    EXPECT_THROW(projective_invariant(six), DegenerateConfiguration);
    const std::vector<Point2> same(5, Point2{1, 1});
    EXPECT_THROW(projective_invariant(same), DegenerateConfiguration);
    EXPECT_THROW(projective_invariant(std::span<const Point2>(p.data(), 4)), InvalidConfig);
    // Scale does not move a configuration across the threshold.
    std::vector<Point2> tiny;
    for (auto q : six) {
        tiny.push_back({1e-6 * q.x, 1e-6 * q.y});
    }
    EXPECT_THROW(projective_invariant(tiny), DegenerateConfiguration);
    std::vector<Point2> ok{{0, 0}, {1, 0.1}, {2, -0.3}, {0, 1}, {1, 2}, {3, 1}};
    const double v = projective_invariant(ok);
    for (auto& q : ok) {
        q = {1e-5 * q.x, 1e-5 * q.y};
    }
    EXPECT_NEAR(projective_invariant(ok), v, 1e-9 * v);
}

TEST(Discovery, SubsetsAreLexicographic)
{
    const auto s = k_subsets({1, 3, 5, 7, 9, 11}, 5);
    ASSERT_EQ(s.size(), 6u);
    EXPECT_EQ(s.front(), (std::vector<std::size_t>{1, 3, 5, 7, 9}));
    EXPECT_EQ(s.back(), (std::vector<std::size_t>{3, 5, 7, 9, 11}));
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
}

TEST(Discovery, HomographicCopiesGiveZeroWidthRanges)
{
    // Projective images of one face have identical invariants, so every
    // non-degenerate combination has zero spread and scores g = 1.
    auto rng = make_rng(53);
    const Shape base = ibug68::template_shape();
    std::vector<Shape> shapes;
    while (shapes.size() < 12) {
        auto h = random_homography(rng);
        std::vector<Point2> pts;
        for (auto p : base) {
            pts.push_back(apply_homography(h, p));
        }
        shapes.emplace_back(pts);
    }
    const auto model = discover_combinations(shapes, ibug68::stable_subset(), {1e-6, 50, 10});
    EXPECT_EQ(model.size(), 50u);
    for (const auto& c : model.combinations) {
        EXPECT_LE(c.relative_std(), 1e-6);
    }
    for (std::size_t i = 1; i < model.size(); ++i) {
        const auto& a = model.combinations[i - 1];
        const auto& b = model.combinations[i];
        EXPECT_TRUE(a.relative_std() < b.relative_std() ||
                    (a.relative_std() == b.relative_std() && a.indices < b.indices));
    }
    for (const auto& s : shapes) {
        EXPECT_DOUBLE_EQ(geometry_score(s, model), 1.0);
    }
}

TEST(Discovery, RangeIsClippedMeanPlusMinusThreeStd)
{
    auto rng = make_rng(54);
    std::vector<Shape> shapes;
    const Shape base = ibug68::template_shape();
    for (int i = 0; i < 30; ++i) {
        std::vector<Point2> pts(base.begin(), base.end());
        for (auto& p : pts) {
            p = p + Point2{0.01 * standard_normal(rng), 0.01 * standard_normal(rng)};
        }
        shapes.emplace_back(pts);
    }
    const std::vector<std::size_t> idx{8, 27, 36, 45, 54};
    const auto r = intrinsic_range(shapes, idx);
    ASSERT_TRUE(r);
    std::vector<double> v;
    for (const auto& s : shapes) {
        v.push_back(projective_invariant(s, idx));
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 30.0;
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / 30.0);
    EXPECT_NEAR(r->mean, mean, 1e-12);
    EXPECT_NEAR(r->std, sd, 1e-12);
    EXPECT_NEAR(r->c_min, std::max(mean - 3 * sd, *std::min_element(v.begin(), v.end())), 1e-12);
    EXPECT_NEAR(r->c_max, std::min(mean + 3 * sd, *std::max_element(v.begin(), v.end())), 1e-12);
}

TEST(Discovery, Errors)
{
    std::vector<Shape> few(3, ibug68::template_shape());
    EXPECT_THROW(discover_combinations(few, ibug68::stable_subset()), InvalidConfig);
    std::vector<Shape> many(12, ibug68::template_shape());
    EXPECT_THROW(discover_combinations(many, {1, 2, 3, 4}), InvalidConfig);
    EXPECT_THROW(discover_combinations(many, {1, 2, 3, 4, 99}), DimensionMismatch);
    // Five collinear points: nothing is evaluable.
    std::vector<Point2> line;
    for (int i = 0; i < 5; ++i) {
        line.push_back({static_cast<double>(i), 2.0 * i});
    }
    std::vector<Shape> lines(12, Shape(line));
    EXPECT_THROW(discover_combinations(lines, {0, 1, 2, 3, 4}), NoStableCombination);
}

TEST(GeometryScore, InRangeAndOutOfRangeCases)
{
    // A combination whose intrinsic range is [0.0192, 0.0216]: a shape with
    // value 0.0204 lies inside, one with 0.0479 does not.
    LandmarkCombination c;
    c.indices = {0, 1, 2, 3, 4};
    c.range = {0.0192, 0.0216, 0.0204, 0.0004};
    GeometryModel model;
    model.combinations = {c};

    // With points 1..4 on the unit square the invariant is |x5| / |y5|.
    auto shape_with = [](double target) {
        return Shape(std::vector<Point2>{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2.0 * target, 2.0}});
    };
    const Shape a = shape_with(0.0204);
    const Shape b = shape_with(0.0479);
    ASSERT_NEAR(projective_invariant(a, c.indices), 0.0204, 1e-9);
    ASSERT_NEAR(projective_invariant(b, c.indices), 0.0479, 1e-9);
    EXPECT_DOUBLE_EQ(geometry_score(a, model), 1.0);
    EXPECT_DOUBLE_EQ(geometry_score(b, model), 0.0);
}

TEST(GeometryScore, EmptyModelThrows)
{
    EXPECT_THROW(geometry_score(ibug68::template_shape(), GeometryModel{}), EmptyInput);
}

TEST(GeometryScore, SyntheticFacesMostlyInRange)
{
    const auto fs = faces(synth_config(40, 9), 0, 40);
    std::vector<Shape> shapes;
    for (std::size_t i = 0; i < 30; ++i) {
        shapes.push_back(fs[i].shape);
    }
    const auto model = discover_combinations(shapes, ibug68::stable_subset());
    EXPECT_GT(model.size(), 0u);
    double held = 0.0;
    for (std::size_t i = 30; i < 40; ++i) {
        held += geometry_score(fs[i].shape, model);
    }
    EXPECT_GT(held / 10.0, 0.8);
    // A scrambled face breaks most combinations.
    std::vector<Point2> pts(fs[35].shape.begin(), fs[35].shape.end());
    std::swap(pts[36], pts[45]);
    std::swap(pts[8], pts[27]);
    EXPECT_LT(geometry_score(Shape(pts), model), held / 10.0);
    const auto table = format_geometry_table(model);
    EXPECT_EQ(table.rfind("indices\tmean\tstd\tc_min\tc_max\n", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(table.begin(), table.end(), '\n')), model.size() + 1);
}
