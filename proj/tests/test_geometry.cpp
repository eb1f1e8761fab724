#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

using namespace lsr;

namespace {

Shape random_shape(std::mt19937_64& rng, std::size_t n)
{
    std::vector<Point2> pts(n);
    for (auto& p : pts) {
        p = {standard_normal(rng), standard_normal(rng)};
    }
    return Shape(pts);
}

// Least squares over (a, b, tx, ty) with x' = a x - b y + tx, y' = b x + a y + ty.
SimilarityTransform normal_equation_fit(const Shape& src, const Shape& ref)
{
    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::MatrixXd A(2 * n, 4);
    Eigen::VectorXd y(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = src[static_cast<std::size_t>(i)];
        const auto& q = ref[static_cast<std::size_t>(i)];
        A.row(2 * i) << p.x, -p.y, 1, 0;
        A.row(2 * i + 1) << p.y, p.x, 0, 1;
        y(2 * i) = q.x;
        y(2 * i + 1) = q.y;
    }
    const Eigen::Vector4d s = (A.transpose() * A).ldlt().solve(A.transpose() * y);
    return {std::hypot(s(0), s(1)), std::atan2(s(1), s(0)), {s(2), s(3)}};
}

} // namespace

TEST(Shape, RejectsTooFewOrNonFinitePoints)
{
    EXPECT_THROW(Shape(std::vector<Point2>(4)), InvalidShape);
    std::vector<Point2> pts(5);
    pts[2].x = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(Shape{pts}, InvalidShape);
}

TEST(Procrustes, MatchesNormalEquations)
{
    auto rng = make_rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Shape a = random_shape(rng, 12);
        const Shape b = random_shape(rng, 12);
        const auto t = procrustes_align(a, b);
        const auto o = normal_equation_fit(a, b);
        EXPECT_NEAR(t.scale, o.scale, 1e-10);
        EXPECT_NEAR(std::remainder(t.rotation - o.rotation, 2 * std::numbers::pi), 0.0, 1e-10);
        EXPECT_NEAR(t.translation.x, o.translation.x, 1e-10);
        EXPECT_NEAR(t.translation.y, o.translation.y, 1e-10);
    }
}

TEST(Procrustes, RecoversExactSimilarity)
{
    auto rng = make_rng(4);
    const Shape a = random_shape(rng, 9);
    const SimilarityTransform truth{1.7, 0.4, {3.0, -2.0}};
    const auto t = procrustes_align(a, apply_transform(truth, a));
    EXPECT_NEAR(t.scale, 1.7, 1e-12);
    EXPECT_NEAR(t.rotation, 0.4, 1e-12);
    EXPECT_NEAR(t.translation.x, 3.0, 1e-12);
    EXPECT_NEAR(t.translation.y, -2.0, 1e-12);
}

TEST(Procrustes, DegenerateSourceThrows)
{
    const Shape flat(std::vector<Point2>(6, Point2{1.0, 1.0}));
    auto rng = make_rng(5);
    EXPECT_THROW(procrustes_align(flat, random_shape(rng, 6)), DegenerateShape);
}

TEST(Similarity, InverseAndCompose)
{
    const SimilarityTransform a{2.0, 0.3, {1.0, 2.0}};
    const SimilarityTransform b{0.5, -1.1, {-4.0, 0.5}};
    const Point2 p{0.7, -0.2};
    const Point2 back = a.inverse().apply(a.apply(p));
    EXPECT_NEAR(back.x, p.x, 1e-12);
    EXPECT_NEAR(back.y, p.y, 1e-12);
    const Point2 q1 = a.compose(b).apply(p);
    const Point2 q2 = a.apply(b.apply(p));
    EXPECT_NEAR(q1.x, q2.x, 1e-12);
    EXPECT_NEAR(q1.y, q2.y, 1e-12);
}

TEST(MeanShape, UnitRadiusCenteredAndAlignedToSimilarCopies)
{
    auto rng = make_rng(6);
    const Shape base = random_shape(rng, 10);
    std::vector<Shape> copies;
    for (int i = 0; i < 8; ++i) {
        copies.push_back(apply_transform({0.5 + uniform01(rng), 2 * uniform01(rng) - 1, {uniform01(rng), 3.0}}, base));
    }
    const Shape m = mean_shape(copies);
    EXPECT_NEAR(rms_radius(m), 1.0, 1e-12);
    const Point2 c = centroid(m.points());
    EXPECT_NEAR(c.x, 0.0, 1e-12);
    EXPECT_NEAR(c.y, 0.0, 1e-12);
    // Every copy is a similarity of the mean.
    for (const auto& s : copies) {
        const Shape fitted = apply_transform(procrustes_align(s, m), s);
        for (std::size_t i = 0; i < m.size(); ++i) {
            EXPECT_NEAR(fitted[i].x, m[i].x, 1e-9);
            EXPECT_NEAR(fitted[i].y, m[i].y, 1e-9);
        }
    }
}

TEST(MeanShape, FixedPointOfGeneralizedProcrustes)
{
    auto rng = make_rng(7);
    std::vector<Shape> shapes;
    for (int i = 0; i < 15; ++i) {
        shapes.push_back(random_shape(rng, 8));
    }
    // The converged mean reproduces itself: the normalized average of all
    // shapes aligned onto it is the same mean up to rotation.
    const Shape m = mean_shape(shapes, {100, 1e-14});
    std::vector<Point2> acc(m.size());
    for (const auto& s : shapes) {
        const Shape a = apply_transform(procrustes_align(s, m), s);
        for (std::size_t i = 0; i < m.size(); ++i) {
            acc[i] = acc[i] + a[i];
        }
    }
    Shape avg = normalize_shape(Shape(acc));
    avg = normalize_shape(apply_transform(procrustes_align(avg, m), avg));
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_NEAR(avg[i].x, m[i].x, 1e-6);
        EXPECT_NEAR(avg[i].y, m[i].y, 1e-6);
    }
}

TEST(MeanShape, EmptyInputThrows)
{
    EXPECT_THROW(mean_shape(std::span<const Shape>{}), EmptyInput);
}

TEST(BoundingBox, PlaceInBoxInvertsBoundingBox)
{
    const Shape t = ibug68::template_shape();
    const BoundingBox box{10.0, 20.0, 50.0, 60.0};
    const Shape placed = place_in_box(t, box, 0.1);
    const BoundingBox again = bounding_box(placed, 0.1);
    EXPECT_NEAR(again.w, box.w, 1e-9);
    EXPECT_NEAR(again.center().x, box.center().x, 1e-9);
    EXPECT_NEAR(again.center().y, box.center().y, 1e-9);
}

TEST(PupilPair, CentroidDistanceAndRange)
{
    const Shape s(std::vector<Point2>{{0, 0}, {2, 0}, {10, 0}, {12, 0}, {5, 5}});
    const PupilPair p{{0, 1}, {2, 3}};
    EXPECT_DOUBLE_EQ(p.distance(s), 10.0);
    EXPECT_TRUE(p.valid_for(5));
    EXPECT_FALSE(p.valid_for(3));
    EXPECT_FALSE(PupilPair{}.valid_for(5));
}
