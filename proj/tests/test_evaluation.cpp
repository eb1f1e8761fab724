#include "support.hpp"

#include <gtest/gtest.h>

using namespace lsr;
using namespace lsr::test;

namespace {

std::vector<double> brute_ranks(const std::vector<double>& x)
{
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double below = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            below += x[j] < x[i] ? 1.0 : 0.0;
            equal += (j != i && x[j] == x[i]) ? 1.0 : 0.0;
        }
        r[i] = 1.0 + below + 0.5 * equal;
    }
    return r;
}

double brute_pearson(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST(Nme, PercentOfPupilDistance)
{
    std::vector<Point2> gt{{0, 0}, {10, 0}, {5, 5}, {3, 8}, {7, 8}};
    std::vector<Point2> pred = gt;
    for (auto& p : pred) {
        p.x += 0.5;
    }
    const auto pupils = PupilPair::single(0, 1);
    EXPECT_DOUBLE_EQ(nme(Shape(pred), Shape(gt), pupils), 5.0);
    EXPECT_DOUBLE_EQ(nme(Shape(gt), Shape(gt), pupils), 0.0);
    std::vector<Point2> flat = gt;
    flat[1] = flat[0];
    EXPECT_THROW(nme(Shape(pred), Shape(flat), pupils), ZeroPupilDistance);
    EXPECT_THROW(nme(Shape(pred), ibug68::template_shape(), pupils), DimensionMismatch);
}

TEST(Ced, MatchesSortAndCount)
{
    auto rng = make_rng(61);
    std::vector<double> e(57);
    for (auto& x : e) {
        x = std::round(200.0 * uniform01(rng)) / 10.0; // ties on the grid
    }
    const auto th = ced_thresholds_for(e);
    const auto c = ced_curve(e, th);
    ASSERT_EQ(c.points.size(), th.size());
    for (const auto& p : c.points) {
        double k = 0;
        for (double x : e) {
            k += x <= p.threshold ? 1.0 : 0.0;
        }
        EXPECT_DOUBLE_EQ(p.fraction, k / 57.0);
    }
    EXPECT_DOUBLE_EQ(c.points.back().fraction, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        EXPECT_GE(c.points[i].fraction, c.points[i - 1].fraction);
    }
    EXPECT_EQ(default_ced_thresholds().size(), 151u);
    EXPECT_THROW(ced_curve({}, th), EmptyInput);
    const std::vector<double> bad{1.0, 1.0};
    EXPECT_THROW(ced_curve(e, bad), InvalidConfig);
}

TEST(Correlation, RanksAndSpearmanMatchBruteForce)
{
    auto rng = make_rng(62);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 40);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(uniform_index(rng, 8));
            y[i] = x[i] + standard_normal(rng);
        }
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
            continue;
        }
        EXPECT_EQ(average_ranks(x), brute_ranks(x));
        EXPECT_NEAR(spearman(x, y), brute_pearson(brute_ranks(x), brute_ranks(y)), 1e-12);
        EXPECT_NEAR(pearson(x, y), brute_pearson(x, y), 1e-12);
    }
}

TEST(Correlation, ConstantInputAndInfiniteScores)
{
    const std::vector<double> c{1, 1, 1}, v{1, 2, 3};
    EXPECT_THROW(pearson(c, v), ConstantInput);
    EXPECT_THROW(spearman(c, v), ConstantInput);

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<CorrelationPair> pairs{{"a", 0.1, 1.0}, {"b", inf, 9.0}, {"c", 0.5, 3.0}, {"d", 0.3, 2.0}};
    const auto r = discrepancy_error_correlation(pairs);
    EXPECT_DOUBLE_EQ(r.spearman_rho, 1.0);
    EXPECT_DOUBLE_EQ(r.pearson_r, brute_pearson({0.1, 0.3, 0.5}, {1.0, 2.0, 3.0}));
    EXPECT_EQ(r.pairs.front().id, "a");
    EXPECT_EQ(r.pairs.back().id, "b");
    pairs.resize(2);
    EXPECT_THROW(discrepancy_error_correlation(pairs), EmptyInput);
}

TEST(Reports, CsvWriters)
{
    const auto dir = scratch("eval_csv");
    const auto res = make_nme_result("test", {"x", "y"}, {1.5, 2.5});
    EXPECT_DOUBLE_EQ(res.mean, 2.0);
    write_nme_csv(dir / "nme.csv", res);
    EXPECT_EQ(slurp(dir / "nme.csv"), "id,nme\nx,1.5\ny,2.5\n");
    const std::vector<double> e{1.0, 2.0};
    const std::vector<double> t{0.0, 1.5, 3.0};
    write_ced_csv(dir / "ced.csv", ced_curve(e, t));
    EXPECT_EQ(slurp(dir / "ced.csv"), "threshold,fraction\n0,0\n1.5,0.5\n3,1\n");
    EXPECT_THROW(make_nme_result("t", {"a"}, {}), DimensionMismatch);
}
