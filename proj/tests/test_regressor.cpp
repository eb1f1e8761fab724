#include "support.hpp"

#include <gtest/gtest.h>

using namespace lsr;
using namespace lsr::test;

namespace {

double sse(const std::vector<Point2>& t)
{
    if (t.empty()) {
        return 0.0;
    }
    Point2 m{};
    for (auto p : t) {
        m = m + p;
    }
    m = (1.0 / static_cast<double>(t.size())) * m;
    double s = 0.0;
    for (auto p : t) {
        s += squared_norm(p - m);
    }
    return s;
}

double mean_nme(const CascadeModel& model, const std::vector<SyntheticFace>& fs)
{
    double s = 0.0;
    for (const auto& f : fs) {
        s += nme(predict(model, f.image, f.bbox), f.shape, ibug68::pupils());
    }
    return s / static_cast<double>(fs.size());
}

const std::vector<SyntheticFace>& train_faces()
{
    static const auto fs = faces(synth_config(40, 3), 0, 40);
    return fs;
}

const std::vector<SyntheticFace>& test_faces()
{
    static const auto fs = faces(synth_config(40, 3), 40, 20);
    return fs;
}

} // namespace

TEST(SplitSearch, MatchesExhaustiveSearch)
{
    auto rng = make_rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 20);
        std::vector<double> values(n);
        std::vector<Point2> targets(n);
        for (std::size_t i = 0; i < n; ++i) {
            values[i] = static_cast<double>(uniform_index(rng, 6)); // plenty of ties
            targets[i] = {standard_normal(rng), standard_normal(rng)};
        }
        const auto got = best_threshold(values, targets);

        // Every midpoint between distinct sorted values; direct SSE reduction.
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        double best_gain = -1.0;
        for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
            const double th = 0.5 * (sorted[k] + sorted[k + 1]);
            std::vector<Point2> l, r;
            for (std::size_t i = 0; i < n; ++i) {
                (values[i] <= th ? l : r).push_back(targets[i]);
            }
            best_gain = std::max(best_gain, sse(targets) - sse(l) - sse(r));
        }
        if (sorted.size() < 2) {
            EXPECT_FALSE(got.valid);
            continue;
        }
        ASSERT_TRUE(got.valid);
        EXPECT_NEAR(got.gain, best_gain, 1e-9);
        std::vector<Point2> l, r;
        for (std::size_t i = 0; i < n; ++i) {
            (values[i] <= got.threshold ? l : r).push_back(targets[i]);
        }
        EXPECT_NEAR(sse(targets) - sse(l) - sse(r), best_gain, 1e-9);
    }
}

TEST(RegressionTree, LeafIndexFollowsHeapOrder)
{
    GrayImage img(10, 10, 0.0f);
    img(6, 5) = 1.0f;
    RegressionTree tree;
    // Root compares (1,0) against (0,0) around the origin; children never split.
    tree.splits = {{{1, 0}, {0, 0}, 0.5}, {{0, 0}, {0, 0}, 0.0}, {{0, 0}, {0, 0}, 0.0}};
    tree.leaf_offsets.resize(4);
    EXPECT_EQ(tree.leaf_index(img, LocalFrame::at({5, 5})), 2u);  // right, then left
    EXPECT_EQ(tree.leaf_index(img, LocalFrame::at({2, 2})), 0u);  // left, left
}

TEST(Cascade, TrainingErrorIsMonotoneAndBeatsMeanShape)
{
    const auto samples = samples_of(train_faces());
    CascadeTrainReport report;
    const auto model = train_cascade(samples, desk_config(4), FeatureConfig{}, &report);
    ASSERT_EQ(report.stages.size(), 4u);
    EXPECT_TRUE(stages_monotone(report.stages));
    EXPECT_LT(report.stages.back().error_after, report.stages.front().error_before);
    for (const auto& s : report.stages) {
        EXPECT_LE(s.residual_after, s.residual_before);
    }

    double mean_only = 0.0;
    for (const auto& f : test_faces()) {
        mean_only += nme(model.initial_shape(f.bbox), f.shape, ibug68::pupils());
    }
    mean_only /= static_cast<double>(test_faces().size());
    EXPECT_LT(mean_nme(model, test_faces()), mean_only);
}

TEST(Cascade, IgnoresSamplesWithZeroFlag)
{
    auto samples = samples_of(train_faces());
    samples.resize(20);
    auto flagged = samples;
    // Garbage labels on v = 0 samples must not matter.
    for (std::size_t i = 10; i < flagged.size(); ++i) {
        flagged[i].v = 0;
        flagged[i].label = ibug68::template_shape();
    }
    std::vector<TrainingSample> kept(samples.begin(), samples.begin() + 10);
    const auto cfg = tiny_config();
    const auto a = train_cascade(flagged, cfg, FeatureConfig{});
    const auto b = train_cascade(kept, cfg, FeatureConfig{});
    EXPECT_EQ(serialize_container({a.features, a, {}, {}}), serialize_container({b.features, b, {}, {}}));
}

TEST(Cascade, DeterministicAcrossThreadCounts)
{
    auto samples = samples_of(train_faces());
    samples.resize(15);
    const auto cfg = tiny_config();
    set_thread_count(1);
    const auto a = train_cascade(samples, cfg, FeatureConfig{});
    set_thread_count(8);
    const auto b = train_cascade(samples, cfg, FeatureConfig{});
    set_thread_count(0);
    EXPECT_EQ(serialize_container({a.features, a, {}, {}}), serialize_container({b.features, b, {}, {}}));
    const auto& f = test_faces().front();
    EXPECT_EQ(predict(a, f.image, f.bbox), predict(b, f.image, f.bbox));
}

TEST(Cascade, ConfigAndInputErrors)
{
    auto samples = samples_of(train_faces());
    samples.resize(3);
    auto cfg = tiny_config();
    cfg.stages = 0;
    EXPECT_THROW(train_cascade(samples, cfg, FeatureConfig{}), InvalidConfig);
    cfg = tiny_config();
    cfg.mu = -1.0;
    EXPECT_THROW(train_cascade(samples, cfg, FeatureConfig{}), InvalidConfig);
    for (auto& s : samples) {
        s.v = 0;
    }
    EXPECT_THROW(train_cascade(samples, tiny_config(), FeatureConfig{}), NoSurvivors);
}

TEST(Cascade, PluggableInterface)
{
    auto samples = samples_of(train_faces());
    samples.resize(10);
    const LbfRegressor r{tiny_config(), FeatureConfig{}};
    const auto model = r.train(samples);
    const auto& f = test_faces().front();
    EXPECT_EQ(r.predict(model, f.image, f.bbox).size(), 68u);
}

TEST(Cascade, InitialShapeIsMeanLabelInBoxCoordinates)
{
    auto samples = samples_of(train_faces());
    samples.resize(10);
    const auto model = train_cascade(samples, tiny_config(), FeatureConfig{});
    const BoundingBox box{0, 0, 1, 1};
    const Shape init = model.initial_shape(box);
    Point2 acc{};
    for (const auto& s : samples) {
        acc = acc + Point2{(s.label[30].x - s.bbox.x) / s.bbox.w, (s.label[30].y - s.bbox.y) / s.bbox.h};
    }
    EXPECT_NEAR(init[30].x, acc.x / 10.0, 1e-12);
    EXPECT_NEAR(init[30].y, acc.y / 10.0, 1e-12);
}
