#include "support.hpp"

#include <gtest/gtest.h>

using namespace lsr;
using namespace lsr::test;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

SampleRecord scored(double a, double g)
{
    SampleRecord r;
    r.origin = Origin::predicted;
    r.label = ibug68::template_shape();
    r.scored = true;
    r.a = a;
    r.g = g;
    return r;
}

struct Pools {
    std::vector<SampleRecord> manual;
    std::vector<SampleRecord> unlabeled;
    std::vector<ValidationSample> validation;
};

Pools pools(std::size_t n_manual, std::size_t n_unlabeled, std::size_t n_val, std::uint64_t seed)
{
    const auto cfg = synth_config(n_manual + n_unlabeled + n_val, seed);
    const auto fs = faces(cfg, 0, n_manual + n_unlabeled + n_val);
    Pools p;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto img = std::make_shared<const GrayImage>(fs[i].image);
        if (i < n_manual + n_unlabeled) {
            SampleRecord r;
            r.id = synthetic_id(i);
            r.image = img;
            r.bbox = fs[i].bbox;
            r.truth = fs[i].shape;
            if (i < n_manual) {
                r.label = fs[i].shape;
                p.manual.push_back(r);
            } else {
                p.unlabeled.push_back(r);
            }
        } else {
            p.validation.push_back({synthetic_id(i), img, fs[i].bbox, fs[i].shape});
        }
    }
    return p;
}

ReinforceConfig small_config()
{
    ReinforceConfig cfg;
    cfg.train = tiny_config();
    cfg.samples_per_landmark = 120;
    cfg.max_iterations = 2;
    cfg.discovery = {0.1, 64, 10};
    return cfg;
}

} // namespace

TEST(Survival, ScoreArithmetic)
{
    EXPECT_EQ(combined_score(1.0, 1.0, 1.0), 0.0);
    EXPECT_FALSE(std::signbit(combined_score(1.0, 1.0, 1.0)));
    EXPECT_EQ(combined_score(0.0, 1.0, 1.0), inf);
    EXPECT_EQ(combined_score(1.0, 0.0, 1.0), inf);
    EXPECT_EQ(combined_score(std::exp(-1.0), std::exp(-1.0), 1.0), 2.0);
    // lambda = 0 ignores g entirely, even g = 0.
    EXPECT_EQ(combined_score(std::exp(-1.0), 0.0, 0.0), 1.0);
    EXPECT_NEAR(combined_score(0.5, 0.25, 2.0), -std::log(0.5) - 2.0 * std::log(0.25), 1e-15);
    // epsilon floors both terms.
    EXPECT_NEAR(combined_score(0.0, 1.0, 1.0, 1e-3), -std::log(1e-3), 1e-12);
}

TEST(Survival, StrictThresholdAndPinnedManualRecords)
{
    std::vector<SampleRecord> r{scored(std::exp(-1.0), std::exp(-1.0)), scored(1.0, 1.0), scored(0.0, 1.0)};
    SampleRecord manual;
    manual.origin = Origin::manual;
    manual.label = ibug68::template_shape();
    r.push_back(manual);
    SampleRecord unscored;
    r.push_back(unscored);

    survive(r, 1.0, 2.0);
    EXPECT_EQ(r[0].v, 0); // score == alpha does not survive
    EXPECT_EQ(r[1].v, 1);
    EXPECT_EQ(r[2].v, 0);
    EXPECT_EQ(r[3].v, 1);
    EXPECT_EQ(r[4].v, 0);
    EXPECT_EQ(r[0].score, 2.0);

    survive(r, 1.0, std::nextafter(2.0, 3.0));
    EXPECT_EQ(r[0].v, 1);
    survive(r, 1.0, -1.0);
    EXPECT_EQ(r[1].v, 0);
    EXPECT_EQ(r[3].v, 1);
    // Infinite scores never survive a finite alpha, but do with epsilon.
    survive(r, 1.0, 1e300);
    EXPECT_EQ(r[2].v, 0);
    survive(r, 1.0, 1e300, 1e-12);
    EXPECT_EQ(r[2].v, 1);
}

TEST(Survival, SurvivorSetGrowsWithAlpha)
{
    auto rng = make_rng(81);
    std::vector<SampleRecord> r;
    for (int i = 0; i < 200; ++i) {
        const double a = uniform_index(rng, 10) == 0 ? 0.0 : uniform01(rng);
        r.push_back(scored(a, std::floor(uniform01(rng) * 8) / 8));
    }
    std::vector<std::uint8_t> prev(r.size(), 0);
    for (double alpha = -0.5; alpha < 12.0; alpha += 0.05) {
        survive(r, 1.0, alpha);
        for (std::size_t i = 0; i < r.size(); ++i) {
            EXPECT_GE(r[i].v, prev[i]);
            prev[i] = r[i].v;
        }
    }
}

TEST(Reinforce, ConfigValidation)
{
    auto cfg = small_config();
    cfg.alpha_step = 0.0;
    EXPECT_THROW(cfg.validate(), InvalidConfig);
    cfg = small_config();
    cfg.lambda = -1.0;
    EXPECT_THROW(cfg.validate(), InvalidConfig);
    cfg = small_config();
    cfg.max_iterations = 0;
    EXPECT_THROW(cfg.validate(), InvalidConfig);
    cfg = small_config();
    cfg.sigma = 0.0;
    EXPECT_THROW(cfg.validate(), InvalidConfig);
    cfg = small_config();
    cfg.epsilon = 2.0;
    EXPECT_THROW(cfg.validate(), InvalidConfig);
}

TEST(Reinforce, InitializeRequiresSeed)
{
    auto p = pools(0, 3, 0, 82);
    EXPECT_THROW(initialize({}, p.unlabeled, small_config()), EmptySeed);
}

TEST(Reinforce, InitializeBuildsValidatorsOnlyWithUnlabeledRecords)
{
    auto p = pools(12, 4, 0, 83);
    const auto cfg = small_config();
    const auto none = initialize(p.manual, {}, cfg);
    EXPECT_FALSE(none.classifiers);
    EXPECT_FALSE(none.geometry);
    const auto st = initialize(p.manual, p.unlabeled, cfg);
    ASSERT_TRUE(st.classifiers && st.geometry);
    EXPECT_EQ(st.records.size(), 16u);
    EXPECT_EQ(st.survivor_count(), 12u);
    EXPECT_EQ(st.alpha, cfg.alpha0);
    for (const auto& r : st.records) {
        EXPECT_EQ(r.origin == Origin::manual, r.v == 1);
        EXPECT_EQ(r.origin == Origin::manual, r.label.has_value());
    }
}

TEST(Reinforce, AllManualDegeneratesToSupervisedTraining)
{
    auto p = pools(12, 0, 0, 84);
    const auto cfg = small_config();
    auto st = initialize(p.manual, {}, cfg);
    const auto model = run(st, cfg);
    EXPECT_EQ(st.t, 1);
    EXPECT_TRUE(st.converged);
    std::vector<TrainingSample> samples;
    for (const auto& r : p.manual) {
        samples.push_back({r.image, r.bbox, *r.label, 1});
    }
    const auto direct = train_cascade(samples, cfg.train, cfg.features);
    EXPECT_EQ(serialize_container({model.features, model, {}, {}}),
              serialize_container({direct.features, direct, {}, {}}));
}

TEST(Reinforce, StepKeepsManualLabelsAndLogsIterations)
{
    auto p = pools(12, 6, 3, 85);
    auto cfg = small_config();
    auto st = initialize(p.manual, p.unlabeled, cfg);
    std::vector<int> seen;
    run(st, cfg, p.validation, [&](const ReinforceState& s) { seen.push_back(s.t); });
    ASSERT_EQ(seen, (std::vector<int>{1, 2}));
    ASSERT_EQ(st.history.size(), 2u);
    EXPECT_DOUBLE_EQ(st.history[0].alpha, cfg.alpha0 + cfg.alpha_step);
    EXPECT_DOUBLE_EQ(st.history[1].alpha, cfg.alpha0 + 2 * cfg.alpha_step);
    EXPECT_FALSE(std::isfinite(st.history[0].max_delta_a));
    EXPECT_TRUE(std::isfinite(st.history[1].max_delta_a));
    for (const auto& h : st.history) {
        EXPECT_TRUE(h.heldout_nme.has_value());
        EXPECT_TRUE(h.pool_label_error.has_value());
        EXPECT_TRUE(stages_monotone(h.stages));
        EXPECT_GE(h.survivors, 12u);
    }
    for (std::size_t i = 0; i < 12; ++i) {
        EXPECT_EQ(*st.records[i].label, *p.manual[i].label);
        EXPECT_EQ(st.records[i].v, 1);
    }
    for (std::size_t i = 12; i < st.records.size(); ++i) {
        EXPECT_TRUE(st.records[i].label.has_value());
        EXPECT_TRUE(st.records[i].scored);
        EXPECT_GE(st.records[i].a, 0.0);
        EXPECT_LE(st.records[i].g, 1.0);
    }
    const auto j = iteration_json(st.history[0]);
    EXPECT_TRUE(j.at("max_delta_a").is_null());
    EXPECT_EQ(j.at("train_nme").size(), static_cast<std::size_t>(cfg.train.stages));
}

TEST(Reinforce, InfiniteToleranceStopsAfterOneIteration)
{
    auto p = pools(12, 4, 0, 86);
    auto cfg = small_config();
    cfg.tolerance = inf;
    auto st = initialize(p.manual, p.unlabeled, cfg);
    run(st, cfg);
    EXPECT_EQ(st.t, 1);
    EXPECT_TRUE(st.converged);
}

TEST(Reinforce, HugeAlphaStepAdmitsEveryPrediction)
{
    auto p = pools(12, 5, 0, 87);
    auto cfg = small_config();
    cfg.alpha_step = 1e9;
    cfg.epsilon = 1e-12;
    cfg.max_iterations = 1;
    auto st = initialize(p.manual, p.unlabeled, cfg);
    run(st, cfg);
    EXPECT_EQ(st.survivor_count(), st.records.size());
}

TEST(Reinforce, ThreadCountDoesNotChangeResults)
{
    auto cfg = small_config();
    cfg.max_iterations = 1;
    auto run_with = [&](int threads) {
        set_thread_count(threads);
        auto p = pools(12, 5, 0, 88);
        auto st = initialize(p.manual, p.unlabeled, cfg);
        const auto m = run(st, cfg);
        set_thread_count(0);
        std::string scores;
        for (const auto& r : st.records) {
            scores += format_double(r.a) + "," + format_double(r.g) + "," + std::to_string(r.v) + ";";
        }
        return serialize_container({m.features, m, st.classifiers, st.geometry}) + scores;
    };
    EXPECT_EQ(run_with(1), run_with(8));
}
