#pragma once

#include <lsr/error.hpp>
#include <lsr/features.hpp>
#include <lsr/geometry.hpp>
#include <lsr/image.hpp>
#include <lsr/parallel.hpp>
#include <lsr/ridge.hpp>
#include <lsr/rng.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsr {

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
    int stages = 5;
    int trees_per_landmark = 5;
    int tree_depth = 4;
    /// Sampling radius per stage as a fraction of the canonical face size.
    std::vector<double> radius_schedule{0.3, 0.2, 0.15, 0.1, 0.08};
    /// Ridge weight; when unset, 1e-3 times the binary feature dimension.
    std::optional<double> mu;
    int initial_perturbations = 5;
    std::uint64_t rng_seed = 0;

    int split_candidates = 500;
    int pixel_pool = 200;
    /// Node samples used to choose a split; partitioning always uses all of them.
    int split_sample_cap = 256;

    // Stage-0 jitter, relative to the bounding box.
    double init_translation_std = 0.05;
    double init_scale_std = 0.05;
    double init_rotation_std = 0.05;

    /// Training error normalizer; canonical face size when unset.
    std::optional<PupilPair> pupils;

    double radius_at(int stage) const
    {
        const auto i = std::min<std::size_t>(static_cast<std::size_t>(stage), radius_schedule.size() - 1);
        return radius_schedule[i];
    }

    std::size_t leaves_per_tree() const { return std::size_t{1} << tree_depth; }

    double mu_for(std::size_t feature_dim) const { return mu ? *mu : 1e-3 * static_cast<double>(feature_dim); }

    void validate() const
    {
        if (stages < 1) {
            throw InvalidConfig("stages must be >= 1");
        }
        if (trees_per_landmark < 1) {
            throw InvalidConfig("trees_per_landmark must be >= 1");
        }
        if (tree_depth < 1 || tree_depth > 12) {
            throw InvalidConfig("tree_depth must be in [1, 12]");
        }
        if (radius_schedule.empty()) {
            throw InvalidConfig("radius schedule is empty");
        }
        for (std::size_t i = 0; i < radius_schedule.size(); ++i) {
            if (!(radius_schedule[i] > 0.0) || (i > 0 && radius_schedule[i] > radius_schedule[i - 1])) {
                throw InvalidConfig("radius schedule must be positive and nonincreasing");
            }
        }
        if (mu && !(*mu >= 0.0)) {
            throw InvalidConfig("mu must be >= 0");
        }
        if (initial_perturbations < 1) {
            throw InvalidConfig("initial_perturbations must be >= 1");
        }
        if (split_candidates < 1 || pixel_pool < 2 || split_sample_cap < 2) {
            throw InvalidConfig("split_candidates >= 1, pixel_pool >= 2 and split_sample_cap >= 2 required");
        }
        if (init_translation_std < 0.0 || init_scale_std < 0.0 || init_rotation_std < 0.0) {
            throw InvalidConfig("initialization jitter must be nonnegative");
        }
    }
};

// ---------------------------------------------------------------------------
// Local binary features

/// Pixel-difference test: go left iff I(a) - I(b) <= threshold.
struct SplitTest {
    Point2 a{};
    Point2 b{};
    double threshold = std::numeric_limits<double>::infinity();
};

/// Complete binary tree in heap order: 2^depth - 1 splits, 2^depth leaves.
struct RegressionTree {
    std::vector<SplitTest> splits;
    std::vector<Point2> leaf_offsets;

    std::size_t leaf_index(const GrayImage& img, const LocalFrame& frame) const
    {
        std::size_t node = 0;
        while (node < splits.size()) {
            const auto& s = splits[node];
            const double f = frame.sample(img, s.a) - frame.sample(img, s.b);
            node = 2 * node + (f <= s.threshold ? 1 : 2);
        }
        return node - splits.size();
    }
};

struct LocalMappingStage {
    int tree_depth = 1;
    /// forests[l] holds the trees of landmark l.
    std::vector<std::vector<RegressionTree>> forests;

    std::size_t landmarks() const { return forests.size(); }
    std::size_t trees_per_landmark() const { return forests.empty() ? 0 : forests.front().size(); }
    std::size_t leaves_per_tree() const { return std::size_t{1} << tree_depth; }
    std::size_t feature_dim() const { return landmarks() * trees_per_landmark() * leaves_per_tree(); }

    /// Active indices of the concatenated binary feature; exactly one per tree.
    SparseBinaryRow binary_features(const GrayImage& img, std::span<const LocalFrame> frames) const
    {
        SparseBinaryRow phi;
        phi.reserve(landmarks() * trees_per_landmark());
        const std::size_t leaves = leaves_per_tree();
        for (std::size_t l = 0; l < forests.size(); ++l) {
            for (std::size_t t = 0; t < forests[l].size(); ++t) {
                const std::size_t leaf = forests[l][t].leaf_index(img, frames[l]);
                phi.push_back(static_cast<std::uint32_t>((l * forests[l].size() + t) * leaves + leaf));
            }
        }
        return phi;
    }

    /// Forest-average of the leaf offsets for landmark l, in canonical units.
    Point2 local_offset(std::size_t l, const GrayImage& img, const LocalFrame& frame) const
    {
        Point2 acc{};
        for (const auto& tree : forests[l]) {
            acc = acc + tree.leaf_offsets[tree.leaf_index(img, frame)];
        }
        return (1.0 / static_cast<double>(forests[l].size())) * acc;
    }
};

struct CascadeStage {
    LocalMappingStage local;
    GlobalLinearStage global;
};

struct CascadeModel {
    static constexpr std::uint32_t format_version = 1;

    /// Procrustes mean, unit RMS radius; defines the canonical sampling frame.
    Shape mean_shape;
    /// Mean of the training labels in bounding-box coordinates ([0,1] box).
    Shape box_shape;
    FeatureConfig features;
    std::vector<CascadeStage> stages;

    std::size_t landmarks() const { return mean_shape.size(); }
    Shape canonical() const { return canonical_mean(mean_shape, features); }

    Shape initial_shape(const BoundingBox& box) const
    {
        std::vector<Point2> pts;
        pts.reserve(box_shape.size());
        for (const auto& p : box_shape) {
            pts.push_back({box.x + p.x * box.w, box.y + p.y * box.h});
        }
        return Shape(std::move(pts));
    }
};

/// One training example for a single stage of local mapping.
struct StageSample {
    const GrayImage* image = nullptr;
    Shape current;
    Shape target;
    std::uint8_t v = 1;
};

struct StageConfig {
    int trees_per_landmark = 5;
    int tree_depth = 4;
    /// Sampling radius in canonical pixels.
    double radius = 30.0;
    int split_candidates = 500;
    int pixel_pool = 200;
    int split_sample_cap = 256;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Split search

struct SplitChoice {
    double threshold = std::numeric_limits<double>::infinity();
    double gain = 0.0;
    bool valid = false;
};

/// Exhaustive threshold search on one feature: maximizes the reduction of the
/// summed squared deviation of the 2-D targets, i.e. |S_L|^2/n_L + |S_R|^2/n_R.
/// The threshold is the midpoint between the two values it separates.
inline SplitChoice best_threshold(std::span<const double> values, std::span<const Point2> targets)
{
    const std::size_t n = values.size();
    SplitChoice best;
    if (n < 2) {
        return best;
    }
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = static_cast<std::uint32_t>(i);
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    });
    Point2 total{};
    for (const auto& t : targets) {
        total = total + t;
    }
    const double base = squared_norm(total) / static_cast<double>(n);
    Point2 left{};
    for (std::size_t k = 0; k + 1 < n; ++k) {
        left = left + targets[order[k]];
        const double v0 = values[order[k]];
        const double v1 = values[order[k + 1]];
        if (!(v1 > v0)) {
            continue;
        }
        const double nl = static_cast<double>(k + 1);
        const double nr = static_cast<double>(n - k - 1);
        const Point2 right = total - left;
        const double gain = squared_norm(left) / nl + squared_norm(right) / nr - base;
        if (!best.valid || gain > best.gain) {
            best = {0.5 * (v0 + v1), gain, true};
        }
    }
    return best;
}

namespace detail {

inline Point2 random_in_disk(std::mt19937_64& rng, double radius)
{
    const double r = radius * std::sqrt(uniform01(rng));
    const double a = 2.0 * std::numbers::pi * uniform01(rng);
    return {r * std::cos(a), r * std::sin(a)};
}

// Fits one tree on the rows of `pool` (samples x pool points) against 2-D targets.
inline RegressionTree fit_tree(const std::vector<float>& pool, std::size_t pool_size, std::span<const Point2> pool_points,
                               std::span<const Point2> targets, const StageConfig& cfg, std::mt19937_64& rng)
{
    const std::size_t n = targets.size();
    const std::size_t n_splits = (std::size_t{1} << cfg.tree_depth) - 1;
    RegressionTree tree;
    tree.splits.resize(n_splits);
    tree.leaf_offsets.assign(n_splits + 1, Point2{});

    std::vector<std::vector<std::uint32_t>> members(2 * n_splits + 1);
    members[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        members[0][i] = static_cast<std::uint32_t>(i);
    }

    std::vector<double> values;
    std::vector<Point2> sub_targets;
    std::vector<std::uint32_t> subset;
    for (std::size_t node = 0; node < n_splits; ++node) {
        const auto& idx = members[node];
        subset = idx;
        const auto cap = static_cast<std::size_t>(cfg.split_sample_cap);
        if (subset.size() > cap) {
            for (std::size_t i = 0; i < cap; ++i) {
                std::swap(subset[i], subset[i + uniform_index(rng, subset.size() - i)]);
            }
            subset.resize(cap);
        }
        sub_targets.resize(subset.size());
        for (std::size_t i = 0; i < subset.size(); ++i) {
            sub_targets[i] = targets[subset[i]];
        }

        SplitTest best_test;
        SplitChoice best;
        std::size_t best_pa = 0;
        std::size_t best_pb = 0;
        values.resize(subset.size());
        for (int c = 0; c < cfg.split_candidates; ++c) {
            const std::size_t pa = uniform_index(rng, pool_size);
            std::size_t pb = uniform_index(rng, pool_size - 1);
            if (pb >= pa) {
                ++pb;
            }
            if (subset.size() < 2) {
                continue;
            }
            for (std::size_t i = 0; i < subset.size(); ++i) {
                const float* row = &pool[static_cast<std::size_t>(subset[i]) * pool_size];
                values[i] = static_cast<double>(row[pa]) - static_cast<double>(row[pb]);
            }
            const SplitChoice choice = best_threshold(values, sub_targets);
            if (choice.valid && (!best.valid || choice.gain > best.gain)) {
                best = choice;
                best_test = {pool_points[pa], pool_points[pb], choice.threshold};
                best_pa = pa;
                best_pb = pb;
            }
        }
        tree.splits[node] = best_test;

        auto& left = members[2 * node + 1];
        auto& right = members[2 * node + 2];
        for (auto i : idx) {
            bool go_left = true;
            if (best.valid) {
                const float* row = &pool[static_cast<std::size_t>(i) * pool_size];
                const double f = static_cast<double>(row[best_pa]) - static_cast<double>(row[best_pb]);
                go_left = f <= best_test.threshold;
            }
            (go_left ? left : right).push_back(i);
        }
    }
    for (std::size_t leaf = 0; leaf <= n_splits; ++leaf) {
        const auto& idx = members[n_splits + leaf];
        if (idx.empty()) {
            continue;
        }
        Point2 acc{};
        for (auto i : idx) {
            acc = acc + targets[i];
        }
        tree.leaf_offsets[leaf] = (1.0 / static_cast<double>(idx.size())) * acc;
    }
    return tree;
}

} // namespace detail

/// Fits per-landmark forests on canonical-frame offsets (target - current).
///
/// Only samples with v = 1 take part; the random streams are keyed by stage
/// seed and landmark, so the result does not depend on excluded samples or on
/// the thread count.
inline LocalMappingStage train_local_mappings(std::span<const StageSample> samples, const Shape& canonical,
                                              const StageConfig& cfg)
{
    std::vector<const StageSample*> active;
    for (const auto& s : samples) {
        if (s.v != 0) {
            active.push_back(&s);
        }
    }
    if (active.empty()) {
        throw NoSurvivors("train_local_mappings: all samples have v = 0");
    }
    const std::size_t n_landmarks = canonical.size();
    for (const auto* s : active) {
        if (s->current.size() != n_landmarks || s->target.size() != n_landmarks || s->image == nullptr) {
            throw DimensionMismatch("train_local_mappings: sample does not match the canonical shape");
        }
    }
    if (cfg.trees_per_landmark < 1 || cfg.tree_depth < 1 || cfg.pixel_pool < 2 || cfg.split_candidates < 1) {
        throw InvalidConfig("invalid stage configuration");
    }

    std::vector<std::vector<LocalFrame>> frames(active.size());
    parallel_for(active.size(), [&](std::size_t i) { frames[i] = landmark_frames(active[i]->current, canonical); });

    LocalMappingStage stage;
    stage.tree_depth = cfg.tree_depth;
    stage.forests.resize(n_landmarks);
    const auto pool_size = static_cast<std::size_t>(cfg.pixel_pool);

    parallel_for(n_landmarks, [&](std::size_t l) {
        auto rng = make_rng(cfg.seed, {l});
        std::vector<Point2> pool_points(pool_size);
        for (auto& p : pool_points) {
            p = detail::random_in_disk(rng, cfg.radius);
        }
        std::vector<float> pool(active.size() * pool_size);
        std::vector<Point2> targets(active.size());
        for (std::size_t i = 0; i < active.size(); ++i) {
            const auto& f = frames[i][l];
            for (std::size_t k = 0; k < pool_size; ++k) {
                pool[i * pool_size + k] = static_cast<float>(f.sample(*active[i]->image, pool_points[k]));
            }
            targets[i] = f.to_canonical_offset(active[i]->target[l] - active[i]->current[l]);
        }
        auto& forest = stage.forests[l];
        forest.reserve(static_cast<std::size_t>(cfg.trees_per_landmark));
        for (int t = 0; t < cfg.trees_per_landmark; ++t) {
            forest.push_back(detail::fit_tree(pool, pool_size, pool_points, targets, cfg, rng));
        }
    });
    return stage;
}

// ---------------------------------------------------------------------------
// Cascade training and prediction

/// Labeled example for the cascade. Only v = 1 samples are used.
struct TrainingSample {
    std::shared_ptr<const GrayImage> image;
    BoundingBox bbox;
    Shape label;
    std::uint8_t v = 1;
};

struct StageReport {
    /// Mean normalized landmark error before and after the stage (percent).
    double error_before = 0.0;
    double error_after = 0.0;
    /// Sum of squared canonical residuals: the stage targets, and what the
    /// ridge fit leaves over on the training data.
    double residual_before = 0.0;
    double residual_after = 0.0;
    double ridge_objective = 0.0;
};

struct CascadeTrainReport {
    std::size_t survivors = 0;
    std::size_t augmented_samples = 0;
    std::vector<StageReport> stages;
};

namespace detail {

inline double normalized_error(const Shape& pred, const Shape& gt, const TrainConfig& cfg, double canonical_scale)
{
    double sum = 0.0;
    for (std::size_t l = 0; l < gt.size(); ++l) {
        sum += norm(pred[l] - gt[l]);
    }
    const double mean = sum / static_cast<double>(gt.size());
    if (cfg.pupils) {
        return 100.0 * mean / cfg.pupils->distance(gt);
    }
    return 100.0 * mean * canonical_scale;
}

inline Shape to_box_coordinates(const Shape& s, const BoundingBox& box)
{
    std::vector<Point2> pts;
    pts.reserve(s.size());
    for (const auto& p : s) {
        pts.push_back({(p.x - box.x) / box.w, (p.y - box.y) / box.h});
    }
    return Shape(std::move(pts));
}

inline Shape jitter_shape(const Shape& s, const BoundingBox& box, const TrainConfig& cfg, std::mt19937_64& rng)
{
    const double scale = std::exp(cfg.init_scale_std * standard_normal(rng));
    const double rot = cfg.init_rotation_std * standard_normal(rng);
    const Point2 shift{cfg.init_translation_std * box.w * standard_normal(rng),
                       cfg.init_translation_std * box.h * standard_normal(rng)};
    const Point2 c = box.center();
    SimilarityTransform t{scale, rot, {}};
    t.translation = c + shift - t.linear(c);
    return apply_transform(t, s);
}

} // namespace detail

/// Applies one stage to a shape in place.
inline void apply_stage(const CascadeStage& stage, const GrayImage& img, const Shape& canonical, Shape& shape)
{
    const auto frames = landmark_frames(shape, canonical);
    const SparseBinaryRow phi = stage.local.binary_features(img, frames);
    const Eigen::VectorXd delta = stage.global.apply(phi);
    for (std::size_t l = 0; l < shape.size(); ++l) {
        const Point2 d = frames[l].to_image_offset({delta(2 * static_cast<Eigen::Index>(l)),
                                                    delta(2 * static_cast<Eigen::Index>(l) + 1)});
        shape[l] = shape[l] + d;
    }
}

/// Mean shape placed in the box, then every stage in order.
inline Shape predict(const CascadeModel& model, const GrayImage& img, const BoundingBox& box)
{
    Shape shape = model.initial_shape(box);
    const Shape canonical = model.canonical();
    for (const auto& stage : model.stages) {
        apply_stage(stage, img, canonical, shape);
    }
    return shape;
}

/// Trains the LBF-style cascade on the samples with v = 1.
inline CascadeModel train_cascade(std::span<const TrainingSample> samples, const TrainConfig& cfg,
                                  const FeatureConfig& features, CascadeTrainReport* report = nullptr)
{
    cfg.validate();
    features.validate();
    std::vector<const TrainingSample*> survivors;
    for (const auto& s : samples) {
        if (s.v != 0) {
            survivors.push_back(&s);
        }
    }
    if (survivors.empty()) {
        throw NoSurvivors("train_cascade: no sample has v = 1");
    }
    const std::size_t n_landmarks = survivors.front()->label.size();
    for (const auto* s : survivors) {
        if (s->label.size() != n_landmarks || !s->image) {
            throw DimensionMismatch("train_cascade: inconsistent landmark counts or missing image");
        }
        if (cfg.pupils && !cfg.pupils->valid_for(n_landmarks)) {
            throw InvalidConfig("pupil indices out of range");
        }
    }

    CascadeModel model;
    model.features = features;
    {
        std::vector<Shape> labels;
        std::vector<Point2> box_acc(n_landmarks);
        labels.reserve(survivors.size());
        for (const auto* s : survivors) {
            labels.push_back(s->label);
            const Shape b = detail::to_box_coordinates(s->label, s->bbox);
            for (std::size_t l = 0; l < n_landmarks; ++l) {
                box_acc[l] = box_acc[l] + b[l];
            }
        }
        for (auto& p : box_acc) {
            p = (1.0 / static_cast<double>(survivors.size())) * p;
        }
        model.mean_shape = mean_shape(labels);
        model.box_shape = Shape(std::move(box_acc));
    }
    const Shape canonical = model.canonical();
    const double canonical_scale = 1.0 / features.reference_face_size;

    // Stage-0 initializations: the placed mean plus jittered copies.
    std::vector<StageSample> work;
    std::vector<std::size_t> owner;
    const auto per_sample = static_cast<std::size_t>(cfg.initial_perturbations);
    work.reserve(survivors.size() * per_sample);
    for (std::size_t i = 0; i < survivors.size(); ++i) {
        const auto* s = survivors[i];
        const Shape placed = model.initial_shape(s->bbox);
        auto rng = make_rng(cfg.rng_seed, {0x1A17u, i});
        for (std::size_t p = 0; p < per_sample; ++p) {
            Shape init = p == 0 ? placed : detail::jitter_shape(placed, s->bbox, cfg, rng);
            work.push_back({s->image.get(), std::move(init), s->label, 1});
            owner.push_back(i);
        }
    }

    auto mean_error = [&] {
        double sum = 0.0;
        for (const auto& w : work) {
            sum += detail::normalized_error(w.current, w.target, cfg, canonical_scale);
        }
        return sum / static_cast<double>(work.size());
    };

    CascadeTrainReport rep;
    rep.survivors = survivors.size();
    rep.augmented_samples = work.size();
    const std::vector<std::uint8_t> all_on(work.size(), 1);

    for (int t = 0; t < cfg.stages; ++t) {
        StageReport sr;
        sr.error_before = mean_error();

        StageConfig sc;
        sc.trees_per_landmark = cfg.trees_per_landmark;
        sc.tree_depth = cfg.tree_depth;
        sc.radius = cfg.radius_at(t) * features.reference_face_size;
        sc.split_candidates = cfg.split_candidates;
        sc.pixel_pool = cfg.pixel_pool;
        sc.split_sample_cap = cfg.split_sample_cap;
        sc.seed = splitmix64(cfg.rng_seed ^ splitmix64(0x57A6Eu + static_cast<std::uint64_t>(t)));

        CascadeStage stage;
        stage.local = train_local_mappings(work, canonical, sc);

        const std::size_t dim = stage.local.feature_dim();
        std::vector<SparseBinaryRow> phi(work.size());
        std::vector<std::vector<LocalFrame>> frames(work.size());
        Eigen::MatrixXd targets(static_cast<Eigen::Index>(work.size()), static_cast<Eigen::Index>(2 * n_landmarks));
        parallel_for(work.size(), [&](std::size_t i) {
            frames[i] = landmark_frames(work[i].current, canonical);
            phi[i] = stage.local.binary_features(*work[i].image, frames[i]);
            for (std::size_t l = 0; l < n_landmarks; ++l) {
                const Point2 d = frames[i][l].to_canonical_offset(work[i].target[l] - work[i].current[l]);
                targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * l)) = d.x;
                targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * l + 1)) = d.y;
            }
        });
        stage.global = train_global_regression(phi, targets, all_on, dim, cfg.mu_for(dim));

        sr.residual_before = targets.squaredNorm();
        sr.ridge_objective = ridge_objective(stage.global, phi, targets, all_on);
        sr.residual_after = sr.ridge_objective - stage.global.mu * stage.global.weights.squaredNorm();

        parallel_for(work.size(), [&](std::size_t i) {
            const Eigen::VectorXd delta = stage.global.apply(phi[i]);
            for (std::size_t l = 0; l < n_landmarks; ++l) {
                const auto k = static_cast<Eigen::Index>(2 * l);
                work[i].current[l] = work[i].current[l] + frames[i][l].to_image_offset({delta(k), delta(k + 1)});
            }
        });
        sr.error_after = mean_error();
        rep.stages.push_back(sr);
        model.stages.push_back(std::move(stage));
    }
    if (report) {
        *report = std::move(rep);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Pluggable regressor interface

/// A cascaded regressor trains a model from flagged samples and predicts a
/// shape from an image and a face box.
template <typename R>
concept CascadedRegressor = requires(const R& r, std::span<const TrainingSample> samples,
                                     const typename R::Model& model, const GrayImage& img, const BoundingBox& box) {
    typename R::Model;
    { r.train(samples) } -> std::same_as<typename R::Model>;
    { r.predict(model, img, box) } -> std::same_as<Shape>;
};

/// Local binary features + global ridge regression.
struct LbfRegressor {
    using Model = CascadeModel;

    TrainConfig config;
    FeatureConfig features;

    Model train(std::span<const TrainingSample> samples) const { return train_cascade(samples, config, features); }
    Shape predict(const Model& model, const GrayImage& img, const BoundingBox& box) const
    {
        return lsr::predict(model, img, box);
    }
};

static_assert(CascadedRegressor<LbfRegressor>);

} // namespace lsr
