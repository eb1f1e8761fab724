#pragma once

#include <lsr/appearance.hpp>
#include <lsr/error.hpp>
#include <lsr/evaluation.hpp>
#include <lsr/features.hpp>
#include <lsr/geometry.hpp>
#include <lsr/geometry_validator.hpp>
#include <lsr/ibug68.hpp>
#include <lsr/parallel.hpp>
#include <lsr/regressor.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsr {

enum class Origin : std::uint8_t { manual, predicted };

struct SampleRecord {
    std::string id;
    std::shared_ptr<const GrayImage> image;
    BoundingBox bbox;
    /// Manual annotation, or the latest prediction; empty before the first prediction.
    std::optional<Shape> label;
    Origin origin = Origin::predicted;
    std::uint8_t v = 0;
    bool scored = false;
    double a = 0.0;
    double g = 0.0;
    double score = std::numeric_limits<double>::infinity();
    /// Ground truth for diagnostics only; never used for training or selection.
    std::optional<Shape> truth;
};

/// A held-out face for monitoring.
struct ValidationSample {
    std::string id;
    std::shared_ptr<const GrayImage> image;
    BoundingBox bbox;
    Shape truth;
};

struct ReinforceConfig {
    double lambda = 1.0;
    double alpha0 = 0.5;
    double alpha_step = 0.25;
    int max_iterations = 10;
    /// On the largest per-record change of a and of g between iterations.
    double tolerance = 1e-3;
    /// Consecutive stable iterations required to stop.
    int patience = 2;
    /// Scores are floored at epsilon before the logarithm; 0 keeps log 0 = -inf.
    double epsilon = 0.0;
    /// Re-estimate manual labels as well (they stay v = 1).
    bool refit_manual = false;

    TrainConfig train;
    FeatureConfig features;

    /// Perturbation std and validity threshold in pixels; when unset,
    /// 0.1 and 0.05 of the seed's mean inter-pupil distance.
    std::optional<double> sigma;
    std::optional<double> d_t;
    std::size_t samples_per_landmark = 200;
    std::size_t bins_per_component = 8;
    double smoothing = 1.0;

    DiscoveryConfig discovery;
    /// Landmarks for combination discovery; empty selects the ibug68 default
    /// when L = 68.
    std::vector<std::size_t> stable_subset;

    void validate() const
    {
        if (!(lambda >= 0.0) || !std::isfinite(alpha0) || !(alpha_step > 0.0)) {
            throw InvalidConfig("lambda >= 0, finite alpha0 and alpha_step > 0 required");
        }
        if (max_iterations < 1 || patience < 1) {
            throw InvalidConfig("max_iterations and patience must be >= 1");
        }
        if (!(tolerance >= 0.0) || !(epsilon >= 0.0) || epsilon > 1.0) {
            throw InvalidConfig("tolerance >= 0 and epsilon in [0, 1] required");
        }
        if ((sigma && !(*sigma > 0.0)) || (d_t && !(*d_t > 0.0))) {
            throw InvalidConfig("sigma and d_t must be positive");
        }
        train.validate();
        features.validate();
    }
};

struct IterationRecord {
    int t = 0;
    double alpha = 0.0;
    std::size_t survivors = 0;
    std::size_t predicted_survivors = 0;
    double mean_a = 0.0;
    double mean_g = 0.0;
    double max_delta_a = std::numeric_limits<double>::infinity();
    double max_delta_g = std::numeric_limits<double>::infinity();
    std::optional<double> heldout_nme;
    /// Mean true NME of the predicted-origin survivors and of the whole
    /// predicted pool, when ground truth is attached.
    std::optional<double> survivor_label_error;
    std::optional<double> pool_label_error;
    std::vector<StageReport> stages;
};

struct ReinforceState {
    int t = 0;
    double alpha = 0.0;
    CascadeModel model;
    std::vector<SampleRecord> records;
    std::vector<IterationRecord> history;
    std::optional<LandmarkClassifierSet> classifiers;
    std::optional<GeometryModel> geometry;
    int stable_iterations = 0;
    bool converged = false;

    std::size_t survivor_count() const
    {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [](const SampleRecord& r) { return r.v != 0; }));
    }
    bool has_predicted() const
    {
        return std::any_of(records.begin(), records.end(), [](const SampleRecord& r) { return r.origin == Origin::predicted; });
    }
};

// ---------------------------------------------------------------------------
// Survival rule

/// -(log a + lambda log g) with a, g floored at epsilon; +inf when a term is
/// log 0. With lambda = 0 the geometry term is dropped.
inline double combined_score(double a, double g, double lambda, double epsilon = 0.0)
{
    const double aa = std::max(a, epsilon);
    const double gg = std::max(g, epsilon);
    if (!(aa > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    double s = -std::log(aa);
    if (lambda != 0.0) {
        if (!(gg > 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        s -= lambda * std::log(gg);
    }
    return s + 0.0;
}

/// v = 1 iff score < alpha (strict). Manual records always keep v = 1;
/// unscored records get v = 0.
inline void survive(std::span<SampleRecord> records, double lambda, double alpha, double epsilon = 0.0)
{
    for (auto& r : records) {
        if (r.origin == Origin::manual) {
            r.v = 1;
            continue;
        }
        if (!r.scored || !r.label) {
            r.v = 0;
            continue;
        }
        r.score = combined_score(r.a, r.g, lambda, epsilon);
        r.v = r.score < alpha ? 1 : 0;
    }
}

// ---------------------------------------------------------------------------
// Loop

namespace detail {

inline std::vector<TrainingSample> survivors_as_training(const std::vector<SampleRecord>& records)
{
    std::vector<TrainingSample> out;
    for (const auto& r : records) {
        if (r.v != 0 && r.label) {
            out.push_back({r.image, r.bbox, *r.label, 1});
        }
    }
    return out;
}

inline std::vector<std::size_t> resolve_subset(const ReinforceConfig& cfg, std::size_t n_landmarks)
{
    if (!cfg.stable_subset.empty()) {
        return cfg.stable_subset;
    }
    if (n_landmarks == ibug68::landmark_count) {
        return ibug68::stable_subset();
    }
    std::vector<std::size_t> all(n_landmarks);
    for (std::size_t i = 0; i < n_landmarks; ++i) {
        all[i] = i;
    }
    return all;
}

} // namespace detail

/// Manual records get v = 1, the rest v = 0 with no label; t = 0, alpha = alpha0.
/// When unlabeled records exist, the appearance classifiers and the geometry
/// model are trained once on the manual seed.
inline ReinforceState initialize(std::vector<SampleRecord> manual, std::vector<SampleRecord> unlabeled,
                                 const ReinforceConfig& cfg)
{
    cfg.validate();
    if (manual.empty()) {
        throw EmptySeed("at least one manually labeled sample is required");
    }
    ReinforceState st;
    st.alpha = cfg.alpha0;
    for (auto& r : manual) {
        if (!r.label || !r.image) {
            throw InvalidConfig("manual record '" + r.id + "' lacks a label or image");
        }
        r.origin = Origin::manual;
        r.v = 1;
        st.records.push_back(std::move(r));
    }
    for (auto& r : unlabeled) {
        if (!r.image) {
            throw InvalidConfig("record '" + r.id + "' lacks an image");
        }
        r.origin = Origin::predicted;
        r.v = 0;
        r.label.reset();
        r.scored = false;
        st.records.push_back(std::move(r));
    }
    if (!st.has_predicted()) {
        return st;
    }

    const auto seed = detail::survivors_as_training(st.records);
    std::vector<Shape> labels;
    for (const auto& s : seed) {
        labels.push_back(s.label);
    }
    const Shape canonical = canonical_mean(mean_shape(labels), cfg.features);
    PerturbationConfig pc;
    pc.samples_per_landmark = cfg.samples_per_landmark;
    pc.rng_seed = splitmix64(cfg.train.rng_seed ^ 0xA99Eu);
    if (!cfg.sigma || !cfg.d_t) {
        if (!cfg.train.pupils) {
            throw InvalidConfig("sigma and d_t need pupil indices when not given explicitly");
        }
        double ipd = 0.0;
        for (const auto& s : labels) {
            ipd += cfg.train.pupils->distance(s);
        }
        ipd /= static_cast<double>(labels.size());
        pc.sigma = 0.1 * ipd;
        pc.d_t = 0.05 * ipd;
    }
    if (cfg.sigma) {
        pc.sigma = *cfg.sigma;
    }
    if (cfg.d_t) {
        pc.d_t = *cfg.d_t;
    }
    st.classifiers =
        train_classifier_set(seed, canonical, pc, cfg.features, cfg.bins_per_component, cfg.smoothing);
    st.geometry = discover_combinations(labels, detail::resolve_subset(cfg, labels.front().size()), cfg.discovery);
    return st;
}

/// Recomputes a and g for every labeled record.
inline void score_records(std::span<SampleRecord> records, const LandmarkClassifierSet& clfs, const GeometryModel& geom)
{
    parallel_for(records.size(), [&](std::size_t i) {
        auto& r = records[i];
        if (!r.label) {
            r.scored = false;
            return;
        }
        r.a = appearance_score(*r.image, *r.label, clfs);
        r.g = geometry_score(*r.label, geom);
        r.scored = true;
    });
}

/// One alternation: retrain on survivors, re-predict labels, rescore, grow
/// alpha, reselect. Held-out NME is logged when `validation` is nonempty.
inline void reinforce_step(ReinforceState& st, const ReinforceConfig& cfg,
                           std::span<const ValidationSample> validation = {})
{
    const auto training = detail::survivors_as_training(st.records);
    if (training.empty()) {
        throw NoSurvivors("no surviving records");
    }
    CascadeTrainReport report;
    st.model = train_cascade(training, cfg.train, cfg.features, &report);

    std::vector<double> prev_a(st.records.size()), prev_g(st.records.size());
    std::vector<std::uint8_t> prev_scored(st.records.size());
    std::vector<std::uint8_t> prev_v(st.records.size());
    for (std::size_t i = 0; i < st.records.size(); ++i) {
        prev_a[i] = st.records[i].a;
        prev_g[i] = st.records[i].g;
        prev_scored[i] = st.records[i].scored ? 1 : 0;
        prev_v[i] = st.records[i].v;
    }

    parallel_for(st.records.size(), [&](std::size_t i) {
        auto& r = st.records[i];
        if (r.origin == Origin::predicted || cfg.refit_manual) {
            r.label = predict(st.model, *r.image, r.bbox);
        }
    });

    if (st.classifiers && st.geometry) {
        score_records(st.records, *st.classifiers, *st.geometry);
    }
    st.alpha += cfg.alpha_step;
    survive(st.records, cfg.lambda, st.alpha, cfg.epsilon);
    ++st.t;

    IterationRecord rec;
    rec.t = st.t;
    rec.alpha = st.alpha;
    rec.survivors = st.survivor_count();
    rec.stages = std::move(report.stages);
    double sum_a = 0.0, sum_g = 0.0, da = 0.0, dg = 0.0;
    double surv_err = 0.0, pool_err = 0.0;
    std::size_t n_pred = 0, n_surv_truth = 0, n_pool_truth = 0;
    bool all_prev_scored = true;
    bool same_survivors = true;
    for (std::size_t i = 0; i < st.records.size(); ++i) {
        const auto& r = st.records[i];
        same_survivors = same_survivors && r.v == prev_v[i];
        if (r.origin != Origin::predicted) {
            continue;
        }
        ++n_pred;
        if (r.v) {
            ++rec.predicted_survivors;
        }
        sum_a += r.a;
        sum_g += r.g;
        if (prev_scored[i] && r.scored) {
            da = std::max(da, std::abs(r.a - prev_a[i]));
            dg = std::max(dg, std::abs(r.g - prev_g[i]));
        } else {
            all_prev_scored = false;
        }
        if (r.truth && r.label && cfg.train.pupils) {
            const double e = nme(*r.label, *r.truth, *cfg.train.pupils);
            pool_err += e;
            ++n_pool_truth;
            if (r.v) {
                surv_err += e;
                ++n_surv_truth;
            }
        }
    }
    if (n_pred > 0) {
        rec.mean_a = sum_a / static_cast<double>(n_pred);
        rec.mean_g = sum_g / static_cast<double>(n_pred);
        if (all_prev_scored) {
            rec.max_delta_a = da;
            rec.max_delta_g = dg;
        }
    } else {
        rec.max_delta_a = 0.0;
        rec.max_delta_g = 0.0;
    }
    if (n_pool_truth > 0) {
        rec.pool_label_error = pool_err / static_cast<double>(n_pool_truth);
    }
    if (n_surv_truth > 0) {
        rec.survivor_label_error = surv_err / static_cast<double>(n_surv_truth);
    }
    if (!validation.empty() && cfg.train.pupils) {
        std::vector<double> errs(validation.size());
        parallel_for(validation.size(), [&](std::size_t i) {
            errs[i] = nme(predict(st.model, *validation[i].image, validation[i].bbox), validation[i].truth,
                          *cfg.train.pupils);
        });
        rec.heldout_nme = mean_of(errs);
    }
    const bool stable = rec.max_delta_a <= cfg.tolerance && rec.max_delta_g <= cfg.tolerance && same_survivors;
    st.stable_iterations = stable ? st.stable_iterations + 1 : 0;
    st.history.push_back(rec);
}

using IterationCallback = std::function<void(const ReinforceState&)>;

/// Iterates until the scores and the survivor set are stable for `patience`
/// iterations, or max_iterations. An infinite tolerance, or a pool without
/// predicted records, stops after the first iteration.
inline CascadeModel run(ReinforceState& st, const ReinforceConfig& cfg, std::span<const ValidationSample> validation = {},
                        const IterationCallback& on_iteration = {})
{
    cfg.validate();
    while (st.t < cfg.max_iterations) {
        reinforce_step(st, cfg, validation);
        if (on_iteration) {
            on_iteration(st);
        }
        if (std::isinf(cfg.tolerance) || !st.has_predicted() || st.stable_iterations >= cfg.patience) {
            st.converged = true;
            break;
        }
    }
    return st.model;
}

inline nlohmann::json iteration_json(const IterationRecord& r)
{
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    auto fin = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    auto train_nme = nlohmann::json::array();
    for (const auto& s : r.stages) {
        train_nme.push_back(s.error_after);
    }
    return {{"t", r.t},
            {"alpha", r.alpha},
            {"survivors", r.survivors},
            {"predicted_survivors", r.predicted_survivors},
            {"mean_a", r.mean_a},
            {"mean_g", r.mean_g},
            {"max_delta_a", fin(r.max_delta_a)},
            {"max_delta_g", fin(r.max_delta_g)},
            {"heldout_nme", opt(r.heldout_nme)},
            {"survivor_label_error", opt(r.survivor_label_error)},
            {"pool_label_error", opt(r.pool_label_error)},
            {"train_nme", std::move(train_nme)}};
}

} // namespace lsr
