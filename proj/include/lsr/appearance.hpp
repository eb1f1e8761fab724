#pragma once

#include <lsr/error.hpp>
#include <lsr/features.hpp>
#include <lsr/geometry.hpp>
#include <lsr/image.hpp>
#include <lsr/parallel.hpp>
#include <lsr/regressor.hpp>
#include <lsr/rng.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lsr {

struct PerturbationConfig {
    /// Std of the isotropic Gaussian perturbation, pixels.
    double sigma = 3.0;
    /// A perturbed landmark is valid iff its distance to the truth is < d_t.
    double d_t = 1.5;
    /// Draws per landmark, spread round-robin over the labeled images.
    std::size_t samples_per_landmark = 200;
    std::uint64_t rng_seed = 0;

    /// sigma = 0.1 and d_t = 0.05 of the inter-pupil distance.
    static PerturbationConfig from_pupil_distance(double ipd, std::size_t samples = 200, std::uint64_t seed = 0)
    {
        return {0.1 * ipd, 0.05 * ipd, samples, seed};
    }

    void validate() const
    {
        if (!(sigma > 0.0) || !(d_t > 0.0) || !std::isfinite(sigma) || !std::isfinite(d_t)) {
            throw InvalidConfig("sigma and d_t must be positive");
        }
        if (samples_per_landmark < 2) {
            throw InvalidConfig("samples_per_landmark must be >= 2");
        }
    }
};

struct PerturbedSample {
    std::size_t landmark = 0;
    Point2 location;
    double distance = 0.0;
    bool positive = false;
    Descriptor descriptor;
};

/// Strict: a draw exactly at d_t is negative.
inline bool perturbation_is_positive(double distance, double d_t) { return distance < d_t; }

/// The offsets l_i - l_hat drawn for one landmark, in draw order.
inline std::vector<Point2> draw_perturbations(const PerturbationConfig& cfg, std::size_t landmark)
{
    cfg.validate();
    auto rng = make_rng(cfg.rng_seed, {0xA99Eu, landmark});
    std::vector<Point2> out(cfg.samples_per_landmark);
    for (auto& d : out) {
        d.x = cfg.sigma * standard_normal(rng);
        d.y = cfg.sigma * standard_normal(rng);
    }
    return out;
}

/// Perturbs every landmark of the labeled faces and extracts descriptors at
/// the perturbed locations, in each face's canonical frame. Only samples
/// with v = 1 are used. Output is grouped by landmark, then draw order.
inline std::vector<PerturbedSample> generate_training_samples(std::span<const TrainingSample> labeled,
                                                              const Shape& canonical, const PerturbationConfig& cfg,
                                                              const FeatureConfig& features)
{
    cfg.validate();
    features.validate();
    std::vector<const TrainingSample*> faces;
    for (const auto& s : labeled) {
        if (s.v != 0) {
            faces.push_back(&s);
        }
    }
    if (faces.empty()) {
        throw EmptyInput("generate_training_samples: no labeled faces");
    }
    const std::size_t n_landmarks = canonical.size();
    for (const auto* f : faces) {
        if (f->label.size() != n_landmarks || !f->image) {
            throw DimensionMismatch("generate_training_samples: landmark count differs from the canonical shape");
        }
    }
    std::vector<std::vector<LocalFrame>> frames(faces.size());
    parallel_for(faces.size(), [&](std::size_t i) { frames[i] = landmark_frames(faces[i]->label, canonical); });

    const std::size_t per = cfg.samples_per_landmark;
    std::vector<PerturbedSample> out(n_landmarks * per);
    parallel_for(n_landmarks, [&](std::size_t l) {
        const auto offsets = draw_perturbations(cfg, l);
        for (std::size_t k = 0; k < per; ++k) {
            const std::size_t face = k % faces.size();
            LocalFrame f = frames[face][l];
            f.origin = faces[face]->label[l] + offsets[k];
            auto& s = out[l * per + k];
            s.landmark = l;
            s.location = f.origin;
            s.distance = norm(offsets[k]);
            s.positive = perturbation_is_positive(s.distance, cfg.d_t);
            s.descriptor = landmark_descriptor(*faces[face]->image, f, features);
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Naive Bayes over discretized descriptor components

enum class AppearanceClass : std::uint8_t { invalid = 0, valid = 1 };

struct LandmarkClassifier {
    /// prior[c], c = 0 invalid, 1 valid.
    std::array<double, 2> prior{0.5, 0.5};
    std::size_t bins = 8;
    /// edges[k] holds bins-1 nondecreasing cut points of component k. A value
    /// falls in bin b = number of edges strictly below it.
    std::vector<std::vector<double>> edges;
    /// conditional[c][k * bins + b] = P(component k in bin b | c).
    std::array<std::vector<double>, 2> conditional;

    std::size_t components() const { return edges.size(); }

    std::size_t bin_of(std::size_t k, double value) const
    {
        const auto& e = edges[k];
        return static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
    }

    friend bool operator==(const LandmarkClassifier&, const LandmarkClassifier&) = default;
};

struct LandmarkClassifierSet {
    FeatureConfig features;
    /// Frame reference for descriptor extraction (canonical mean shape).
    Shape canonical;
    std::vector<LandmarkClassifier> classifiers;

    std::size_t size() const { return classifiers.size(); }
    friend bool operator==(const LandmarkClassifierSet&, const LandmarkClassifierSet&) = default;
};

/// Cut points at the j/bins quantiles (j = 1..bins-1) of the pooled values.
inline std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins)
{
    std::sort(values.begin(), values.end());
    std::vector<double> e(bins - 1);
    for (std::size_t j = 1; j < bins; ++j) {
        e[j - 1] = values[j * values.size() / bins];
    }
    return e;
}

namespace detail {

inline std::array<std::size_t, 2> class_counts(std::span<const PerturbedSample* const> samples)
{
    std::array<std::size_t, 2> n{0, 0};
    for (const auto* s : samples) {
        ++n[s->positive ? 1 : 0];
    }
    return n;
}

} // namespace detail

/// Frequency estimates with fixed bin edges; Laplace count `smoothing` per bin.
inline LandmarkClassifier fit_landmark_classifier(std::span<const PerturbedSample* const> samples,
                                                  std::vector<std::vector<double>> edges, double smoothing)
{
    if (!(smoothing >= 0.0)) {
        throw InvalidConfig("smoothing must be >= 0");
    }
    const auto n = detail::class_counts(samples);
    if (n[0] == 0 || n[1] == 0) {
        throw InsufficientClass("landmark needs at least one valid and one invalid sample");
    }
    LandmarkClassifier clf;
    clf.bins = edges.empty() ? 1 : edges.front().size() + 1;
    clf.edges = std::move(edges);
    const std::size_t m = clf.components();
    for (const auto* s : samples) {
        if (s->descriptor.size() != m) {
            throw DimensionMismatch("descriptor length differs within a landmark");
        }
    }
    const double total = static_cast<double>(n[0] + n[1]);
    clf.prior = {static_cast<double>(n[0]) / total, static_cast<double>(n[1]) / total};
    for (int c = 0; c < 2; ++c) {
        clf.conditional[c].assign(m * clf.bins, smoothing);
    }
    for (const auto* s : samples) {
        auto& cond = clf.conditional[s->positive ? 1 : 0];
        for (std::size_t k = 0; k < m; ++k) {
            cond[k * clf.bins + clf.bin_of(k, s->descriptor.values[k])] += 1.0;
        }
    }
    for (int c = 0; c < 2; ++c) {
        const double denom = static_cast<double>(n[c]) + smoothing * static_cast<double>(clf.bins);
        for (double& p : clf.conditional[c]) {
            p /= denom;
        }
    }
    return clf;
}

/// Quantile edges from the landmark's samples, then frequency estimates.
inline LandmarkClassifier train_landmark_classifier(std::span<const PerturbedSample* const> samples, std::size_t bins,
                                                    double smoothing)
{
    if (bins < 2) {
        throw InvalidConfig("bins_per_component must be >= 2");
    }
    if (samples.empty()) {
        throw InsufficientClass("landmark has no samples");
    }
    const std::size_t m = samples.front()->descriptor.size();
    std::vector<std::vector<double>> edges(m);
    std::vector<double> column(samples.size());
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i]->descriptor.size() != m) {
                throw DimensionMismatch("descriptor length differs within a landmark");
            }
            column[i] = samples[i]->descriptor.values[k];
        }
        edges[k] = quantile_edges(column, bins);
    }
    return fit_landmark_classifier(samples, std::move(edges), smoothing);
}

/// One classifier per landmark index present in `samples` (0..max index).
inline std::vector<LandmarkClassifier> train_classifiers(std::span<const PerturbedSample> samples,
                                                         std::size_t bins_per_component = 8, double smoothing = 1.0)
{
    if (samples.empty()) {
        throw EmptyInput("train_classifiers: no samples");
    }
    std::size_t n_landmarks = 0;
    for (const auto& s : samples) {
        n_landmarks = std::max(n_landmarks, s.landmark + 1);
    }
    std::vector<std::vector<const PerturbedSample*>> by_landmark(n_landmarks);
    for (const auto& s : samples) {
        by_landmark[s.landmark].push_back(&s);
    }
    std::vector<LandmarkClassifier> out(n_landmarks);
    parallel_for(n_landmarks, [&](std::size_t l) {
        try {
            out[l] = train_landmark_classifier(by_landmark[l], bins_per_component, smoothing);
        } catch (const InsufficientClass& e) {
            throw InsufficientClass("landmark " + std::to_string(l) + ": " + e.what());
        }
    });
    return out;
}

/// log P(c) + sum_k log P(bin_k | c) for c = invalid, valid.
inline std::array<double, 2> log_posteriors(const LandmarkClassifier& clf, const Descriptor& p)
{
    if (p.size() != clf.components()) {
        throw DimensionMismatch("descriptor has " + std::to_string(p.size()) + " components, classifier expects " +
                                std::to_string(clf.components()));
    }
    std::array<double, 2> s{std::log(clf.prior[0]), std::log(clf.prior[1])};
    for (std::size_t k = 0; k < p.size(); ++k) {
        const std::size_t idx = k * clf.bins + clf.bin_of(k, p.values[k]);
        s[0] += std::log(clf.conditional[0][idx]);
        s[1] += std::log(clf.conditional[1][idx]);
    }
    return s;
}

/// Exact ties are invalid.
inline AppearanceClass classify_landmark(const LandmarkClassifier& clf, const Descriptor& p)
{
    const auto s = log_posteriors(clf, p);
    return s[1] > s[0] ? AppearanceClass::valid : AppearanceClass::invalid;
}

/// Perturbs the labeled faces and trains one classifier per landmark.
inline LandmarkClassifierSet train_classifier_set(std::span<const TrainingSample> labeled, const Shape& canonical,
                                                  const PerturbationConfig& cfg, const FeatureConfig& features,
                                                  std::size_t bins_per_component = 8, double smoothing = 1.0)
{
    const auto samples = generate_training_samples(labeled, canonical, cfg, features);
    LandmarkClassifierSet set;
    set.features = features;
    set.canonical = canonical;
    set.classifiers = train_classifiers(samples, bins_per_component, smoothing);
    if (set.classifiers.size() != canonical.size()) {
        throw InsufficientClass("not every landmark received samples");
    }
    return set;
}

/// Per-landmark validity of a shape on an image.
inline std::vector<AppearanceClass> classify_shape(const GrayImage& img, const Shape& shape,
                                                   const LandmarkClassifierSet& set)
{
    if (shape.size() != set.size()) {
        throw DimensionMismatch("shape length differs from the classifier count");
    }
    const auto frames = landmark_frames(shape, set.canonical);
    std::vector<AppearanceClass> out(shape.size());
    for (std::size_t l = 0; l < shape.size(); ++l) {
        out[l] = classify_landmark(set.classifiers[l], landmark_descriptor(img, frames[l], set.features));
    }
    return out;
}

/// Fraction of valid landmarks.
inline double valid_fraction(std::span<const AppearanceClass> labels)
{
    if (labels.empty()) {
        throw EmptyInput("valid_fraction: no landmarks");
    }
    const auto n = std::count(labels.begin(), labels.end(), AppearanceClass::valid);
    return static_cast<double>(n) / static_cast<double>(labels.size());
}

/// a = (#landmarks classified valid) / L.
inline double appearance_score(const GrayImage& img, const Shape& shape, const LandmarkClassifierSet& set)
{
    const auto labels = classify_shape(img, shape, set);
    return valid_fraction(labels);
}

} // namespace lsr
