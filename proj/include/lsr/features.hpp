#pragma once

#include <lsr/error.hpp>
#include <lsr/geometry.hpp>
#include <lsr/image.hpp>
#include <lsr/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace lsr {

struct FeatureConfig {
    int patch_size = 31;
    int hog_cells = 4;
    int hog_bins = 8;
    std::vector<double> ring_radii{4.0, 8.0, 12.0};
    int points_per_ring = 8;
    int comparison_pairs = 128;
    std::uint64_t pattern_seed = 0x5EEDu;
    /// Width of the mean shape in the canonical sampling frame, in pixels.
    double reference_face_size = 100.0;

    int hog_length() const { return hog_cells * hog_cells * hog_bins; }
    int binary_length() const { return comparison_pairs; }
    int landmark_length() const { return hog_length() + binary_length(); }
    int pattern_points() const { return 1 + static_cast<int>(ring_radii.size()) * points_per_ring; }

    void validate() const
    {
        if (patch_size < 3 || patch_size % 2 == 0) {
            throw InvalidConfig("patch_size must be odd and >= 3");
        }
        if (hog_cells < 1 || hog_cells > patch_size) {
            throw InvalidConfig("hog_cells must be in [1, patch_size]");
        }
        if (hog_bins < 2) {
            throw InvalidConfig("hog_bins must be >= 2");
        }
        if (points_per_ring < 1) {
            throw InvalidConfig("points_per_ring must be >= 1");
        }
        for (std::size_t i = 0; i < ring_radii.size(); ++i) {
            if (!(ring_radii[i] > 0.0) || ring_radii[i] >= 0.5 * patch_size ||
                (i > 0 && !(ring_radii[i] > ring_radii[i - 1]))) {
                throw InvalidConfig("ring radii must be positive, strictly increasing and < patch_size/2");
            }
        }
        const long n = pattern_points();
        if (comparison_pairs < 1 || comparison_pairs > n * (n - 1) / 2) {
            throw InvalidConfig("comparison_pairs must be in [1, points*(points-1)/2]");
        }
        if (!(reference_face_size > 0.0)) {
            throw InvalidConfig("reference_face_size must be positive");
        }
    }

    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

struct Descriptor {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

// ---------------------------------------------------------------------------
// Gradient histogram

/// Per-cell orientation histograms of gradient magnitude over a square patch,
/// L2-normalized as a single block: v / sqrt(|v|^2 + eps^2).
inline std::vector<double> hog_patch(const GrayImage& img, const LocalFrame& frame, const FeatureConfig& cfg)
{
    constexpr double eps = 1e-6;
    const int n = cfg.patch_size;
    const int half = n / 2;
    const int g = n + 2;
    std::vector<double> grid(static_cast<std::size_t>(g) * g);
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            grid[static_cast<std::size_t>(r) * g + c] =
                frame.sample(img, {static_cast<double>(c - half - 1), static_cast<double>(r - half - 1)});
        }
    }
    auto at = [&](int c, int r) { return grid[static_cast<std::size_t>(r + 1) * g + (c + 1)]; };

    const int bins = cfg.hog_bins;
    const int cells = cfg.hog_cells;
    std::vector<double> hist(static_cast<std::size_t>(cfg.hog_length()), 0.0);
    for (int r = 0; r < n; ++r) {
        const int cy = r * cells / n;
        for (int c = 0; c < n; ++c) {
            const double gx = at(c + 1, r) - at(c - 1, r);
            const double gy = at(c, r + 1) - at(c, r - 1);
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) {
                continue;
            }
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) {
                theta += std::numbers::pi;
            }
            if (theta >= std::numbers::pi) {
                theta -= std::numbers::pi;
            }
            const int bin = std::min(bins - 1, static_cast<int>(theta / std::numbers::pi * bins));
            const int cx = c * cells / n;
            hist[static_cast<std::size_t>((cy * cells + cx) * bins + bin)] += mag;
        }
    }
    double ss = 0.0;
    for (double v : hist) {
        ss += v * v;
    }
    const double inv = 1.0 / std::sqrt(ss + eps * eps);
    for (double& v : hist) {
        v *= inv;
    }
    return hist;
}

inline std::vector<double> hog_patch(const GrayImage& img, Point2 center, const FeatureConfig& cfg)
{
    return hog_patch(img, LocalFrame::at(center), cfg);
}

// ---------------------------------------------------------------------------
// Ring-sampled binary descriptor

struct PatternPoint {
    Point2 offset;
    double sigma = 0.5;
};

/// Center point plus concentric rings; alternate rings are rotated by half a step.
inline std::vector<PatternPoint> sampling_pattern(const FeatureConfig& cfg)
{
    std::vector<PatternPoint> pts;
    pts.push_back({{0.0, 0.0}, 0.5});
    const int n = cfg.points_per_ring;
    for (std::size_t k = 0; k < cfg.ring_radii.size(); ++k) {
        const double r = cfg.ring_radii[k];
        const double shift = (k % 2 == 1) ? std::numbers::pi / n : 0.0;
        for (int j = 0; j < n; ++j) {
            const double a = 2.0 * std::numbers::pi * j / n + shift;
            pts.push_back({{r * std::cos(a), r * std::sin(a)}, r / 4.0});
        }
    }
    return pts;
}

/// Fixed comparison pairs, drawn once from the pattern seed.
inline std::vector<std::pair<int, int>> comparison_pairs(const FeatureConfig& cfg)
{
    const int n = cfg.pattern_points();
    std::vector<std::pair<int, int>> all;
    all.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            all.emplace_back(a, b);
        }
    }
    auto rng = make_rng(cfg.pattern_seed);
    shuffle(all, rng);
    all.resize(static_cast<std::size_t>(cfg.comparison_pairs));
    return all;
}

/// Smoothed intensity at each pattern point: a 3x3 binomial stencil whose
/// spacing grows with the ring radius.
inline std::vector<double> pattern_intensities(const GrayImage& img, const LocalFrame& frame, const FeatureConfig& cfg)
{
    static constexpr double w[3] = {0.25, 0.5, 0.25};
    const auto pattern = sampling_pattern(cfg);
    std::vector<double> out(pattern.size());
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        const auto& p = pattern[i];
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const Point2 q{p.offset.x + dx * p.sigma, p.offset.y + dy * p.sigma};
                acc += w[dx + 1] * w[dy + 1] * frame.sample(img, q);
            }
        }
        out[i] = acc;
    }
    return out;
}

/// Bit k is 1 iff the smoothed intensity at the first point of pair k is
/// strictly greater than at the second.
inline std::vector<double> binary_descriptor(const GrayImage& img, const LocalFrame& frame, const FeatureConfig& cfg)
{
    const auto values = pattern_intensities(img, frame, cfg);
    const auto pairs = comparison_pairs(cfg);
    std::vector<double> bits(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        bits[k] = values[static_cast<std::size_t>(pairs[k].first)] > values[static_cast<std::size_t>(pairs[k].second)] ? 1.0 : 0.0;
    }
    return bits;
}

inline std::vector<double> binary_descriptor(const GrayImage& img, Point2 center, const FeatureConfig& cfg)
{
    return binary_descriptor(img, LocalFrame::at(center), cfg);
}

// ---------------------------------------------------------------------------
// Shape-indexed features

/// Mean shape scaled so its width is `reference_face_size`, centered at zero.
inline Shape canonical_mean(const Shape& mean, const FeatureConfig& cfg)
{
    const Shape n = normalize_shape(mean);
    const double s = cfg.reference_face_size / shape_width(n);
    return apply_transform({s, 0.0, {}}, n);
}

/// One frame per landmark. Orientation and scale come from aligning `s` to the
/// canonical mean, so canonical pixel offsets follow the face.
inline std::vector<LocalFrame> landmark_frames(const Shape& s, const Shape& canonical)
{
    const SimilarityTransform to_canonical = procrustes_align(s, canonical);
    const double scale = 1.0 / to_canonical.scale;
    const double rot = -to_canonical.rotation;
    std::vector<LocalFrame> frames;
    frames.reserve(s.size());
    const LocalFrame proto = LocalFrame::at({}, scale, rot);
    for (const auto& p : s) {
        LocalFrame f = proto;
        f.origin = p;
        frames.push_back(f);
    }
    return frames;
}

/// Gradient histogram followed by binary bits for a single landmark.
inline Descriptor landmark_descriptor(const GrayImage& img, const LocalFrame& frame, const FeatureConfig& cfg)
{
    Descriptor d;
    d.values = hog_patch(img, frame, cfg);
    const auto bits = binary_descriptor(img, frame, cfg);
    d.values.insert(d.values.end(), bits.begin(), bits.end());
    return d;
}

/// Per-landmark descriptors sampled in the shape's canonical frame.
inline std::vector<Descriptor> landmark_descriptors(const GrayImage& img, const Shape& s, const Shape& canonical,
                                                    const FeatureConfig& cfg)
{
    const auto frames = landmark_frames(s, canonical);
    std::vector<Descriptor> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        out.push_back(landmark_descriptor(img, f, cfg));
    }
    return out;
}

/// Concatenation of the per-landmark descriptors.
inline Descriptor shape_indexed_features(const GrayImage& img, const Shape& s, const Shape& canonical,
                                         const FeatureConfig& cfg)
{
    Descriptor all;
    all.values.reserve(s.size() * static_cast<std::size_t>(cfg.landmark_length()));
    for (auto& d : landmark_descriptors(img, s, canonical, cfg)) {
        all.values.insert(all.values.end(), d.values.begin(), d.values.end());
    }
    return all;
}

} // namespace lsr
