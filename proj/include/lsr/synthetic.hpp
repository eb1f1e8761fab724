#pragma once

#include <lsr/dataset.hpp>
#include <lsr/error.hpp>
#include <lsr/geometry.hpp>
#include <lsr/ibug68.hpp>
#include <lsr/image.hpp>
#include <lsr/parallel.hpp>
#include <lsr/png_io.hpp>
#include <lsr/rng.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

namespace lsr {

// ---------------------------------------------------------------------------
// Generator

struct SyntheticFaceConfig {
    std::size_t landmarks = ibug68::landmark_count;
    /// Only "ibug68" is built in.
    std::string template_id = "ibug68";
    /// Std of each deformation-mode coefficient; per-landmark noise scales with it.
    double deformation_std = 1.0;
    double landmark_noise = 0.004;
    double rotation_std = 0.12;
    double scale_std = 0.08;
    double translation_std = 0.04;
    /// Perspective terms are drawn uniformly from [-perspective, perspective].
    double perspective = 0.08;
    double face_fraction = 0.6;
    /// Std of the bbox center and size jitter, as a fraction of the box width.
    double bbox_jitter = 0.03;
    double bbox_margin = 0.1;
    double background_clutter = 0.5;
    double noise_std = 0.02;
    std::uint64_t texture_seed = 0x7E47u;
    int image_size = 128;
    std::size_t count = 100;
    std::uint64_t rng_seed = 1;

    void validate() const
    {
        if (template_id != "ibug68" || landmarks != ibug68::landmark_count) {
            throw InvalidConfig("synthetic template must be ibug68 with 68 landmarks");
        }
        if (count < 1) {
            throw InvalidConfig("count must be >= 1");
        }
        if (!(deformation_std >= 0.0) || !(landmark_noise >= 0.0) || !(rotation_std >= 0.0) || !(scale_std >= 0.0) ||
            !(translation_std >= 0.0) || !(perspective >= 0.0) || !(bbox_jitter >= 0.0) || !(noise_std >= 0.0) ||
            !(background_clutter >= 0.0)) {
            throw InvalidConfig("synthetic jitter parameters must be nonnegative");
        }
        if (!(face_fraction > 0.0) || image_size < 16) {
            throw InvalidConfig("face_fraction must be positive and image_size >= 16");
        }
    }
};

/// Everything needed to re-render one face.
struct SyntheticFaceParams {
    std::array<double, ibug68::mode_count> modes{};
    std::vector<Point2> landmark_noise;
    double rotation = 0.0;
    double scale = 1.0;
    Point2 translation;
    Point2 perspective;
    Point2 bbox_shift;
    double bbox_scale = 1.0;
    double contrast = 1.0;
    double brightness = 0.0;
    std::uint64_t render_seed = 0;
};

struct SyntheticFace {
    SyntheticFaceParams params;
    Shape shape;
    BoundingBox bbox;
    GrayImage image;
};

inline SyntheticFaceParams draw_face_params(const SyntheticFaceConfig& cfg, std::size_t index)
{
    auto rng = make_rng(cfg.rng_seed, {0xFACEu, index});
    SyntheticFaceParams p;
    for (auto& c : p.modes) {
        c = cfg.deformation_std * standard_normal(rng);
    }
    p.landmark_noise.resize(cfg.landmarks);
    const double noise = cfg.landmark_noise * cfg.deformation_std;
    for (auto& d : p.landmark_noise) {
        d = {noise * standard_normal(rng), noise * standard_normal(rng)};
    }
    p.rotation = cfg.rotation_std * standard_normal(rng);
    p.scale = std::exp(cfg.scale_std * standard_normal(rng));
    p.translation = {cfg.translation_std * standard_normal(rng), cfg.translation_std * standard_normal(rng)};
    p.perspective = {cfg.perspective * (2.0 * uniform01(rng) - 1.0), cfg.perspective * (2.0 * uniform01(rng) - 1.0)};
    p.bbox_shift = {cfg.bbox_jitter * standard_normal(rng), cfg.bbox_jitter * standard_normal(rng)};
    p.bbox_scale = std::exp(cfg.bbox_jitter * standard_normal(rng));
    p.contrast = std::exp(0.15 * standard_normal(rng));
    p.brightness = 0.05 * standard_normal(rng);
    p.render_seed = rng();
    return p;
}

/// Face-unit point mapped by the face's homography into pixels.
inline Point2 face_to_image(const SyntheticFaceConfig& cfg, const SyntheticFaceParams& p, Point2 q)
{
    const double w = 1.0 + p.perspective.x * q.x + p.perspective.y * q.y;
    const Point2 u{q.x / w, q.y / w};
    const double c = std::cos(p.rotation);
    const double s = std::sin(p.rotation);
    const double k = p.scale * cfg.face_fraction * cfg.image_size;
    const double half = 0.5 * cfg.image_size;
    return {half + cfg.image_size * p.translation.x + k * (c * u.x - s * u.y),
            half + cfg.image_size * p.translation.y + k * (s * u.x + c * u.y)};
}

inline Shape synthetic_shape(const SyntheticFaceConfig& cfg, const SyntheticFaceParams& p)
{
    const Shape base = ibug68::template_shape();
    std::vector<Point2> pts(base.points().begin(), base.points().end());
    for (std::size_t m = 0; m < ibug68::mode_count; ++m) {
        if (p.modes[m] == 0.0) {
            continue;
        }
        const auto d = ibug68::deformation_mode(base, m);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            pts[i] = pts[i] + p.modes[m] * d[i];
        }
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i] = face_to_image(cfg, p, pts[i] + p.landmark_noise[i]);
    }
    return Shape(std::move(pts));
}

inline BoundingBox synthetic_bbox(const SyntheticFaceConfig& cfg, const SyntheticFaceParams& p, const Shape& s)
{
    const BoundingBox b = bounding_box(s, cfg.bbox_margin);
    const Point2 c = b.center() + Point2{p.bbox_shift.x * b.w, p.bbox_shift.y * b.w};
    const double w = b.w * p.bbox_scale;
    const double h = b.h * p.bbox_scale;
    return {c.x - 0.5 * w, c.y - 0.5 * h, w, h};
}

namespace detail {

struct Segment {
    Point2 a, b;
};

inline double segment_distance(Point2 q, const Segment& s)
{
    const Point2 d = s.b - s.a;
    const double len2 = squared_norm(d);
    double t = len2 > 0.0 ? ((q.x - s.a.x) * d.x + (q.y - s.a.y) * d.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(q - (s.a + t * d));
}

inline bool inside_polygon(Point2 q, const std::vector<Point2>& poly)
{
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point2 a = poly[i];
        const Point2 b = poly[j];
        if ((a.y > q.y) != (b.y > q.y) && q.x < (b.x - a.x) * (q.y - a.y) / (b.y - a.y) + a.x) {
            in = !in;
        }
    }
    return in;
}

inline void add_chain(std::vector<Segment>& out, const Shape& s, std::size_t lo, std::size_t hi, bool closed)
{
    for (std::size_t i = lo; i < hi; ++i) {
        out.push_back({s[i], s[i + 1]});
    }
    if (closed) {
        out.push_back({s[hi], s[lo]});
    }
}

} // namespace detail

/// Renders background clutter, a skin-toned face region, dark facial strokes
/// and a distinct oriented texture patch at every landmark.
inline GrayImage render_face(const SyntheticFaceConfig& cfg, const SyntheticFaceParams& p, const Shape& s)
{
    const int n = cfg.image_size;
    const double face_px = p.scale * cfg.face_fraction * n;
    auto rng = make_rng(p.render_seed);
    auto tex = make_rng(cfg.texture_seed);

    std::vector<double> img(static_cast<std::size_t>(n) * n);
    // Background: a few random sinusoids.
    std::array<std::array<double, 4>, 4> waves{};
    for (auto& w : waves) {
        w = {0.05 + 0.25 * uniform01(rng), 2.0 * std::numbers::pi * uniform01(rng), 2.0 * std::numbers::pi * uniform01(rng),
             0.5 + uniform01(rng)};
    }
    const double bg_level = 0.3 + 0.3 * uniform01(rng);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double v = bg_level;
            for (const auto& w : waves) {
                v += cfg.background_clutter * 0.08 * w[3] *
                     std::sin(w[0] * (x * std::cos(w[1]) + y * std::sin(w[1])) + w[2]);
            }
            img[static_cast<std::size_t>(y) * n + x] = v;
        }
    }

    // Face region: jaw plus a forehead arc above the brows.
    std::vector<Point2> outline;
    for (std::size_t j = 0; j <= 16; ++j) {
        outline.push_back(s[j]);
    }
    for (int k = 1; k < 8; ++k) {
        const double phi = k * std::numbers::pi / 8.0;
        outline.push_back(face_to_image(cfg, p, {0.5 * std::cos(phi), -0.1 - 0.35 * std::sin(phi)}));
    }
    const double skin = 0.72;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            if (detail::inside_polygon({x + 0.5, y + 0.5}, outline)) {
                auto& v = img[static_cast<std::size_t>(y) * n + x];
                v = 0.7 * skin + 0.3 * v;
            }
        }
    }

    // Strokes along facial features.
    std::vector<detail::Segment> strokes;
    detail::add_chain(strokes, s, 17, 21, false);
    detail::add_chain(strokes, s, 22, 26, false);
    detail::add_chain(strokes, s, 27, 30, false);
    detail::add_chain(strokes, s, 31, 35, false);
    detail::add_chain(strokes, s, 36, 41, true);
    detail::add_chain(strokes, s, 42, 47, true);
    detail::add_chain(strokes, s, 48, 59, true);
    detail::add_chain(strokes, s, 60, 67, true);
    const double stroke_w = 0.012 * face_px;
    for (const auto& seg : strokes) {
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.x, seg.b.x) - 3 * stroke_w)));
        const int x1 = std::min(n - 1, static_cast<int>(std::ceil(std::max(seg.a.x, seg.b.x) + 3 * stroke_w)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.y, seg.b.y) - 3 * stroke_w)));
        const int y1 = std::min(n - 1, static_cast<int>(std::ceil(std::max(seg.a.y, seg.b.y) + 3 * stroke_w)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double d = detail::segment_distance({static_cast<double>(x), static_cast<double>(y)}, seg);
                auto& v = img[static_cast<std::size_t>(y) * n + x];
                v -= 0.35 * std::exp(-0.5 * d * d / (stroke_w * stroke_w)) * v;
            }
        }
    }

    // Landmark patches: a dark core and an oriented grating, fixed per landmark.
    const double env = 0.03 * face_px;
    const double core = 0.01 * face_px;
    const double period = 0.045 * face_px;
    for (std::size_t l = 0; l < s.size(); ++l) {
        const double theta = 2.39996 * static_cast<double>(l) + p.rotation;
        const double amp = 0.12 + 0.08 * uniform01(tex);
        const double phase = 2.0 * std::numbers::pi * uniform01(tex);
        const double ct = std::cos(theta);
        const double st = std::sin(theta);
        const Point2 c = s[l];
        const int r = static_cast<int>(std::ceil(3.0 * env));
        const int cx = static_cast<int>(std::lround(c.x));
        const int cy = static_cast<int>(std::lround(c.y));
        for (int y = std::max(0, cy - r); y <= std::min(n - 1, cy + r); ++y) {
            for (int x = std::max(0, cx - r); x <= std::min(n - 1, cx + r); ++x) {
                const double dx = x - c.x;
                const double dy = y - c.y;
                const double d2 = dx * dx + dy * dy;
                const double u = dx * ct + dy * st;
                auto& v = img[static_cast<std::size_t>(y) * n + x];
                v += amp * std::exp(-0.5 * d2 / (env * env)) * std::sin(2.0 * std::numbers::pi * u / period + phase);
                v -= 0.25 * std::exp(-0.5 * d2 / (core * core));
            }
        }
    }

    std::vector<float> data(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = p.contrast * (img[i] - 0.5) + 0.5 + p.brightness + cfg.noise_std * standard_normal(rng);
        data[i] = dequantize_intensity(quantize_intensity(static_cast<float>(std::clamp(v, 0.0, 1.0))));
    }
    return GrayImage(n, n, std::move(data));
}

/// Face `index` of the dataset described by `cfg`; fully determined by
/// (cfg, index), so re-rendering reproduces image and landmarks exactly.
inline SyntheticFace synthesize_face(const SyntheticFaceConfig& cfg, std::size_t index)
{
    cfg.validate();
    SyntheticFace f{draw_face_params(cfg, index), Shape(ibug68::template_shape()), {}, {}};
    f.shape = synthetic_shape(cfg, f.params);
    f.bbox = synthetic_bbox(cfg, f.params, f.shape);
    f.image = render_face(cfg, f.params, f.shape);
    return f;
}

inline std::string synthetic_id(std::size_t index)
{
    std::string digits = std::to_string(index);
    return "face_" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

/// Writes images (png), exact landmarks (pts), bbox sidecars and a manifest
/// (manifest.jsonl) with every entry in the train split.
inline DatasetManifest synthesize_dataset(const SyntheticFaceConfig& cfg, const fs::path& out_dir)
{
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec) {
        throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
    }
    DatasetManifest m;
    m.landmarks = cfg.landmarks;
    m.pupils = ibug68::pupils();
    m.stable_subset = ibug68::stable_subset();
    m.root = out_dir;
    m.entries.resize(cfg.count);
    parallel_for(cfg.count, [&](std::size_t i) {
        const SyntheticFace f = synthesize_face(cfg, i);
        const std::string id = synthetic_id(i);
        const fs::path image = fs::path("images") / (id + ".png");
        const fs::path pts = fs::path("images") / (id + ".pts");
        const fs::path box = fs::path("images") / (id + ".bbox");
        write_png(out_dir / image, f.image);
        write_pts(out_dir / pts, f.shape);
        write_bbox(out_dir / box, f.bbox);
        m.entries[i] = {id, image, pts, std::nullopt, f.bbox, Split::train};
    });
    write_manifest(out_dir / "manifest.jsonl", m);
    return m;
}

} // namespace lsr
