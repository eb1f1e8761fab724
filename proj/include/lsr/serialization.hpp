#pragma once

#include <lsr/appearance.hpp>
#include <lsr/error.hpp>
#include <lsr/features.hpp>
#include <lsr/geometry.hpp>
#include <lsr/geometry_validator.hpp>
#include <lsr/regressor.hpp>

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lsr {

// Binary container, little-endian:
//   "LSRM" u32 version u32 L u32 T
//   feature config
//   if T > 0: mean shape, box shape, T stages
//   tagged sections (4-byte tag, u64 payload length, payload) ending with "END!"
// Section tags: "NBCL" (appearance classifiers), "GEOM" (geometry model).

struct ModelContainer {
    FeatureConfig features;
    /// Absent in a validators-only file.
    std::optional<CascadeModel> cascade;
    std::optional<LandmarkClassifierSet> classifiers;
    std::optional<GeometryModel> geometry;
};

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
        }
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
        }
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void size(std::size_t n)
    {
        if (n > std::numeric_limits<std::uint32_t>::max()) {
            throw InvalidConfig("container field too large");
        }
        u32(static_cast<std::uint32_t>(n));
    }
    void tag(const char (&t)[5]) { bytes_.append(t, 4); }
    void point(Point2 p)
    {
        f64(p.x);
        f64(p.y);
    }
    void raw(const std::string& s) { bytes_ += s; }

    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    /// A count whose elements occupy at least `min_bytes` each; guards allocations.
    std::size_t count(std::size_t min_bytes = 1)
    {
        const std::size_t n = u32();
        if (min_bytes > 0 && n > remaining() / min_bytes) {
            throw MalformedFile("container count exceeds remaining data");
        }
        return n;
    }
    std::string tag()
    {
        need(4);
        std::string t(data_.substr(pos_, 4));
        pos_ += 4;
        return t;
    }
    Point2 point()
    {
        const double x = f64();
        const double y = f64();
        return {x, y};
    }
    std::string_view take(std::size_t n)
    {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n) {
            throw MalformedFile("container is truncated");
        }
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

inline void write_features(ByteWriter& w, const FeatureConfig& f)
{
    w.i32(f.patch_size);
    w.i32(f.hog_cells);
    w.i32(f.hog_bins);
    w.size(f.ring_radii.size());
    for (double r : f.ring_radii) {
        w.f64(r);
    }
    w.i32(f.points_per_ring);
    w.i32(f.comparison_pairs);
    w.u64(f.pattern_seed);
    w.f64(f.reference_face_size);
}

inline FeatureConfig read_features(ByteReader& r)
{
    FeatureConfig f;
    f.patch_size = r.i32();
    f.hog_cells = r.i32();
    f.hog_bins = r.i32();
    f.ring_radii.resize(r.count(8));
    for (double& v : f.ring_radii) {
        v = r.f64();
    }
    f.points_per_ring = r.i32();
    f.comparison_pairs = r.i32();
    f.pattern_seed = r.u64();
    f.reference_face_size = r.f64();
    try {
        f.validate();
    } catch (const InvalidConfig& e) {
        throw MalformedFile(std::string("feature config: ") + e.what());
    }
    return f;
}

inline void write_shape_fixed(ByteWriter& w, const Shape& s)
{
    for (const auto& p : s) {
        w.point(p);
    }
}

inline Shape read_shape_fixed(ByteReader& r, std::size_t n)
{
    std::vector<Point2> pts(n);
    for (auto& p : pts) {
        p = r.point();
    }
    try {
        return Shape(std::move(pts));
    } catch (const InvalidShape& e) {
        throw MalformedFile(e.what());
    }
}

inline void write_stage(ByteWriter& w, const CascadeStage& s)
{
    w.i32(s.local.tree_depth);
    w.size(s.local.trees_per_landmark());
    for (const auto& forest : s.local.forests) {
        for (const auto& tree : forest) {
            for (const auto& sp : tree.splits) {
                w.point(sp.a);
                w.point(sp.b);
                w.f64(sp.threshold);
            }
            for (const auto& leaf : tree.leaf_offsets) {
                w.point(leaf);
            }
        }
    }
    const auto& W = s.global.weights;
    w.size(static_cast<std::size_t>(W.rows()));
    w.size(static_cast<std::size_t>(W.cols()));
    w.f64(s.global.mu);
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            w.f64(W(r, c));
        }
    }
}

inline CascadeStage read_stage(ByteReader& r, std::size_t n_landmarks)
{
    CascadeStage s;
    s.local.tree_depth = r.i32();
    if (s.local.tree_depth < 1 || s.local.tree_depth > 12) {
        throw MalformedFile("tree depth out of range");
    }
    const std::size_t trees = r.count(8);
    if (trees == 0) {
        throw MalformedFile("stage has no trees");
    }
    const std::size_t leaves = s.local.leaves_per_tree();
    s.local.forests.assign(n_landmarks, std::vector<RegressionTree>(trees));
    for (auto& forest : s.local.forests) {
        for (auto& tree : forest) {
            tree.splits.resize(leaves - 1);
            for (auto& sp : tree.splits) {
                sp.a = r.point();
                sp.b = r.point();
                sp.threshold = r.f64();
            }
            tree.leaf_offsets.resize(leaves);
            for (auto& leaf : tree.leaf_offsets) {
                leaf = r.point();
            }
        }
    }
    const std::size_t rows = r.count(0);
    const std::size_t cols = r.count(0);
    if (rows != 2 * n_landmarks || cols != s.local.feature_dim()) {
        throw MalformedFile("global stage dimensions do not match the local stage");
    }
    s.global.mu = r.f64();
    if (rows * cols > r.remaining() / 8) {
        throw MalformedFile("container is truncated");
    }
    s.global.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cols); ++c) {
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(rows); ++k) {
            s.global.weights(k, c) = r.f64();
        }
    }
    return s;
}

inline std::string classifier_payload(const LandmarkClassifierSet& set)
{
    ByteWriter w;
    write_features(w, set.features);
    w.size(set.canonical.size());
    write_shape_fixed(w, set.canonical);
    w.size(set.classifiers.size());
    for (const auto& c : set.classifiers) {
        w.f64(c.prior[0]);
        w.f64(c.prior[1]);
        w.size(c.bins);
        w.size(c.components());
        for (const auto& e : c.edges) {
            for (double v : e) {
                w.f64(v);
            }
        }
        for (const auto& cond : c.conditional) {
            for (double v : cond) {
                w.f64(v);
            }
        }
    }
    return w.bytes();
}

inline LandmarkClassifierSet read_classifier_payload(std::string_view payload)
{
    ByteReader r(payload);
    LandmarkClassifierSet set;
    set.features = read_features(r);
    set.canonical = read_shape_fixed(r, r.count(16));
    set.classifiers.resize(r.count(16));
    for (auto& c : set.classifiers) {
        c.prior = {r.f64(), r.f64()};
        c.bins = r.count(0);
        const std::size_t m = r.count(0);
        if (c.bins < 1 || m * (3 * c.bins - 1) > r.remaining() / 8) {
            throw MalformedFile("classifier section is truncated");
        }
        c.edges.assign(m, std::vector<double>(c.bins - 1));
        for (auto& e : c.edges) {
            for (double& v : e) {
                v = r.f64();
            }
        }
        for (auto& cond : c.conditional) {
            cond.resize(m * c.bins);
            for (double& v : cond) {
                v = r.f64();
            }
        }
    }
    if (r.remaining() != 0) {
        throw MalformedFile("trailing bytes in classifier section");
    }
    return set;
}

inline std::string geometry_payload(const GeometryModel& g)
{
    ByteWriter w;
    w.size(g.subset.size());
    for (auto i : g.subset) {
        w.size(i);
    }
    w.f64(g.range_tolerance);
    w.size(g.combinations.size());
    for (const auto& c : g.combinations) {
        w.size(c.indices.size());
        for (auto i : c.indices) {
            w.size(i);
        }
        w.f64(c.range.c_min);
        w.f64(c.range.c_max);
        w.f64(c.range.mean);
        w.f64(c.range.std);
    }
    return w.bytes();
}

inline GeometryModel read_geometry_payload(std::string_view payload)
{
    ByteReader r(payload);
    GeometryModel g;
    g.subset.resize(r.count(4));
    for (auto& i : g.subset) {
        i = r.u32();
    }
    g.range_tolerance = r.f64();
    g.combinations.resize(r.count(4 + 20 + 32));
    for (auto& c : g.combinations) {
        const std::size_t k = r.count(4);
        if (k != 5 && k != 6) {
            throw MalformedFile("combination size must be 5 or 6");
        }
        c.indices.resize(k);
        for (auto& i : c.indices) {
            i = r.u32();
        }
        c.range.c_min = r.f64();
        c.range.c_max = r.f64();
        c.range.mean = r.f64();
        c.range.std = r.f64();
    }
    if (r.remaining() != 0) {
        throw MalformedFile("trailing bytes in geometry section");
    }
    return g;
}

} // namespace detail

inline std::string serialize_container(const ModelContainer& m)
{
    detail::ByteWriter w;
    w.tag("LSRM");
    w.u32(CascadeModel::format_version);
    const bool has_cascade = m.cascade && !m.cascade->stages.empty();
    if (m.cascade && !(m.cascade->features == m.features)) {
        throw InvalidConfig("container feature config differs from the cascade's");
    }
    w.size(has_cascade ? m.cascade->landmarks() : 0);
    w.size(has_cascade ? m.cascade->stages.size() : 0);
    detail::write_features(w, m.features);
    if (has_cascade) {
        const auto& c = *m.cascade;
        if (c.box_shape.size() != c.landmarks()) {
            throw InvalidConfig("box shape and mean shape differ in length");
        }
        detail::write_shape_fixed(w, c.mean_shape);
        detail::write_shape_fixed(w, c.box_shape);
        for (const auto& s : c.stages) {
            if (s.local.landmarks() != c.landmarks()) {
                throw InvalidConfig("stage landmark count differs from the model");
            }
            detail::write_stage(w, s);
        }
    }
    auto section = [&](const char (&tag)[5], const std::string& payload) {
        w.tag(tag);
        w.u64(payload.size());
        w.raw(payload);
    };
    if (m.classifiers) {
        section("NBCL", detail::classifier_payload(*m.classifiers));
    }
    if (m.geometry) {
        section("GEOM", detail::geometry_payload(*m.geometry));
    }
    section("END!", "");
    return w.bytes();
}

inline ModelContainer deserialize_container(std::string_view bytes)
{
    detail::ByteReader r(bytes);
    if (r.tag() != "LSRM") {
        throw MalformedFile("not a model container (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != CascadeModel::format_version) {
        throw MalformedFile("unsupported container version " + std::to_string(version));
    }
    const std::size_t n_landmarks = r.u32();
    const std::size_t n_stages = r.u32();
    ModelContainer m;
    m.features = detail::read_features(r);
    if (n_stages > 0) {
        if (n_landmarks < Shape::min_landmarks || n_landmarks > r.remaining() / 32) {
            throw MalformedFile("landmark count out of range");
        }
        CascadeModel c;
        c.features = m.features;
        c.mean_shape = detail::read_shape_fixed(r, n_landmarks);
        c.box_shape = detail::read_shape_fixed(r, n_landmarks);
        for (std::size_t t = 0; t < n_stages; ++t) {
            c.stages.push_back(detail::read_stage(r, n_landmarks));
        }
        m.cascade = std::move(c);
    }
    while (true) {
        const std::string tag = r.tag();
        const std::uint64_t len = r.u64();
        if (len > r.remaining()) {
            throw MalformedFile("section '" + tag + "' is truncated");
        }
        const auto payload = r.take(static_cast<std::size_t>(len));
        if (tag == "END!") {
            break;
        }
        if (tag == "NBCL") {
            m.classifiers = detail::read_classifier_payload(payload);
        } else if (tag == "GEOM") {
            m.geometry = detail::read_geometry_payload(payload);
        }
        // Unknown sections are skipped.
    }
    if (r.remaining() != 0) {
        throw MalformedFile("trailing bytes after end marker");
    }
    return m;
}

inline void save_container(const std::filesystem::path& path, const ModelContainer& m)
{
    const std::string bytes = serialize_container(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

inline ModelContainer load_container(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize_container(bytes);
}

inline void save_model(const std::filesystem::path& path, const CascadeModel& model)
{
    save_container(path, {model.features, model, std::nullopt, std::nullopt});
}

inline CascadeModel load_model(const std::filesystem::path& path)
{
    auto c = load_container(path);
    if (!c.cascade) {
        throw MalformedFile(path.string() + " holds no cascade");
    }
    return std::move(*c.cascade);
}

// ---------------------------------------------------------------------------
// Structured-text export. Doubles use shortest round-trip text; non-finite
// values are written as the strings "inf", "-inf" and "nan".

namespace detail {

using nlohmann::json;

inline json num(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v > 0 ? "inf" : "-inf";
}

inline double num(const json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw MalformedFile("bad number '" + s + "'");
    }
    return j.get<double>();
}

inline json shape_json(const Shape& s)
{
    json a = json::array();
    for (const auto& p : s) {
        a.push_back({num(p.x), num(p.y)});
    }
    return a;
}

inline Shape shape_from_json(const json& j)
{
    std::vector<Point2> pts;
    for (const auto& p : j) {
        pts.push_back({num(p.at(0)), num(p.at(1))});
    }
    return Shape(std::move(pts));
}

inline json features_json(const FeatureConfig& f)
{
    json j;
    j["patch_size"] = f.patch_size;
    j["hog_cells"] = f.hog_cells;
    j["hog_bins"] = f.hog_bins;
    j["ring_radii"] = json::array();
    for (double r : f.ring_radii) {
        j["ring_radii"].push_back(num(r));
    }
    j["points_per_ring"] = f.points_per_ring;
    j["comparison_pairs"] = f.comparison_pairs;
    j["pattern_seed"] = f.pattern_seed;
    j["reference_face_size"] = num(f.reference_face_size);
    return j;
}

inline FeatureConfig features_from_json(const json& j)
{
    FeatureConfig f;
    f.patch_size = j.at("patch_size").get<int>();
    f.hog_cells = j.at("hog_cells").get<int>();
    f.hog_bins = j.at("hog_bins").get<int>();
    f.ring_radii.clear();
    for (const auto& r : j.at("ring_radii")) {
        f.ring_radii.push_back(num(r));
    }
    f.points_per_ring = j.at("points_per_ring").get<int>();
    f.comparison_pairs = j.at("comparison_pairs").get<int>();
    f.pattern_seed = j.at("pattern_seed").get<std::uint64_t>();
    f.reference_face_size = num(j.at("reference_face_size"));
    return f;
}

inline json doubles_json(const std::vector<double>& v)
{
    json a = json::array();
    for (double x : v) {
        a.push_back(num(x));
    }
    return a;
}

inline std::vector<double> doubles_from_json(const json& j)
{
    std::vector<double> v;
    for (const auto& x : j) {
        v.push_back(num(x));
    }
    return v;
}

} // namespace detail

inline nlohmann::json container_to_json(const ModelContainer& m)
{
    using detail::json;
    using detail::num;
    json j;
    j["format"] = "LSRM";
    j["version"] = CascadeModel::format_version;
    j["features"] = detail::features_json(m.features);
    if (m.cascade && !m.cascade->stages.empty()) {
        const auto& c = *m.cascade;
        json cj;
        cj["mean_shape"] = detail::shape_json(c.mean_shape);
        cj["box_shape"] = detail::shape_json(c.box_shape);
        cj["stages"] = json::array();
        for (const auto& s : c.stages) {
            json sj;
            sj["tree_depth"] = s.local.tree_depth;
            sj["forests"] = json::array();
            for (const auto& forest : s.local.forests) {
                json fj = json::array();
                for (const auto& tree : forest) {
                    json tj;
                    tj["splits"] = json::array();
                    for (const auto& sp : tree.splits) {
                        tj["splits"].push_back({num(sp.a.x), num(sp.a.y), num(sp.b.x), num(sp.b.y), num(sp.threshold)});
                    }
                    tj["leaves"] = json::array();
                    for (const auto& leaf : tree.leaf_offsets) {
                        tj["leaves"].push_back({num(leaf.x), num(leaf.y)});
                    }
                    fj.push_back(std::move(tj));
                }
                sj["forests"].push_back(std::move(fj));
            }
            const auto& W = s.global.weights;
            sj["mu"] = num(s.global.mu);
            sj["rows"] = W.rows();
            sj["cols"] = W.cols();
            json wj = json::array();
            for (Eigen::Index r = 0; r < W.rows(); ++r) {
                json row = json::array();
                for (Eigen::Index col = 0; col < W.cols(); ++col) {
                    row.push_back(num(W(r, col)));
                }
                wj.push_back(std::move(row));
            }
            sj["weights"] = std::move(wj);
            cj["stages"].push_back(std::move(sj));
        }
        j["cascade"] = std::move(cj);
    }
    if (m.classifiers) {
        const auto& set = *m.classifiers;
        json nj;
        nj["features"] = detail::features_json(set.features);
        nj["canonical"] = detail::shape_json(set.canonical);
        nj["classifiers"] = json::array();
        for (const auto& c : set.classifiers) {
            json cj;
            cj["prior"] = {num(c.prior[0]), num(c.prior[1])};
            cj["bins"] = c.bins;
            cj["edges"] = json::array();
            for (const auto& e : c.edges) {
                cj["edges"].push_back(detail::doubles_json(e));
            }
            cj["conditional"] = {detail::doubles_json(c.conditional[0]), detail::doubles_json(c.conditional[1])};
            nj["classifiers"].push_back(std::move(cj));
        }
        j["appearance"] = std::move(nj);
    }
    if (m.geometry) {
        const auto& g = *m.geometry;
        json gj;
        gj["subset"] = g.subset;
        gj["range_tolerance"] = num(g.range_tolerance);
        gj["combinations"] = json::array();
        for (const auto& c : g.combinations) {
            gj["combinations"].push_back({{"indices", c.indices},
                                          {"c_min", num(c.range.c_min)},
                                          {"c_max", num(c.range.c_max)},
                                          {"mean", num(c.range.mean)},
                                          {"std", num(c.range.std)}});
        }
        j["geometry"] = std::move(gj);
    }
    return j;
}

inline ModelContainer container_from_json(const nlohmann::json& j)
{
    using detail::num;
    try {
        if (j.at("format").get<std::string>() != "LSRM" || j.at("version").get<std::uint32_t>() != CascadeModel::format_version) {
            throw MalformedFile("unsupported structured export");
        }
        ModelContainer m;
        m.features = detail::features_from_json(j.at("features"));
        if (j.contains("cascade")) {
            const auto& cj = j.at("cascade");
            CascadeModel c;
            c.features = m.features;
            c.mean_shape = detail::shape_from_json(cj.at("mean_shape"));
            c.box_shape = detail::shape_from_json(cj.at("box_shape"));
            for (const auto& sj : cj.at("stages")) {
                CascadeStage s;
                s.local.tree_depth = sj.at("tree_depth").get<int>();
                for (const auto& fj : sj.at("forests")) {
                    std::vector<RegressionTree> forest;
                    for (const auto& tj : fj) {
                        RegressionTree tree;
                        for (const auto& sp : tj.at("splits")) {
                            tree.splits.push_back({{num(sp.at(0)), num(sp.at(1))}, {num(sp.at(2)), num(sp.at(3))}, num(sp.at(4))});
                        }
                        for (const auto& leaf : tj.at("leaves")) {
                            tree.leaf_offsets.push_back({num(leaf.at(0)), num(leaf.at(1))});
                        }
                        forest.push_back(std::move(tree));
                    }
                    s.local.forests.push_back(std::move(forest));
                }
                s.global.mu = num(sj.at("mu"));
                const auto rows = sj.at("rows").get<Eigen::Index>();
                const auto cols = sj.at("cols").get<Eigen::Index>();
                s.global.weights.resize(rows, cols);
                const auto& wj = sj.at("weights");
                for (Eigen::Index r = 0; r < rows; ++r) {
                    for (Eigen::Index col = 0; col < cols; ++col) {
                        s.global.weights(r, col) = num(wj.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(col)));
                    }
                }
                c.stages.push_back(std::move(s));
            }
            m.cascade = std::move(c);
        }
        if (j.contains("appearance")) {
            const auto& nj = j.at("appearance");
            LandmarkClassifierSet set;
            set.features = detail::features_from_json(nj.at("features"));
            set.canonical = detail::shape_from_json(nj.at("canonical"));
            for (const auto& cj : nj.at("classifiers")) {
                LandmarkClassifier c;
                c.prior = {num(cj.at("prior").at(0)), num(cj.at("prior").at(1))};
                c.bins = cj.at("bins").get<std::size_t>();
                for (const auto& e : cj.at("edges")) {
                    c.edges.push_back(detail::doubles_from_json(e));
                }
                c.conditional[0] = detail::doubles_from_json(cj.at("conditional").at(0));
                c.conditional[1] = detail::doubles_from_json(cj.at("conditional").at(1));
                set.classifiers.push_back(std::move(c));
            }
            m.classifiers = std::move(set);
        }
        if (j.contains("geometry")) {
            const auto& gj = j.at("geometry");
            GeometryModel g;
            g.subset = gj.at("subset").get<std::vector<std::size_t>>();
            g.range_tolerance = num(gj.at("range_tolerance"));
            for (const auto& cj : gj.at("combinations")) {
                LandmarkCombination c;
                c.indices = cj.at("indices").get<std::vector<std::size_t>>();
                c.range = {num(cj.at("c_min")), num(cj.at("c_max")), num(cj.at("mean")), num(cj.at("std"))};
                g.combinations.push_back(std::move(c));
            }
            m.geometry = std::move(g);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFile(std::string("structured export: ") + e.what());
    } catch (const InvalidShape& e) {
        throw MalformedFile(std::string("structured export: ") + e.what());
    }
}

} // namespace lsr
