#pragma once

#include <lsr/error.hpp>
#include <lsr/geometry.hpp>
#include <lsr/image.hpp>
#include <lsr/png_io.hpp>
#include <lsr/rng.hpp>

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace lsr {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v)
{
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

inline std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

inline std::vector<std::string_view> lines_of(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

} // namespace detail

// ---------------------------------------------------------------------------
// ibug .pts

/// Parses `version: 1`, `n_points: N`, `{`, N lines of `x y`, `}`.
/// Coordinates are kept as written (1-based pixel convention untouched).
inline Shape parse_pts(std::string_view text)
{
    std::vector<std::string_view> lines;
    for (auto line : detail::lines_of(text)) {
        if (!detail::split_ws(line).empty()) {
            lines.push_back(line);
        }
    }
    auto header_value = [&](std::size_t i, std::string_view key) -> std::string_view {
        if (i >= lines.size()) {
            throw MalformedFile("pts: missing '" + std::string(key) + "' line");
        }
        const auto tok = detail::split_ws(lines[i]);
        if (tok.size() != 2 || tok[0] != key) {
            throw MalformedFile("pts: expected '" + std::string(key) + " <value>'");
        }
        return tok[1];
    };
    if (header_value(0, "version:") != "1") {
        throw MalformedFile("pts: unsupported version");
    }
    const auto n_text = header_value(1, "n_points:");
    std::size_t n = 0;
    const auto res = std::from_chars(n_text.data(), n_text.data() + n_text.size(), n);
    if (res.ec != std::errc{} || res.ptr != n_text.data() + n_text.size()) {
        throw MalformedFile("pts: n_points is not a count");
    }
    if (lines.size() < 3 || detail::split_ws(lines[2]) != std::vector<std::string_view>{"{"}) {
        throw MalformedFile("pts: expected '{'");
    }
    std::vector<Point2> pts;
    std::size_t i = 3;
    for (; i < lines.size(); ++i) {
        const auto tok = detail::split_ws(lines[i]);
        if (tok.size() == 1 && tok[0] == "}") {
            break;
        }
        if (tok.size() != 2) {
            throw MalformedFile("pts: expected 'x y' on line " + std::to_string(i + 1));
        }
        const auto x = parse_double(tok[0]);
        const auto y = parse_double(tok[1]);
        if (!x || !y) {
            throw MalformedFile("pts: non-numeric coordinate on line " + std::to_string(i + 1));
        }
        pts.push_back({*x, *y});
    }
    if (i == lines.size()) {
        throw MalformedFile("pts: missing '}'");
    }
    if (i + 1 != lines.size()) {
        throw MalformedFile("pts: trailing content after '}'");
    }
    if (pts.size() != n) {
        throw MalformedFile("pts: n_points is " + std::to_string(n) + " but " + std::to_string(pts.size()) +
                            " pairs were given");
    }
    try {
        return Shape(std::move(pts));
    } catch (const InvalidShape& e) {
        throw MalformedFile(std::string("pts: ") + e.what());
    }
}

inline std::string format_pts(const Shape& s)
{
    std::string out = "version: 1\nn_points: " + std::to_string(s.size()) + "\n{\n";
    for (const auto& p : s) {
        out += format_double(p.x) + " " + format_double(p.y) + "\n";
    }
    out += "}\n";
    return out;
}

inline Shape load_pts(const fs::path& path) { return parse_pts(read_text_file(path)); }
inline void write_pts(const fs::path& path, const Shape& s) { write_text_file(path, format_pts(s)); }

// ---------------------------------------------------------------------------
// Bounding-box sidecar: one line "x y w h"

inline BoundingBox parse_bbox(std::string_view text)
{
    std::vector<double> v;
    for (auto line : detail::lines_of(text)) {
        for (auto tok : detail::split_ws(line)) {
            const auto d = parse_double(tok);
            if (!d) {
                throw MalformedFile("bbox: non-numeric value");
            }
            v.push_back(*d);
        }
    }
    if (v.size() != 4 || !(v[2] > 0.0) || !(v[3] > 0.0)) {
        throw MalformedFile("bbox: expected 'x y w h' with positive w and h");
    }
    return {v[0], v[1], v[2], v[3]};
}

inline std::string format_bbox(const BoundingBox& b)
{
    return format_double(b.x) + " " + format_double(b.y) + " " + format_double(b.w) + " " + format_double(b.h) + "\n";
}

inline BoundingBox load_bbox(const fs::path& path) { return parse_bbox(read_text_file(path)); }
inline void write_bbox(const fs::path& path, const BoundingBox& b) { write_text_file(path, format_bbox(b)); }

// ---------------------------------------------------------------------------
// Manifest

enum class Split { train, unlabeled, test };

inline std::string to_string(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::unlabeled: return "unlabeled";
    case Split::test: return "test";
    }
    return "train";
}

inline Split parse_split(std::string_view s)
{
    if (s == "train") return Split::train;
    if (s == "unlabeled") return Split::unlabeled;
    if (s == "test") return Split::test;
    throw MalformedFile("manifest: unknown split '" + std::string(s) + "'");
}

struct ManifestEntry {
    std::string id;
    fs::path image;
    /// Annotation used for training or evaluation.
    std::optional<fs::path> pts;
    /// Ground truth kept aside for diagnostics only (synthetic data).
    std::optional<fs::path> truth;
    BoundingBox bbox;
    Split split = Split::train;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::size_t landmarks = 0;
    PupilPair pupils;
    /// Landmarks used for geometry combination discovery; empty means "use the default".
    std::vector<std::size_t> stable_subset;
    std::vector<ManifestEntry> entries;
    /// Relative paths in entries resolve against this directory.
    fs::path root;

    fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : root / p; }

    std::vector<const ManifestEntry*> with_split(Split s) const
    {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : entries) {
            if (e.split == s) {
                out.push_back(&e);
            }
        }
        return out;
    }

    void validate() const
    {
        if (landmarks < Shape::min_landmarks) {
            throw MalformedFile("manifest: landmark count must be >= 5");
        }
        if (!pupils.valid_for(landmarks)) {
            throw MalformedFile("manifest: pupil indices out of range");
        }
        for (auto i : stable_subset) {
            if (i >= landmarks) {
                throw MalformedFile("manifest: stable subset index out of range");
            }
        }
        for (const auto& e : entries) {
            if (!(e.bbox.w > 0.0) || !(e.bbox.h > 0.0)) {
                throw MalformedFile("manifest: bbox of '" + e.id + "' must have positive size");
            }
        }
    }
};

namespace detail {

inline nlohmann::json entry_to_json(const ManifestEntry& e)
{
    nlohmann::json j;
    j["kind"] = "entry";
    j["id"] = e.id;
    j["image"] = e.image.generic_string();
    if (e.pts) {
        j["pts"] = e.pts->generic_string();
    }
    if (e.truth) {
        j["truth"] = e.truth->generic_string();
    }
    j["bbox"] = {e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h};
    j["split"] = to_string(e.split);
    return j;
}

} // namespace detail

/// One JSON object per line: a header record, then one record per entry.
inline std::string format_manifest(const DatasetManifest& m)
{
    nlohmann::json header;
    header["kind"] = "header";
    header["format"] = "lsr-manifest";
    header["version"] = 1;
    header["landmarks"] = m.landmarks;
    header["pupils"] = {m.pupils.left, m.pupils.right};
    header["stable_subset"] = m.stable_subset;
    std::string out = header.dump() + "\n";
    for (const auto& e : m.entries) {
        out += detail::entry_to_json(e).dump() + "\n";
    }
    return out;
}

inline DatasetManifest parse_manifest(std::string_view text, const fs::path& root)
{
    DatasetManifest m;
    m.root = root;
    bool have_header = false;
    std::size_t line_no = 0;
    for (auto line : detail::lines_of(text)) {
        ++line_no;
        if (detail::split_ws(line).empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "header") {
                m.landmarks = j.at("landmarks").get<std::size_t>();
                const auto& p = j.at("pupils");
                m.pupils.left = p.at(0).get<std::vector<std::size_t>>();
                m.pupils.right = p.at(1).get<std::vector<std::size_t>>();
                if (j.contains("stable_subset")) {
                    m.stable_subset = j.at("stable_subset").get<std::vector<std::size_t>>();
                }
                have_header = true;
            } else if (kind == "entry") {
                ManifestEntry e;
                e.id = j.at("id").get<std::string>();
                e.image = j.at("image").get<std::string>();
                if (j.contains("pts")) {
                    e.pts = fs::path(j.at("pts").get<std::string>());
                }
                if (j.contains("truth")) {
                    e.truth = fs::path(j.at("truth").get<std::string>());
                }
                const auto b = j.at("bbox").get<std::vector<double>>();
                if (b.size() != 4) {
                    throw MalformedFile("bbox needs 4 numbers");
                }
                e.bbox = {b[0], b[1], b[2], b[3]};
                e.split = parse_split(j.at("split").get<std::string>());
                m.entries.push_back(std::move(e));
            } else {
                throw MalformedFile("unknown record kind '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedFile("manifest line " + std::to_string(line_no) + ": " + ex.what());
        } catch (const MalformedFile& ex) {
            throw MalformedFile("manifest line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    if (!have_header) {
        throw MalformedFile("manifest: missing header record");
    }
    m.validate();
    return m;
}

inline DatasetManifest load_manifest(const fs::path& path)
{
    return parse_manifest(read_text_file(path), path.parent_path());
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m)
{
    write_text_file(path, format_manifest(m));
}

struct SplitManifests {
    DatasetManifest train;
    DatasetManifest unlabeled;
    DatasetManifest test;
};

/// Seeded shuffle, then the first round(r0*n) entries become train, the next
/// round(r1*n) unlabeled and the rest test.
inline SplitManifests split_manifest(const DatasetManifest& m, std::array<double, 3> ratios, std::uint64_t seed)
{
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0)) {
            throw InvalidRatios("split ratios must be nonnegative");
        }
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidRatios("split ratios must sum to 1");
    }
    const std::size_t n = m.entries.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    auto rng = make_rng(seed, {0x5B117u});
    shuffle(order, rng);
    const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n))));
    const auto n_unl =
        std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n))));

    SplitManifests out;
    for (auto* part : {&out.train, &out.unlabeled, &out.test}) {
        part->landmarks = m.landmarks;
        part->pupils = m.pupils;
        part->stable_subset = m.stable_subset;
        part->root = m.root;
    }
    for (std::size_t k = 0; k < n; ++k) {
        ManifestEntry e = m.entries[order[k]];
        if (k < n_train) {
            e.split = Split::train;
            out.train.entries.push_back(std::move(e));
        } else if (k < n_train + n_unl) {
            e.split = Split::unlabeled;
            out.unlabeled.entries.push_back(std::move(e));
        } else {
            e.split = Split::test;
            out.test.entries.push_back(std::move(e));
        }
    }
    return out;
}

} // namespace lsr
