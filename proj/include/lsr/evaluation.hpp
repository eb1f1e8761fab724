#pragma once

#include <lsr/dataset.hpp>
#include <lsr/error.hpp>
#include <lsr/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace lsr {

/// Mean landmark error over the ground-truth inter-pupil distance, percent.
inline double nme(const Shape& pred, const Shape& gt, const PupilPair& pupils)
{
    if (pred.size() != gt.size()) {
        throw DimensionMismatch("nme: prediction and ground truth differ in length");
    }
    if (!pupils.valid_for(gt.size())) {
        throw InvalidConfig("nme: pupil indices out of range");
    }
    const double d = pupils.distance(gt);
    if (!(d > 0.0)) {
        throw ZeroPupilDistance("ground-truth pupils coincide");
    }
    double sum = 0.0;
    for (std::size_t l = 0; l < gt.size(); ++l) {
        sum += norm(pred[l] - gt[l]);
    }
    return 100.0 * (sum / static_cast<double>(gt.size())) / d;
}

inline double mean_of(std::span<const double> v)
{
    if (v.empty()) {
        throw EmptyInput("mean of an empty list");
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct NMEResult {
    std::string tag;
    std::vector<std::string> ids;
    std::vector<double> errors;
    double mean = 0.0;
};

inline NMEResult make_nme_result(std::string tag, std::vector<std::string> ids, std::vector<double> errors)
{
    if (ids.size() != errors.size()) {
        throw DimensionMismatch("ids and errors differ in length");
    }
    NMEResult r{std::move(tag), std::move(ids), std::move(errors), 0.0};
    r.mean = mean_of(r.errors);
    return r;
}

// ---------------------------------------------------------------------------
// Cumulative error distribution

struct CEDPoint {
    double threshold = 0.0;
    double fraction = 0.0;
};

struct CEDCurve {
    std::vector<CEDPoint> points;
};

/// 0, 0.1, ..., 15 (percent).
inline std::vector<double> default_ced_thresholds()
{
    std::vector<double> t(151);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<double>(i) / 10.0;
    }
    return t;
}

/// fraction(x) = |{e <= x}| / N.
inline CEDCurve ced_curve(std::span<const double> errors, std::span<const double> thresholds)
{
    if (errors.empty()) {
        throw EmptyInput("ced_curve: no errors");
    }
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > thresholds[i - 1])) {
            throw InvalidConfig("ced_curve: thresholds must be strictly increasing");
        }
    }
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    CEDCurve c;
    c.points.reserve(thresholds.size());
    const double n = static_cast<double>(sorted.size());
    for (double t : thresholds) {
        const auto k = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        c.points.push_back({t, static_cast<double>(k) / n});
    }
    return c;
}

/// Default grid, extended by the largest error when it lies beyond 15 so the
/// curve always reaches 1.
inline std::vector<double> ced_thresholds_for(std::span<const double> errors)
{
    auto t = default_ced_thresholds();
    if (!errors.empty()) {
        const double mx = *std::max_element(errors.begin(), errors.end());
        if (mx > t.back()) {
            t.push_back(mx);
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Rank correlation

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && v[order[j]] == v[order[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            ranks[order[k]] = r;
        }
        i = j;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        throw DimensionMismatch("pearson: lengths differ");
    }
    if (x.size() < 2) {
        throw EmptyInput("pearson: needs at least 2 pairs");
    }
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw ConstantInput("correlation is undefined for a constant variable");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        throw DimensionMismatch("spearman: lengths differ");
    }
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

struct CorrelationPair {
    std::string id;
    /// Combined discrepancy score; may be +inf.
    double score = 0.0;
    /// True label error (NME, percent).
    double error = 0.0;
};

struct CorrelationReport {
    /// Sorted by error ascending.
    std::vector<CorrelationPair> pairs;
    double spearman_rho = 0.0;
    /// Over the pairs with a finite score; NaN when undefined there.
    double pearson_r = std::numeric_limits<double>::quiet_NaN();
    std::size_t count = 0;
};

inline CorrelationReport discrepancy_error_correlation(std::vector<CorrelationPair> pairs)
{
    if (pairs.size() < 3) {
        throw EmptyInput("correlation needs at least 3 pairs");
    }
    for (const auto& p : pairs) {
        if (std::isnan(p.score) || std::isnan(p.error)) {
            throw InvalidConfig("correlation input contains NaN");
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const CorrelationPair& a, const CorrelationPair& b) { return a.error < b.error; });
    std::vector<double> s, e, fs, fe;
    for (const auto& p : pairs) {
        s.push_back(p.score);
        e.push_back(p.error);
        if (std::isfinite(p.score)) {
            fs.push_back(p.score);
            fe.push_back(p.error);
        }
    }
    CorrelationReport r;
    r.spearman_rho = spearman(s, e);
    if (fs.size() >= 3) {
        try {
            r.pearson_r = pearson(fs, fe);
        } catch (const ConstantInput&) {
        }
    }
    r.count = pairs.size();
    r.pairs = std::move(pairs);
    return r;
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_nme_csv(const fs::path& path, const NMEResult& r)
{
    std::string out = "id,nme\n";
    for (std::size_t i = 0; i < r.errors.size(); ++i) {
        out += r.ids[i] + "," + format_double(r.errors[i]) + "\n";
    }
    write_text_file(path, out);
}

inline void write_ced_csv(const fs::path& path, const CEDCurve& c)
{
    std::string out = "threshold,fraction\n";
    for (const auto& p : c.points) {
        out += format_double(p.threshold) + "," + format_double(p.fraction) + "\n";
    }
    write_text_file(path, out);
}

inline void write_correlation_csv(const fs::path& path, const CorrelationReport& r)
{
    std::string out = "id,score,error\n";
    for (const auto& p : r.pairs) {
        out += p.id + "," + format_double(p.score) + "," + format_double(p.error) + "\n";
    }
    write_text_file(path, out);
}

} // namespace lsr
