#pragma once

#include <lsr/error.hpp>
#include <lsr/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace lsr {

/// Row-major grayscale image with intensities in [0, 1].
class GrayImage {
public:
    GrayImage() = default;

    GrayImage(int width, int height, float fill = 0.0f)
        : width_(width), height_(height), data_(checked_area(width, height), fill)
    {
        if (fill < 0.0f || fill > 1.0f) {
            throw InvalidConfig("image intensity outside [0,1]");
        }
    }

    GrayImage(int width, int height, std::vector<float> data)
        : width_(width), height_(height), data_(std::move(data))
    {
        if (data_.size() != checked_area(width, height)) {
            throw DimensionMismatch("image data length does not match width*height");
        }
        for (float v : data_) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                throw InvalidConfig("image intensity outside [0,1]");
            }
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<float>& data() const { return data_; }

    float operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    /// Caller keeps values inside [0, 1].
    float& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    /// Edge-replicated lookup.
    float clamped(int x, int y) const
    {
        x = std::clamp(x, 0, width_ - 1);
        y = std::clamp(y, 0, height_ - 1);
        return (*this)(x, y);
    }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    static std::size_t checked_area(int w, int h)
    {
        if (w <= 0 || h <= 0) {
            throw InvalidConfig("image dimensions must be positive");
        }
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

/// Bilinear sample at anchor + offset with edge replication.
///
/// The anchor is split into integer and fractional parts before the offset is
/// added, so shifting the anchor and the image by the same integer gives
/// bit-identical samples.
inline double sample_bilinear(const GrayImage& img, Point2 anchor, Point2 offset)
{
    const double ax = std::floor(anchor.x);
    const double ay = std::floor(anchor.y);
    const double px = (anchor.x - ax) + offset.x;
    const double py = (anchor.y - ay) + offset.y;
    const double fx = std::floor(px);
    const double fy = std::floor(py);
    const double wx = px - fx;
    const double wy = py - fy;
    const int x0 = static_cast<int>(ax) + static_cast<int>(fx);
    const int y0 = static_cast<int>(ay) + static_cast<int>(fy);
    const double v00 = img.clamped(x0, y0);
    const double v10 = img.clamped(x0 + 1, y0);
    const double v01 = img.clamped(x0, y0 + 1);
    const double v11 = img.clamped(x0 + 1, y0 + 1);
    return (1.0 - wy) * ((1.0 - wx) * v00 + wx * v10) + wy * ((1.0 - wx) * v01 + wx * v11);
}

/// Sampling frame attached to one landmark: canonical offsets are rotated and
/// scaled into the image around `origin`.
struct LocalFrame {
    Point2 origin{};
    double cos_scaled = 1.0;
    double sin_scaled = 0.0;

    static LocalFrame at(Point2 origin, double scale = 1.0, double rotation = 0.0)
    {
        return {origin, scale * std::cos(rotation), scale * std::sin(rotation)};
    }

    bool is_identity() const { return cos_scaled == 1.0 && sin_scaled == 0.0; }

    Point2 to_image_offset(Point2 canonical) const
    {
        return {cos_scaled * canonical.x - sin_scaled * canonical.y,
                sin_scaled * canonical.x + cos_scaled * canonical.y};
    }

    /// Inverse of to_image_offset.
    Point2 to_canonical_offset(Point2 image) const
    {
        const double d = cos_scaled * cos_scaled + sin_scaled * sin_scaled;
        return {(cos_scaled * image.x + sin_scaled * image.y) / d,
                (-sin_scaled * image.x + cos_scaled * image.y) / d};
    }

    double sample(const GrayImage& img, Point2 canonical) const
    {
        if (is_identity()) {
            return sample_bilinear(img, origin, canonical);
        }
        return sample_bilinear(img, origin, to_image_offset(canonical));
    }
};

} // namespace lsr
