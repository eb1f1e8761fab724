#pragma once

#include <lsr/geometry.hpp>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace lsr {

// ---------------------------------------------------------------------------
// 68-point template

/// Index conventions of the 68-point ibug markup.
namespace ibug68 {

inline constexpr std::size_t landmark_count = 68;

inline PupilPair pupils() { return {{36, 37, 38, 39, 40, 41}, {42, 43, 44, 45, 46, 47}}; }

/// Eye corners, nose, mouth corners, chin and inner brows.
inline std::vector<std::size_t> stable_subset() { return {36, 39, 42, 45, 27, 30, 31, 33, 35, 48, 54, 8, 21, 22}; }

/// Frontal template in face units: width about 1, centered near the origin,
/// y pointing down.
inline Shape template_shape()
{
    std::vector<Point2> p(landmark_count);
    for (int j = 0; j <= 16; ++j) {
        const double phi = std::numbers::pi - j * std::numbers::pi / 16.0;
        p[static_cast<std::size_t>(j)] = {0.5 * std::cos(phi), -0.1 + 0.65 * std::sin(phi)};
    }
    for (int k = 0; k < 5; ++k) {
        const double t = k / 4.0;
        const double arch = 0.04 * std::sin(std::numbers::pi * t);
        p[static_cast<std::size_t>(17 + k)] = {-0.40 + 0.32 * t, -0.25 - arch};
        p[static_cast<std::size_t>(26 - k)] = {0.40 - 0.32 * t, -0.25 - arch};
    }
    for (int k = 0; k < 4; ++k) {
        p[static_cast<std::size_t>(27 + k)] = {0.0, -0.15 + 0.25 * k / 3.0};
    }
    const double nostril_y[5] = {0.16, 0.18, 0.19, 0.18, 0.16};
    for (int k = 0; k < 5; ++k) {
        p[static_cast<std::size_t>(31 + k)] = {-0.1 + 0.05 * k, nostril_y[k]};
    }
    const Point2 left_eye[6] = {{-0.28, -0.1}, {-0.23, -0.135}, {-0.17, -0.135},
                                {-0.12, -0.1}, {-0.17, -0.065}, {-0.23, -0.065}};
    const Point2 right_eye[6] = {{0.12, -0.1}, {0.17, -0.135}, {0.23, -0.135},
                                 {0.28, -0.1}, {0.23, -0.065}, {0.17, -0.065}};
    for (int k = 0; k < 6; ++k) {
        p[static_cast<std::size_t>(36 + k)] = left_eye[k];
        p[static_cast<std::size_t>(42 + k)] = right_eye[k];
    }
    const Point2 mouth[20] = {{-0.18, 0.32}, {-0.12, 0.28},  {-0.05, 0.26}, {0.0, 0.27},    {0.05, 0.26},
                              {0.12, 0.28},  {0.18, 0.32},   {0.12, 0.37},  {0.05, 0.395},  {0.0, 0.40},
                              {-0.05, 0.395}, {-0.12, 0.37}, {-0.14, 0.32}, {-0.05, 0.305}, {0.0, 0.31},
                              {0.05, 0.305}, {0.14, 0.32},   {0.05, 0.335}, {0.0, 0.34},    {-0.05, 0.335}};
    for (int k = 0; k < 20; ++k) {
        p[static_cast<std::size_t>(48 + k)] = mouth[k];
    }
    return Shape(std::move(p));
}

inline constexpr std::size_t mode_count = 9;

/// Displacement of every landmark for a unit coefficient of deformation mode `m`.
inline std::vector<Point2> deformation_mode(const Shape& base, std::size_t m)
{
    std::vector<Point2> d(landmark_count);
    auto in = [](std::size_t i, std::size_t lo, std::size_t hi) { return i >= lo && i <= hi; };
    for (std::size_t i = 0; i < landmark_count; ++i) {
        const Point2 p = base[i];
        switch (m) {
        case 0: // jaw width
            if (in(i, 0, 16)) d[i] = {0.08 * p.x, 0.0};
            break;
        case 1: // face length below the eyes
            if (p.y > 0.0) d[i] = {0.0, 0.12 * p.y};
            break;
        case 2: // mouth opening
            if (in(i, 55, 59) || in(i, 65, 67)) d[i] = {0.0, 0.03};
            break;
        case 3: // mouth width
            if (in(i, 48, 67)) d[i] = {0.2 * p.x, 0.0};
            break;
        case 4: // smile
            if (i == 48 || i == 54 || i == 60 || i == 64) d[i] = {0.0, -0.025};
            break;
        case 5: // brow raise
            if (in(i, 17, 26)) d[i] = {0.0, -0.03};
            break;
        case 6: // eye openness
            if (i == 37 || i == 38 || i == 43 || i == 44) d[i] = {0.0, -0.012};
            if (i == 40 || i == 41 || i == 46 || i == 47) d[i] = {0.0, 0.012};
            break;
        case 7: // nose length
            if (in(i, 28, 35)) d[i] = {0.0, 0.03 * (i <= 30 ? (static_cast<double>(i) - 27.0) / 3.0 : 1.0)};
            break;
        case 8: // eye spacing
            if (in(i, 17, 26) || in(i, 36, 47)) d[i] = {p.x > 0.0 ? 0.02 : -0.02, 0.0};
            break;
        default:
            break;
        }
    }
    return d;
}

} // namespace ibug68

} // namespace lsr
