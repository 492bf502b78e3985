#pragma once

#include <cstdint>
#include <vector>

#include "expi/error.hpp"

namespace expi {

// 8-bit RGB image plus exposure-time metadata. Codes live in [0,255];
// exposure_time is in seconds and must be positive.
struct ExposureImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // interleaved RGB, width*height*3
    double exposure_time = 1.0;

    static constexpr int channels = 3;

    ExposureImage() = default;
    ExposureImage(int w, int h, double dt);

    std::size_t pixel_count() const { return std::size_t(width) * height; }

    std::uint8_t& at(int x, int y, int c) {
        return data[(std::size_t(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return data[(std::size_t(y) * width + x) * 3 + c];
    }

    void validate() const; // throws InvalidArgument on broken invariants
};

// Real-valued image on the nominal [0,255] scale. Values are not clamped;
// residuals may be negative. NaN/Inf are rejected where it matters.
struct FloatImage {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    FloatImage() = default;
    FloatImage(int w, int h, int c = 3, double fill = 0.0);

    std::size_t size() const { return data.size(); }

    double& at(int x, int y, int c) {
        return data[(std::size_t(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(std::size_t(y) * width + x) * channels + c];
    }

    bool same_shape(const FloatImage& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool all_finite() const;
};

FloatImage to_float(const ExposureImage& img);

// Round half away from zero, then clamp to [0,255]. Throws NumericError on NaN.
std::uint8_t quantize_value(double v);

ExposureImage quantize(const FloatImage& img, double exposure_time = 1.0);

} // namespace expi
