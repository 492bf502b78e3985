#include "expi/image.hpp"

#include <cmath>

namespace expi {

ExposureImage::ExposureImage(int w, int h, double dt)
    : width(w), height(h), data(std::size_t(w) * h * 3, 0), exposure_time(dt) {}

void ExposureImage::validate() const {
    if (width <= 0 || height <= 0)
        throw InvalidArgument("ExposureImage: non-positive dimensions");
    if (data.size() != std::size_t(width) * height * 3)
        throw InvalidArgument("ExposureImage: data length != width*height*3");
    if (!(exposure_time > 0.0))
        throw InvalidArgument("ExposureImage: exposure_time must be > 0");
}

FloatImage::FloatImage(int w, int h, int c, double fill)
    : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

bool FloatImage::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

FloatImage to_float(const ExposureImage& img) {
    FloatImage out(img.width, img.height, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = double(img.data[i]);
    return out;
}

std::uint8_t quantize_value(double v) {
    if (std::isnan(v)) throw NumericError("quantize: NaN input");
    double r = (v >= 0.0) ? std::floor(v + 0.5) : std::ceil(v - 0.5);
    if (r < 0.0) return 0;
    if (r > 255.0) return 255;
    return std::uint8_t(r);
}

ExposureImage quantize(const FloatImage& img, double exposure_time) {
    if (img.channels != 3)
        throw InvalidArgument("quantize: expected a 3-channel image");
    ExposureImage out(img.width, img.height, exposure_time);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = quantize_value(img.data[i]);
    return out;
}

} // namespace expi
