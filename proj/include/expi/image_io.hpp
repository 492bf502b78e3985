#pragma once

#include <string>

#include "expi/image.hpp"

namespace expi {

// 8-bit RGB PNG. Grayscale/palette/alpha inputs are expanded to RGB on read.
ExposureImage read_png(const std::string& path, double exposure_time = 1.0);
void write_png(const std::string& path, const ExposureImage& img);

// Binary PPM (P6), maxval 255.
ExposureImage read_ppm(const std::string& path, double exposure_time = 1.0);
void write_ppm(const std::string& path, const ExposureImage& img);

// PFM, 3-channel "PF", little-endian (scale -1.0), rows bottom-to-top.
FloatImage read_pfm(const std::string& path);
void write_pfm(const std::string& path, const FloatImage& img);

// Dispatch on extension (.png/.ppm); exposure_time attached on read.
ExposureImage read_image(const std::string& path, double exposure_time = 1.0);
void write_image(const std::string& path, const ExposureImage& img);

} // namespace expi
