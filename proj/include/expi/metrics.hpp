#pragma once

#include <vector>

#include "expi/image.hpp"

namespace expi {

// PSNR in dB against the 255 peak; identical images report the 99.0 dB
// sentinel (also the cap for near-identical inputs).
double psnr(const FloatImage& a, const FloatImage& b);

// PSNR restricted to pixels where mask != 0 (one mask entry per pixel).
double psnr_masked(const FloatImage& a, const FloatImage& b, const std::vector<std::uint8_t>& mask);

// SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03 on the
// [0,255] scale, valid-region windowing, averaged over channels.
double ssim(const FloatImage& a, const FloatImage& b);

// Desired mean-removed patch at (x,y) for the MEF-SSIM construction:
// strongest input signal strength combined with the norm-weighted mean
// input structure. Patch values are row-major 8x8 luma.
std::vector<double> mef_desired_patch(const std::vector<FloatImage>& inputs_luma,
                                      int x, int y);

// MEF-SSIM of a fused image against its input stack: 8x8 sliding patches
// (stride 1) on luma, structural consistency against the desired patch.
double mef_ssim(const FloatImage& fused, const std::vector<ExposureImage>& inputs);

// Rec.601 luma on the [0,255] scale.
FloatImage luma(const FloatImage& img);

} // namespace expi
