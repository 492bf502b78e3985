#pragma once

#include <vector>

#include "expi/image.hpp"

namespace expi {

// Gaussian or Laplacian image pyramid. Level 0 has the source dimensions;
// each following level is ceil-halved. A Laplacian pyramid collapses back
// to its source exactly (same upsampling operator on both sides).
struct Pyramid {
    enum class Kind { gaussian, laplacian };
    Kind kind = Kind::gaussian;
    std::vector<FloatImage> levels;
};

// Largest level count allowed by the precondition min(w,h) >= 2^(levels-1).
int max_pyramid_levels(int width, int height);

// 5-tap [1,4,6,4,1]/16 separable blur with reflect-101 borders.
FloatImage blur5(const FloatImage& img);

// Zero-insertion upsample to (out_w, out_h) followed by the doubled 5-tap kernel.
FloatImage upsample(const FloatImage& img, int out_w, int out_h);

Pyramid gaussian_pyramid(const FloatImage& img, int levels);
Pyramid laplacian_pyramid(const FloatImage& img, int levels);
FloatImage collapse(const Pyramid& p);

} // namespace expi
