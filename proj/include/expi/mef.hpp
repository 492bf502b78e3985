#pragma once

#include <vector>

#include "expi/image.hpp"

namespace expi {

// Canonical Mertens-style fusion parameters.
struct MefParams {
    double contrast_exp = 1.0;
    double saturation_exp = 1.0;
    double wellexp_exp = 1.0;
    double wellexp_sigma = 0.2; // on the [0,1] scale
    int levels = 0;             // 0 = auto: floor(log2(min dim)) - 1

    void validate() const {
        if (contrast_exp < 0.0 || saturation_exp < 0.0 || wellexp_exp < 0.0)
            throw InvalidArgument("MefParams: exponents must be >= 0");
        if (!(wellexp_sigma > 0.0))
            throw InvalidArgument("MefParams: wellexp_sigma must be > 0");
    }
};

// Per-image scalar weight maps (contrast * saturation * well-exposedness),
// normalized per pixel with a 1e-12 regularizer.
std::vector<FloatImage> mef_weights(const std::vector<ExposureImage>& stack,
                                    const MefParams& p = {});

// Multi-scale exposure fusion: Laplacian pyramids of the inputs blended by
// Gaussian pyramids of the weights, collapsed and quantized.
ExposureImage fuse_mef(const std::vector<ExposureImage>& stack, const MefParams& p = {});

} // namespace expi
