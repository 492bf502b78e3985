#pragma once

#include "expi/image.hpp"
#include "expi/imf.hpp"

namespace expi {

// Thresholds for the smoothstep fusion ramps. The inner knots 55 and 200
// are fixed; xi_l and xi_u are configurable.
struct WeightParams {
    double xi_l = 25.0;  // in [0,55)
    double xi_u = 230.0; // in (200,255]

    void validate() const {
        if (!(xi_l >= 0.0 && xi_l < 55.0))
            throw InvalidArgument("WeightParams: xi_l must be in [0,55)");
        if (!(xi_u > 200.0 && xi_u <= 255.0))
            throw InvalidArgument("WeightParams: xi_u must be in (200,255]");
    }
};

// W1: 0 below xi_l, smoothstep ramp up to 1 at 55, 1 above.
double weight_w1(double z, const WeightParams& params);

// W2: 1 below 200, smoothstep ramp down to 0 at xi_u, 0 above.
double weight_w2(double z, const WeightParams& params);

// Weighted per-pixel fusion of the two mapped virtual images. W1 discounts
// under-exposed codes and W2 discounts over-exposed codes, so x1 is the
// short-exposure (dark) image and x2 the long-exposure (bright) image;
// imf13 maps dark codes to the medium exposure, imf23 maps bright codes
// down to it. Where both weights vanish the unweighted mean of the two
// mapped values is used.
FloatImage synthesize_intermediate(const ExposureImage& x1, const ExposureImage& x2,
                                   const ImfTable& imf13, const ImfTable& imf23,
                                   const WeightParams& params = {});

} // namespace expi
