#include "expi/interp.hpp"

namespace expi {

double weight_w1(double z, const WeightParams& params) {
    if (z < params.xi_l) return 0.0;
    if (z < 55.0) {
        double h = (55.0 - z) / (55.0 - params.xi_l);
        return 1.0 - 3.0 * h * h + 2.0 * h * h * h;
    }
    return 1.0;
}

double weight_w2(double z, const WeightParams& params) {
    if (z < 200.0) return 1.0;
    if (z < params.xi_u) {
        double h = (z - 200.0) / (params.xi_u - 200.0);
        return 1.0 - 3.0 * h * h + 2.0 * h * h * h;
    }
    return 0.0;
}

FloatImage synthesize_intermediate(const ExposureImage& x1, const ExposureImage& x2,
                                   const ImfTable& imf13, const ImfTable& imf23,
                                   const WeightParams& params) {
    x1.validate();
    x2.validate();
    params.validate();
    if (x1.width != x2.width || x1.height != x2.height)
        throw InvalidArgument("synthesize_intermediate: dimension mismatch");

    FloatImage y0(x1.width, x1.height, 3);
    for (std::size_t p = 0; p < x1.pixel_count(); ++p)
        for (int c = 0; c < 3; ++c) {
            int z1 = x1.data[p * 3 + c];
            int z2 = x2.data[p * 3 + c];
            // weights come from the original codes, not the mapped values
            double w1 = weight_w1(double(z1), params);
            double w2 = weight_w2(double(z2), params);
            double m1 = imf13.map[c][z1];
            double m2 = imf23.map[c][z2];
            double ws = w1 + w2;
            y0.data[p * 3 + c] =
                ws > 0.0 ? (w1 * m1 + w2 * m2) / ws : 0.5 * (m1 + m2);
        }
    return y0;
}

} // namespace expi
