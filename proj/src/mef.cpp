#include "expi/mef.hpp"

#include <cmath>

#include "expi/pyramid.hpp"

namespace expi {

namespace {

// measure regularizer so flat images still rank by well-exposedness; it
// must be large enough that the product of both floored measures stays
// far above the normalization regularizer below
constexpr double kMeasureEps = 1e-3;
constexpr double kNormEps = 1e-12;

inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

} // namespace

std::vector<FloatImage> mef_weights(const std::vector<ExposureImage>& stack,
                                    const MefParams& p) {
    p.validate();
    if (stack.empty()) throw InvalidArgument("mef_weights: empty stack");
    for (const auto& img : stack) {
        img.validate();
        if (img.width != stack[0].width || img.height != stack[0].height)
            throw InvalidArgument("mef_weights: dimension mismatch");
    }
    int w = stack[0].width, h = stack[0].height;

    std::vector<FloatImage> weights;
    for (const auto& img : stack) {
        FloatImage gray(w, h, 1);
        for (std::size_t q = 0; q < std::size_t(w) * h; ++q)
            gray.data[q] = (img.data[q * 3] + img.data[q * 3 + 1] + img.data[q * 3 + 2]) /
                           (3.0 * 255.0);
        FloatImage wm(w, h, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                // contrast: absolute Laplacian response of the gray image
                double lap = gray.at(reflect101(x - 1, w), y, 0) +
                             gray.at(reflect101(x + 1, w), y, 0) +
                             gray.at(x, reflect101(y - 1, h), 0) +
                             gray.at(x, reflect101(y + 1, h), 0) - 4.0 * gray.at(x, y, 0);
                double contrast = std::fabs(lap);

                double r = img.at(x, y, 0) / 255.0;
                double g = img.at(x, y, 1) / 255.0;
                double b = img.at(x, y, 2) / 255.0;
                double mu = (r + g + b) / 3.0;
                double sat = std::sqrt(((r - mu) * (r - mu) + (g - mu) * (g - mu) +
                                        (b - mu) * (b - mu)) / 3.0);

                double s2 = 2.0 * p.wellexp_sigma * p.wellexp_sigma;
                double we = std::exp(-(r - 0.5) * (r - 0.5) / s2) *
                            std::exp(-(g - 0.5) * (g - 0.5) / s2) *
                            std::exp(-(b - 0.5) * (b - 0.5) / s2);

                wm.at(x, y, 0) = std::pow(contrast + kMeasureEps, p.contrast_exp) *
                                 std::pow(sat + kMeasureEps, p.saturation_exp) *
                                 std::pow(we, p.wellexp_exp);
            }
        weights.push_back(std::move(wm));
    }

    // per-image regularizer keeps the weights an exact partition of unity:
    // sum_i (q_i + eps) / (sum_j q_j + N eps) == 1 even where every quality
    // measure is vanishingly small
    for (std::size_t q = 0; q < std::size_t(w) * h; ++q) {
        double sum = kNormEps * double(weights.size());
        for (const auto& wm : weights) sum += wm.data[q];
        for (auto& wm : weights) wm.data[q] = (wm.data[q] + kNormEps) / sum;
    }
    return weights;
}

ExposureImage fuse_mef(const std::vector<ExposureImage>& stack, const MefParams& p) {
    std::vector<FloatImage> weights = mef_weights(stack, p);
    int w = stack[0].width, h = stack[0].height;

    int levels = p.levels;
    if (levels <= 0) levels = int(std::floor(std::log2(double(std::min(w, h))))) - 1;
    levels = std::clamp(levels, 1, max_pyramid_levels(w, h));

    std::vector<FloatImage> blended;
    for (std::size_t k = 0; k < stack.size(); ++k) {
        Pyramid lp = laplacian_pyramid(to_float(stack[k]), levels);
        Pyramid wp = gaussian_pyramid(weights[k], levels);
        if (blended.empty())
            for (const auto& lvl : lp.levels)
                blended.emplace_back(lvl.width, lvl.height, 3);
        for (int l = 0; l < levels; ++l) {
            const FloatImage& band = lp.levels[l];
            const FloatImage& wl = wp.levels[l];
            for (int y = 0; y < band.height; ++y)
                for (int x = 0; x < band.width; ++x) {
                    double wgt = wl.at(x, y, 0);
                    for (int c = 0; c < 3; ++c)
                        blended[l].at(x, y, c) += wgt * band.at(x, y, c);
                }
        }
    }
    Pyramid fused;
    fused.kind = Pyramid::Kind::laplacian;
    fused.levels = std::move(blended);
    return quantize(collapse(fused), stack[0].exposure_time);
}

} // namespace expi
