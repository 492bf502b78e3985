#pragma once

#include <optional>

#include "expi/image.hpp"
#include "expi/layers.hpp"

namespace expi {

// Hybrid L1/L2 transition point, stored on the [0,255] code scale
// (5/255 on the unit scale).
struct PsiParams {
    double c = 5.0;

    void validate() const {
        if (!(c > 0.0)) throw InvalidArgument("PsiParams: c must be > 0");
    }
};

struct LossWeights {
    double w_c = 0.01;
    double w_f = 0.01;

    void validate() const {
        if (w_c < 0.0 || w_f < 0.0)
            throw InvalidArgument("LossWeights: weights must be non-negative");
    }
};

// psi(z) = |z| for |z| > c, (z^2 + c^2)/(2c) otherwise. Continuous with
// continuous derivative psi'(z) = sign(z) outside [-c,c], z/c inside.
double psi(double z, const PsiParams& p);
double psi_prime(double z, const PsiParams& p);

// Fixed-seed convolutional feature extractor standing in for a pretrained
// network: three conv layers with tanh between them and 2x downsampling
// after the first; feature maps are taken before the activation. Kernels
// are scaled so layer-1 outputs are O(1) for code-scale inputs.
class FeatureExtractor {
  public:
    explicit FeatureExtractor(std::uint64_t seed = 2024);

    // custom stack (testing hook); layers applied in order, tanh between
    explicit FeatureExtractor(std::vector<Conv2d> layers);

    // pre-activation feature maps of every layer
    std::vector<Tensor> features(const FloatImage& img) const;

    // mean squared feature difference averaged over layers; optionally the
    // gradient with respect to `prediction`
    double loss(const FloatImage& y, const FloatImage& prediction,
                FloatImage* grad_prediction = nullptr) const;

  private:
    mutable std::vector<Conv2d> layers_;
};

// Mean of psi over pixels x channels of (y - y0 - residual). The gradient
// output, when requested, is with respect to `residual` (equivalently the
// prediction y0 + residual, up to sign conventions handled here).
double reconstruction_loss(const FloatImage& y, const FloatImage& y0,
                           const FloatImage& residual, const PsiParams& p,
                           FloatImage* grad_residual = nullptr);

// Mean absolute difference.
double l1_loss(const FloatImage& y, const FloatImage& prediction,
               FloatImage* grad_prediction = nullptr);

// Root-mean-square difference.
double l2_loss(const FloatImage& y, const FloatImage& prediction,
               FloatImage* grad_prediction = nullptr);

// Mean per-pixel angle between the RGB vectors of y and prediction.
// Vectors with norm < 1e-6 contribute angle 0.
double color_loss(const FloatImage& y, const FloatImage& prediction,
                  FloatImage* grad_prediction = nullptr);

double feature_loss(const FeatureExtractor& fx, const FloatImage& y,
                    const FloatImage& prediction,
                    FloatImage* grad_prediction = nullptr);

struct LossBreakdown {
    double l_r = 0.0;
    double l_c = 0.0;
    double l_f = 0.0;
    double l_d = 0.0;
};

// L_d = L_r + w_c L_c + w_f L_f with prediction = y0 + residual. The
// extractor may be null when w_f is zero.
LossBreakdown composite_loss(const FloatImage& y, const FloatImage& y0,
                             const FloatImage& residual, const PsiParams& p,
                             const LossWeights& w, const FeatureExtractor* fx,
                             FloatImage* grad_residual = nullptr);

} // namespace expi
