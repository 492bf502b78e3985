#pragma once

#include <string>
#include <vector>

#include "expi/layers.hpp"

namespace expi {

// Desk-scale configuration of the residual refinement network.
struct NetConfig {
    int rrg_count = 2;
    int dabs_per_rrg = 2;
    int feature_channels = 16;
    int kernel_size = 3;
    int ca_reduction = 4;
    std::uint64_t seed = 1;
    double learning_rate = 1e-4;
    int epochs = 20;
    int patch_size = 64;
    int batch_size = 8;

    void validate() const;
};

// Residual refinement network: y0/255 in, residual (unit scale) out.
// The final conv is zero-initialized so an untrained net is the identity
// refinement.
class RefineNet {
  public:
    RefineNet() = default;
    explicit RefineNet(const NetConfig& cfg);

    Tensor forward(const Tensor& y0_unit);
    Tensor backward(const Tensor& dresidual); // returns d(input), accumulates grads

    std::vector<ParamRef> params();
    std::size_t param_count() const;
    void zero_grad();

    const NetConfig& config() const { return cfg_; }

    Conv2d conv_in;
    std::vector<RrgBlock> rrgs;
    Conv2d conv_out;

  private:
    NetConfig cfg_;
    Tensor f0_; // shallow features cached for the global skip
};

// Direct-prediction baseline: x1 and x2 go through separate input convs,
// the concatenated features share the same trunk; output is the prediction
// itself (unit scale), not a residual. Parameter count matches RefineNet.
class DirectNet {
  public:
    DirectNet() = default;
    explicit DirectNet(const NetConfig& cfg);

    Tensor forward(const Tensor& x1_unit, const Tensor& x2_unit);
    Tensor backward(const Tensor& dprediction);

    std::vector<ParamRef> params();
    std::size_t param_count() const;
    void zero_grad();

    const NetConfig& config() const { return cfg_; }

    Conv2d conv_in_a, conv_in_b;
    std::vector<RrgBlock> rrgs;
    Conv2d conv_out;

  private:
    NetConfig cfg_;
    Tensor f0_;
};

// Little-endian binary model file: magic "RFN1", config block, parameter
// tensors in declaration order as float32.
void save_refinenet(const std::string& path, RefineNet& net);
RefineNet load_refinenet(const std::string& path);

// y_hat = clamp(y0 + 255 * f(y0/255), 0, 255). Images larger than the tile
// are processed in 128-pixel tiles with 16-pixel overlap and linear
// feathering.
FloatImage apply_refinement(RefineNet& net, const FloatImage& y0);

} // namespace expi
