#pragma once

#include <random>
#include <string>
#include <vector>

#include "expi/tensor.hpp"

namespace expi {

// Named view of one parameter vector and its gradient accumulator.
// Serialization and the optimizer walk these in declaration order.
struct ParamRef {
    std::string name;
    std::vector<double>* w;
    std::vector<double>* g;
};

// 2-D convolution, reflect-101 padding (k/2 per side), optional stride.
// backward() accumulates parameter gradients and returns the input gradient.
struct Conv2d {
    int in_c = 0, out_c = 0, k = 3, stride = 1;
    std::vector<double> w, b, gw, gb;

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride_ = 1);

    void init_he(std::mt19937_64& rng);
    void init_normal(std::mt19937_64& rng, double sigma);
    void init_zero();

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    std::size_t param_count() const { return w.size() + b.size(); }

  private:
    Tensor x_; // cached input
    double& wat(int oc, int ic, int ky, int kx) {
        return w[((std::size_t(oc) * in_c + ic) * k + ky) * k + kx];
    }
    double& gwat(int oc, int ic, int ky, int kx) {
        return gw[((std::size_t(oc) * in_c + ic) * k + ky) * k + kx];
    }
};

struct ReLU {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

  private:
    Tensor x_;
};

struct Sigmoid {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

  private:
    Tensor y_;
};

// Fully connected map for the channel-attention bottleneck.
struct Dense {
    int in_n = 0, out_n = 0;
    std::vector<double> w, b, gw, gb;

    Dense() = default;
    Dense(int in, int out);
    void init_he(std::mt19937_64& rng);

    std::vector<double> forward(const std::vector<double>& x);
    std::vector<double> backward(const std::vector<double>& dy);

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    std::size_t param_count() const { return w.size() + b.size(); }

  private:
    std::vector<double> x_;
};

// Channel attention: global average pool -> bottleneck -> sigmoid gate per
// channel, multiplied back onto the input features.
struct ChannelAttention {
    Dense fc1, fc2;

    ChannelAttention() = default;
    ChannelAttention(int channels, int reduction);
    void init(std::mt19937_64& rng);

    Tensor forward(const Tensor& t);
    Tensor backward(const Tensor& dy);

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    std::size_t param_count() const { return fc1.param_count() + fc2.param_count(); }
    const std::vector<double>& last_gate() const { return gate_; }

    // pushes the gate to ~1 regardless of input (identity-gate testing hook)
    void saturate_open();

  private:
    Tensor t_;
    std::vector<double> g_, a1_, r1_, a2_, gate_;
};

// Spatial attention: channel-wise max+mean pools -> conv -> sigmoid gate per
// position, multiplied back onto the input features.
struct SpatialAttention {
    Conv2d conv; // 2 -> 1

    SpatialAttention() = default;
    explicit SpatialAttention(int kernel);
    void init(std::mt19937_64& rng);

    Tensor forward(const Tensor& u);
    Tensor backward(const Tensor& dy);

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    std::size_t param_count() const { return conv.param_count(); }
    const Tensor& last_gate() const { return gate_; }

    void saturate_open();

  private:
    Tensor u_, gate_;
    std::vector<int> argmax_; // per position, channel index of the max pool
};

// Dual attention block: conv-relu-conv trunk, channel gate, spatial gate,
// block-level skip. With both gates at 1 the output is input + trunk.
struct DabBlock {
    Conv2d conv1, conv2;
    ReLU relu;
    ChannelAttention ca;
    SpatialAttention sa;

    DabBlock() = default;
    DabBlock(int channels, int kernel, int ca_reduction);
    void init(std::mt19937_64& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    Tensor last_trunk() const { return trunk_; }

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    std::size_t param_count() const;

  private:
    Tensor trunk_;
};

// Recursive residual group: n DABs, a group conv, and a group-level skip.
struct RrgBlock {
    std::vector<DabBlock> dabs;
    Conv2d conv;

    RrgBlock() = default;
    RrgBlock(int channels, int kernel, int ca_reduction, int dab_count);
    void init(std::mt19937_64& rng);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    std::size_t param_count() const;
};

} // namespace expi
