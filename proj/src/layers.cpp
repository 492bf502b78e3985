#include "expi/layers.hpp"

#include <cmath>

namespace expi {

namespace {

inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

} // namespace

Tensor tensor_from_image(const FloatImage& img, double scale) {
    if (img.channels != 3) throw InvalidArgument("tensor_from_image: expected 3 channels");
    Tensor t(3, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = img.at(x, y, c) * scale;
    return t;
}

FloatImage image_from_tensor(const Tensor& t, double scale) {
    if (t.c != 3) throw InvalidArgument("image_from_tensor: expected 3 channels");
    FloatImage img(t.w, t.h, 3);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = t.at(c, y, x) * scale;
    return img;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_)
    : in_c(in_channels), out_c(out_channels), k(kernel), stride(stride_),
      w(std::size_t(out_channels) * in_channels * kernel * kernel, 0.0),
      b(out_channels, 0.0), gw(w.size(), 0.0), gb(b.size(), 0.0) {}

void Conv2d::init_he(std::mt19937_64& rng) {
    double sigma = std::sqrt(2.0 / (double(in_c) * k * k));
    init_normal(rng, sigma);
}

void Conv2d::init_normal(std::mt19937_64& rng, double sigma) {
    std::normal_distribution<double> n(0.0, sigma);
    for (double& x : w) x = n(rng);
    for (double& x : b) x = 0.0;
}

void Conv2d::init_zero() {
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(b.begin(), b.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c != in_c) throw InvalidArgument("Conv2d: channel mismatch");
    x_ = x;
    int pad = k / 2;
    int ho = (x.h + 2 * pad - k) / stride + 1;
    int wo = (x.w + 2 * pad - k) / stride + 1;
    Tensor y(out_c, ho, wo);
    for (int oc = 0; oc < out_c; ++oc)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = b[oc];
                for (int ic = 0; ic < in_c; ++ic)
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = reflect101(oy * stride + ky - pad, x.h);
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = reflect101(ox * stride + kx - pad, x.w);
                            acc += wat(oc, ic, ky, kx) * x.at(ic, iy, ix);
                        }
                    }
                y.at(oc, oy, ox) = acc;
            }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    int pad = k / 2;
    Tensor dx(x_.c, x_.h, x_.w);
    for (int oc = 0; oc < out_c; ++oc)
        for (int oy = 0; oy < dy.h; ++oy)
            for (int ox = 0; ox < dy.w; ++ox) {
                double g = dy.at(oc, oy, ox);
                gb[oc] += g;
                for (int ic = 0; ic < in_c; ++ic)
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = reflect101(oy * stride + ky - pad, x_.h);
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = reflect101(ox * stride + kx - pad, x_.w);
                            gwat(oc, ic, ky, kx) += g * x_.at(ic, iy, ix);
                            dx.at(ic, iy, ix) += g * wat(oc, ic, ky, kx);
                        }
                    }
            }
    return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (double& v : y.v) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
        if (x_.v[i] <= 0.0) dx.v[i] = 0.0;
    return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
    y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
        dx.v[i] *= y_.v[i] * (1.0 - y_.v[i]);
    return dx;
}

// ----------------------------------------------------------------- Dense

Dense::Dense(int in, int out)
    : in_n(in), out_n(out), w(std::size_t(in) * out, 0.0), b(out, 0.0),
      gw(w.size(), 0.0), gb(b.size(), 0.0) {}

void Dense::init_he(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / in_n));
    for (double& x : w) x = n(rng);
}

std::vector<double> Dense::forward(const std::vector<double>& x) {
    x_ = x;
    std::vector<double> y(out_n);
    for (int o = 0; o < out_n; ++o) {
        double acc = b[o];
        for (int i = 0; i < in_n; ++i) acc += w[std::size_t(o) * in_n + i] * x[i];
        y[o] = acc;
    }
    return y;
}

std::vector<double> Dense::backward(const std::vector<double>& dy) {
    std::vector<double> dx(in_n, 0.0);
    for (int o = 0; o < out_n; ++o) {
        gb[o] += dy[o];
        for (int i = 0; i < in_n; ++i) {
            gw[std::size_t(o) * in_n + i] += dy[o] * x_[i];
            dx[i] += w[std::size_t(o) * in_n + i] * dy[o];
        }
    }
    return dx;
}

void Dense::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
}

// ------------------------------------------------------- ChannelAttention

ChannelAttention::ChannelAttention(int channels, int reduction)
    : fc1(channels, channels / reduction), fc2(channels / reduction, channels) {
    if (channels % reduction != 0)
        throw InvalidArgument("ChannelAttention: channels not divisible by reduction");
}

void ChannelAttention::init(std::mt19937_64& rng) {
    fc1.init_he(rng);
    fc2.init_he(rng);
}

void ChannelAttention::saturate_open() {
    std::fill(fc2.w.begin(), fc2.w.end(), 0.0);
    std::fill(fc2.b.begin(), fc2.b.end(), 50.0); // sigmoid(50) ~ 1
}

Tensor ChannelAttention::forward(const Tensor& t) {
    t_ = t;
    double inv_hw = 1.0 / (double(t.h) * t.w);
    g_.assign(t.c, 0.0);
    for (int c = 0; c < t.c; ++c) {
        double s = 0.0;
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) s += t.at(c, y, x);
        g_[c] = s * inv_hw;
    }
    a1_ = fc1.forward(g_);
    r1_ = a1_;
    for (double& v : r1_) v = v > 0.0 ? v : 0.0;
    a2_ = fc2.forward(r1_);
    gate_ = a2_;
    for (double& v : gate_) v = 1.0 / (1.0 + std::exp(-v));
    Tensor y = t;
    for (int c = 0; c < t.c; ++c)
        for (int i = 0; i < t.h * t.w; ++i)
            y.v[std::size_t(c) * t.h * t.w + i] *= gate_[c];
    return y;
}

Tensor ChannelAttention::backward(const Tensor& dy) {
    int hw = t_.h * t_.w;
    Tensor dt = dy;
    std::vector<double> dgate(t_.c, 0.0);
    for (int c = 0; c < t_.c; ++c) {
        double acc = 0.0;
        for (int i = 0; i < hw; ++i) {
            std::size_t idx = std::size_t(c) * hw + i;
            acc += dy.v[idx] * t_.v[idx];
            dt.v[idx] = dy.v[idx] * gate_[c];
        }
        dgate[c] = acc;
    }
    std::vector<double> da2(t_.c);
    for (int c = 0; c < t_.c; ++c) da2[c] = dgate[c] * gate_[c] * (1.0 - gate_[c]);
    std::vector<double> dr1 = fc2.backward(da2);
    for (std::size_t i = 0; i < dr1.size(); ++i)
        if (a1_[i] <= 0.0) dr1[i] = 0.0;
    std::vector<double> dg = fc1.backward(dr1);
    double inv_hw = 1.0 / double(hw);
    for (int c = 0; c < t_.c; ++c) {
        double add = dg[c] * inv_hw;
        for (int i = 0; i < hw; ++i) dt.v[std::size_t(c) * hw + i] += add;
    }
    return dt;
}

void ChannelAttention::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

// ------------------------------------------------------- SpatialAttention

SpatialAttention::SpatialAttention(int kernel) : conv(2, 1, kernel, 1) {}

void SpatialAttention::init(std::mt19937_64& rng) {
    conv.init_he(rng);
}

void SpatialAttention::saturate_open() {
    conv.init_zero();
    conv.b[0] = 50.0;
}

Tensor SpatialAttention::forward(const Tensor& u) {
    u_ = u;
    int hw = u.h * u.w;
    Tensor pools(2, u.h, u.w);
    argmax_.assign(hw, 0);
    for (int i = 0; i < hw; ++i) {
        double mx = u.v[i];
        int arg = 0;
        double mean = 0.0;
        for (int c = 0; c < u.c; ++c) {
            double v = u.v[std::size_t(c) * hw + i];
            mean += v;
            if (v > mx) {
                mx = v;
                arg = c;
            }
        }
        pools.v[i] = mx;
        pools.v[std::size_t(hw) + i] = mean / u.c;
        argmax_[i] = arg;
    }
    Tensor s = conv.forward(pools);
    gate_ = s;
    for (double& v : gate_.v) v = 1.0 / (1.0 + std::exp(-v));
    Tensor y = u;
    for (int c = 0; c < u.c; ++c)
        for (int i = 0; i < hw; ++i)
            y.v[std::size_t(c) * hw + i] *= gate_.v[i];
    return y;
}

Tensor SpatialAttention::backward(const Tensor& dy) {
    int hw = u_.h * u_.w;
    Tensor du = dy;
    Tensor dgate(1, u_.h, u_.w);
    for (int i = 0; i < hw; ++i) {
        double acc = 0.0;
        for (int c = 0; c < u_.c; ++c) {
            std::size_t idx = std::size_t(c) * hw + i;
            acc += dy.v[idx] * u_.v[idx];
            du.v[idx] = dy.v[idx] * gate_.v[i];
        }
        dgate.v[i] = acc * gate_.v[i] * (1.0 - gate_.v[i]);
    }
    Tensor dpools = conv.backward(dgate);
    double inv_c = 1.0 / u_.c;
    for (int i = 0; i < hw; ++i) {
        du.v[std::size_t(argmax_[i]) * hw + i] += dpools.v[i];
        double add = dpools.v[std::size_t(hw) + i] * inv_c;
        for (int c = 0; c < u_.c; ++c) du.v[std::size_t(c) * hw + i] += add;
    }
    return du;
}

void SpatialAttention::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    conv.collect(prefix + ".conv", out);
}

// -------------------------------------------------------------- DabBlock

DabBlock::DabBlock(int channels, int kernel, int ca_reduction)
    : conv1(channels, channels, kernel), conv2(channels, channels, kernel),
      ca(channels, ca_reduction), sa(5) {}

void DabBlock::init(std::mt19937_64& rng) {
    conv1.init_he(rng);
    conv2.init_he(rng);
    ca.init(rng);
    sa.init(rng);
}

Tensor DabBlock::forward(const Tensor& x) {
    Tensor t = conv2.forward(relu.forward(conv1.forward(x)));
    trunk_ = t;
    Tensor v = sa.forward(ca.forward(t));
    for (std::size_t i = 0; i < v.v.size(); ++i) v.v[i] += x.v[i];
    return v;
}

Tensor DabBlock::backward(const Tensor& dy) {
    Tensor dt = ca.backward(sa.backward(dy));
    Tensor dx = conv1.backward(relu.backward(conv2.backward(dt)));
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];
    return dx;
}

void DabBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
    ca.collect(prefix + ".ca", out);
    sa.collect(prefix + ".sa", out);
}

std::size_t DabBlock::param_count() const {
    return conv1.param_count() + conv2.param_count() + ca.param_count() + sa.param_count();
}

// -------------------------------------------------------------- RrgBlock

RrgBlock::RrgBlock(int channels, int kernel, int ca_reduction, int dab_count)
    : dabs(std::size_t(dab_count), DabBlock(channels, kernel, ca_reduction)),
      conv(channels, channels, kernel) {}

void RrgBlock::init(std::mt19937_64& rng) {
    for (auto& d : dabs) d.init(rng);
    conv.init_he(rng);
}

Tensor RrgBlock::forward(const Tensor& x) {
    Tensor t = x;
    for (auto& d : dabs) t = d.forward(t);
    t = conv.forward(t);
    for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] += x.v[i];
    return t;
}

Tensor RrgBlock::backward(const Tensor& dy) {
    Tensor dt = conv.backward(dy);
    for (auto it = dabs.rbegin(); it != dabs.rend(); ++it) dt = it->backward(dt);
    for (std::size_t i = 0; i < dt.v.size(); ++i) dt.v[i] += dy.v[i];
    return dt;
}

void RrgBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < dabs.size(); ++i)
        dabs[i].collect(prefix + ".dab" + std::to_string(i), out);
    conv.collect(prefix + ".conv", out);
}

std::size_t RrgBlock::param_count() const {
    std::size_t n = conv.param_count();
    for (const auto& d : dabs) n += d.param_count();
    return n;
}

} // namespace expi
