#pragma once

#include <vector>

#include "expi/error.hpp"
#include "expi/image.hpp"

namespace expi {

// Dense CHW tensor of doubles. Batches are handled by looping over samples.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, fill) {}

    double& at(int ci, int y, int x) {
        return v[(std::size_t(ci) * h + y) * w + x];
    }
    double at(int ci, int y, int x) const {
        return v[(std::size_t(ci) * h + y) * w + x];
    }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

// 3-channel image <-> tensor, optionally scaled (e.g. 1/255).
Tensor tensor_from_image(const FloatImage& img, double scale = 1.0);
FloatImage image_from_tensor(const Tensor& t, double scale = 1.0);

} // namespace expi
