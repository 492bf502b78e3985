#include "expi/loss.hpp"

#include <cmath>

namespace expi {

namespace {

void check_same(const FloatImage& a, const FloatImage& b, const char* where) {
    if (!a.same_shape(b)) throw InvalidArgument(std::string(where) + ": dimension mismatch");
}

} // namespace

double psi(double z, const PsiParams& p) {
    double a = std::fabs(z);
    return a > p.c ? a : (z * z + p.c * p.c) / (2.0 * p.c);
}

double psi_prime(double z, const PsiParams& p) {
    if (z >= p.c) return 1.0;
    if (z <= -p.c) return -1.0;
    return z / p.c;
}

double reconstruction_loss(const FloatImage& y, const FloatImage& y0,
                           const FloatImage& residual, const PsiParams& p,
                           FloatImage* grad_residual) {
    check_same(y, y0, "reconstruction_loss");
    check_same(y, residual, "reconstruction_loss");
    p.validate();
    double n = double(y.data.size());
    double acc = 0.0;
    if (grad_residual) *grad_residual = FloatImage(y.width, y.height, y.channels);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        double d = y.data[i] - y0.data[i] - residual.data[i];
        acc += psi(d, p);
        if (grad_residual) grad_residual->data[i] = -psi_prime(d, p) / n;
    }
    return acc / n;
}

double l1_loss(const FloatImage& y, const FloatImage& prediction, FloatImage* grad_prediction) {
    check_same(y, prediction, "l1_loss");
    double n = double(y.data.size());
    double acc = 0.0;
    if (grad_prediction) *grad_prediction = FloatImage(y.width, y.height, y.channels);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        double d = prediction.data[i] - y.data[i];
        acc += std::fabs(d);
        if (grad_prediction)
            grad_prediction->data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    return acc / n;
}

double l2_loss(const FloatImage& y, const FloatImage& prediction, FloatImage* grad_prediction) {
    check_same(y, prediction, "l2_loss");
    double n = double(y.data.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        double d = prediction.data[i] - y.data[i];
        acc += d * d;
    }
    double rms = std::sqrt(acc / n);
    if (grad_prediction) {
        *grad_prediction = FloatImage(y.width, y.height, y.channels);
        if (rms > 0.0)
            for (std::size_t i = 0; i < y.data.size(); ++i)
                grad_prediction->data[i] = (prediction.data[i] - y.data[i]) / (n * rms);
    }
    return rms;
}

double color_loss(const FloatImage& y, const FloatImage& prediction, FloatImage* grad_prediction) {
    check_same(y, prediction, "color_loss");
    if (y.channels != 3) throw InvalidArgument("color_loss: expected 3 channels");
    std::size_t npix = std::size_t(y.width) * y.height;
    double acc = 0.0;
    if (grad_prediction) *grad_prediction = FloatImage(y.width, y.height, y.channels);
    for (std::size_t p = 0; p < npix; ++p) {
        const double* a = &y.data[p * 3];
        const double* b = &prediction.data[p * 3];
        double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
        if (na < 1e-6 || nb < 1e-6) continue; // black pixels contribute angle 0
        double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        double d = std::clamp(dot / (na * nb), -1.0, 1.0);
        acc += std::acos(d);
        if (grad_prediction) {
            double s = std::sqrt(1.0 - d * d);
            if (s < 1e-6) continue; // near-parallel: angle gradient ~ 0 contribution
            for (int c = 0; c < 3; ++c) {
                double dd = a[c] / (na * nb) - d * b[c] / (nb * nb);
                grad_prediction->data[p * 3 + c] = -dd / s / double(npix);
            }
        }
    }
    return acc / double(npix);
}

// ------------------------------------------------------ FeatureExtractor

FeatureExtractor::FeatureExtractor(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Conv2d c1(3, 8, 3, 1), c2(8, 8, 3, 2), c3(8, 8, 3, 2);
    // layer 1 sees code-scale inputs; keep its outputs O(1)
    c1.init_normal(rng, 1.0 / (255.0 * std::sqrt(27.0)));
    c2.init_normal(rng, 1.0 / std::sqrt(72.0));
    c3.init_normal(rng, 1.0 / std::sqrt(72.0));
    layers_ = {c1, c2, c3};
}

FeatureExtractor::FeatureExtractor(std::vector<Conv2d> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InvalidArgument("FeatureExtractor: need at least one layer");
}

std::vector<Tensor> FeatureExtractor::features(const FloatImage& img) const {
    std::vector<Tensor> maps;
    Tensor t = tensor_from_image(img);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Tensor pre = layers_[l].forward(t);
        maps.push_back(pre);
        if (l + 1 < layers_.size()) {
            t = pre;
            for (double& v : t.v) v = std::tanh(v);
        }
    }
    return maps;
}

double FeatureExtractor::loss(const FloatImage& y, const FloatImage& prediction,
                              FloatImage* grad_prediction) const {
    check_same(y, prediction, "feature_loss");
    std::vector<Tensor> fy = features(y);

    // recompute the prediction path keeping activations for backprop;
    // conv caches now hold the prediction inputs
    std::vector<Tensor> fp, act;
    Tensor t = tensor_from_image(prediction);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Tensor pre = layers_[l].forward(t);
        fp.push_back(pre);
        if (l + 1 < layers_.size()) {
            t = pre;
            for (double& v : t.v) v = std::tanh(v);
            act.push_back(t);
        }
    }

    double total = 0.0;
    std::vector<Tensor> direct(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        double nl = double(fp[l].size());
        double acc = 0.0;
        if (grad_prediction) direct[l] = Tensor(fp[l].c, fp[l].h, fp[l].w);
        for (std::size_t i = 0; i < fp[l].v.size(); ++i) {
            double d = fp[l].v[i] - fy[l].v[i];
            acc += d * d;
            if (grad_prediction)
                direct[l].v[i] = 2.0 * d / (nl * double(layers_.size()));
        }
        total += acc / nl;
    }
    total /= double(layers_.size());

    if (grad_prediction) {
        Tensor g = direct.back();
        for (int l = int(layers_.size()) - 1; l >= 0; --l) {
            Tensor dx = layers_[l].backward(g);
            if (l == 0) {
                *grad_prediction = image_from_tensor(dx);
                break;
            }
            // through the tanh into the previous layer's pre-activation
            const Tensor& a = act[l - 1];
            for (std::size_t i = 0; i < dx.v.size(); ++i)
                dx.v[i] *= 1.0 - a.v[i] * a.v[i];
            g = direct[l - 1];
            for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += dx.v[i];
        }
    }
    return total;
}

double feature_loss(const FeatureExtractor& fx, const FloatImage& y,
                    const FloatImage& prediction, FloatImage* grad_prediction) {
    return fx.loss(y, prediction, grad_prediction);
}

LossBreakdown composite_loss(const FloatImage& y, const FloatImage& y0,
                             const FloatImage& residual, const PsiParams& p,
                             const LossWeights& w, const FeatureExtractor* fx,
                             FloatImage* grad_residual) {
    w.validate();
    FloatImage pred(y0.width, y0.height, y0.channels);
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        pred.data[i] = y0.data[i] + residual.data[i];

    LossBreakdown out;
    FloatImage gr, gc, gf;
    out.l_r = reconstruction_loss(y, y0, residual, p, grad_residual ? &gr : nullptr);
    if (w.w_c > 0.0)
        out.l_c = color_loss(y, pred, grad_residual ? &gc : nullptr);
    if (w.w_f > 0.0) {
        if (!fx) throw InvalidArgument("composite_loss: feature extractor required when w_f > 0");
        out.l_f = feature_loss(*fx, y, pred, grad_residual ? &gf : nullptr);
    }
    out.l_d = out.l_r + w.w_c * out.l_c + w.w_f * out.l_f;

    if (grad_residual) {
        *grad_residual = gr;
        if (w.w_c > 0.0)
            for (std::size_t i = 0; i < gr.data.size(); ++i)
                grad_residual->data[i] += w.w_c * gc.data[i];
        if (w.w_f > 0.0)
            for (std::size_t i = 0; i < gr.data.size(); ++i)
                grad_residual->data[i] += w.w_f * gf.data[i];
    }
    return out;
}

} // namespace expi
