#include "expi/train.hpp"

#include <cmath>
#include <fstream>

#include "expi/metrics.hpp"

namespace expi {

namespace {

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

FloatImage crop_flip(const FloatImage& img, int x0, int y0, int side, bool fh, bool fv) {
    FloatImage out(side, side, img.channels);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            int sx = x0 + (fh ? side - 1 - x : x);
            int sy = y0 + (fv ? side - 1 - y : y);
            for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    return out;
}

// Loss value and gradient w.r.t. the code-scale prediction. `y0` is the
// model-driven baseline for the hybrid residual loss; for l1/l2 it only
// enters through pred = y0 + residual, which the caller already folded in.
LossBreakdown prediction_loss(const FloatImage& y, const FloatImage& y0,
                              const FloatImage& residual, const TrainOptions& opt,
                              const FeatureExtractor* fx, FloatImage* grad) {
    if (opt.recon == ReconKind::hybrid)
        return composite_loss(y, y0, residual, opt.psi, opt.weights, fx, grad);

    FloatImage pred(y.width, y.height, y.channels);
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        pred.data[i] = y0.data[i] + residual.data[i];

    LossBreakdown out;
    FloatImage gr, gc, gf;
    out.l_r = (opt.recon == ReconKind::l1) ? l1_loss(y, pred, grad ? &gr : nullptr)
                                           : l2_loss(y, pred, grad ? &gr : nullptr);
    if (opt.weights.w_c > 0.0) out.l_c = color_loss(y, pred, grad ? &gc : nullptr);
    if (opt.weights.w_f > 0.0) out.l_f = feature_loss(*fx, y, pred, grad ? &gf : nullptr);
    out.l_d = out.l_r + opt.weights.w_c * out.l_c + opt.weights.w_f * out.l_f;
    if (grad) {
        *grad = gr;
        if (opt.weights.w_c > 0.0)
            for (std::size_t i = 0; i < grad->data.size(); ++i)
                grad->data[i] += opt.weights.w_c * gc.data[i];
        if (opt.weights.w_f > 0.0)
            for (std::size_t i = 0; i < grad->data.size(); ++i)
                grad->data[i] += opt.weights.w_f * gf.data[i];
    }
    return out;
}

} // namespace

AdamOptimizer::AdamOptimizer(std::vector<ParamRef> params, double lr)
    : params_(std::move(params)), lr_(lr) {
    for (const auto& p : params_) {
        m_.emplace_back(p.w->size(), 0.0);
        v_.emplace_back(p.w->size(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(kBeta1, double(t_));
    double bc2 = 1.0 - std::pow(kBeta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& w = *params_[i].w;
        auto& g = *params_[i].g;
        for (std::size_t j = 0; j < w.size(); ++j) {
            m_[i][j] = kBeta1 * m_[i][j] + (1.0 - kBeta1) * g[j];
            v_[i][j] = kBeta2 * v_[i][j] + (1.0 - kBeta2) * g[j] * g[j];
            w[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + kEps);
        }
    }
}

void save_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "epoch,loss,l_r,l_c,l_f,psnr\n";
    out.precision(17);
    for (const auto& e : history)
        out << e.epoch << "," << e.loss << "," << e.l_r << "," << e.l_c << "," << e.l_f << ","
            << e.psnr << "\n";
    if (!out) throw IoError("short write: " + path);
}

int epochs_to_threshold(const std::vector<EpochStats>& history, double threshold) {
    for (const auto& e : history)
        if (e.loss <= threshold) return e.epoch;
    return int(history.size()) + 1;
}

TrainResult train(RefineNet& net, const std::vector<ResidualPair>& pairs,
                  const TrainOptions& opt) {
    if (pairs.empty()) throw InvalidArgument("train: empty dataset");
    opt.net.validate();
    FeatureExtractor fx;
    const FeatureExtractor* fxp = opt.weights.w_f > 0.0 ? &fx : nullptr;

    std::mt19937_64 rng(opt.sample_seed);
    AdamOptimizer adam(net.params(), opt.net.learning_rate);
    TrainResult result;

    for (int epoch = 1; epoch <= opt.net.epochs; ++epoch) {
        EpochStats stats;
        stats.epoch = epoch;
        int steps = int(pairs.size());
        for (int step = 0; step < steps; ++step) {
            net.zero_grad();
            LossBreakdown batch_mean;
            for (int s = 0; s < opt.net.batch_size; ++s) {
                const ResidualPair& pair = pairs[rng() % pairs.size()];
                int side = std::min({opt.net.patch_size, pair.y0.width, pair.y0.height});
                int x0 = (pair.y0.width > side) ? int(rng() % (pair.y0.width - side + 1)) : 0;
                int y0 = (pair.y0.height > side) ? int(rng() % (pair.y0.height - side + 1)) : 0;
                bool fh = rng() & 1, fv = rng() & 1;
                FloatImage y0p = crop_flip(pair.y0, x0, y0, side, fh, fv);
                FloatImage yp = crop_flip(pair.y, x0, y0, side, fh, fv);

                Tensor out = net.forward(tensor_from_image(y0p, 1.0 / 255.0));
                FloatImage residual = image_from_tensor(out, 255.0);
                FloatImage grad;
                LossBreakdown lb = prediction_loss(yp, y0p, residual, opt, fxp, &grad);
                if (!std::isfinite(lb.l_d))
                    throw NumericError("train: non-finite loss at epoch " +
                                       std::to_string(epoch));
                // chain through the 255 scale and the batch mean
                Tensor dout = tensor_from_image(grad, 255.0 / opt.net.batch_size);
                net.backward(dout);
                batch_mean.l_r += lb.l_r;
                batch_mean.l_c += lb.l_c;
                batch_mean.l_f += lb.l_f;
                batch_mean.l_d += lb.l_d;
            }
            adam.step();
            stats.l_r += batch_mean.l_r / opt.net.batch_size;
            stats.l_c += batch_mean.l_c / opt.net.batch_size;
            stats.l_f += batch_mean.l_f / opt.net.batch_size;
            stats.loss += batch_mean.l_d / opt.net.batch_size;
        }
        stats.l_r /= steps;
        stats.l_c /= steps;
        stats.l_f /= steps;
        stats.loss /= steps;

        double p = 0.0;
        int neval = std::min<std::size_t>(3, pairs.size());
        for (int i = 0; i < neval; ++i)
            p += psnr(apply_refinement(net, pairs[i].y0), pairs[i].y);
        stats.psnr = p / neval;
        result.history.push_back(stats);
    }
    return result;
}

TrainResult train_direct_baseline(DirectNet& net, const std::vector<DirectTriple>& triples,
                                  const TrainOptions& opt) {
    if (triples.empty()) throw InvalidArgument("train_direct_baseline: empty dataset");
    opt.net.validate();
    FeatureExtractor fx;
    const FeatureExtractor* fxp = opt.weights.w_f > 0.0 ? &fx : nullptr;

    std::mt19937_64 rng(opt.sample_seed);
    AdamOptimizer adam(net.params(), opt.net.learning_rate);
    TrainResult result;

    auto predict = [&](const FloatImage& x1, const FloatImage& x2) {
        Tensor out = net.forward(tensor_from_image(x1, 1.0 / 255.0),
                                 tensor_from_image(x2, 1.0 / 255.0));
        return image_from_tensor(out, 255.0);
    };

    for (int epoch = 1; epoch <= opt.net.epochs; ++epoch) {
        EpochStats stats;
        stats.epoch = epoch;
        int steps = int(triples.size());
        for (int step = 0; step < steps; ++step) {
            net.zero_grad();
            LossBreakdown batch_mean;
            for (int s = 0; s < opt.net.batch_size; ++s) {
                const DirectTriple& tr = triples[rng() % triples.size()];
                int side = std::min({opt.net.patch_size, tr.y.width, tr.y.height});
                int x0 = (tr.y.width > side) ? int(rng() % (tr.y.width - side + 1)) : 0;
                int y0 = (tr.y.height > side) ? int(rng() % (tr.y.height - side + 1)) : 0;
                bool fh = rng() & 1, fv = rng() & 1;
                FloatImage x1p = crop_flip(tr.x1, x0, y0, side, fh, fv);
                FloatImage x2p = crop_flip(tr.x2, x0, y0, side, fh, fv);
                FloatImage yp = crop_flip(tr.y, x0, y0, side, fh, fv);

                FloatImage pred = predict(x1p, x2p);
                FloatImage zero(yp.width, yp.height, 3);
                FloatImage grad;
                LossBreakdown lb = prediction_loss(yp, zero, pred, opt, fxp, &grad);
                if (!std::isfinite(lb.l_d))
                    throw NumericError("train_direct_baseline: non-finite loss at epoch " +
                                       std::to_string(epoch));
                Tensor dout = tensor_from_image(grad, 255.0 / opt.net.batch_size);
                net.backward(dout);
                batch_mean.l_r += lb.l_r;
                batch_mean.l_c += lb.l_c;
                batch_mean.l_f += lb.l_f;
                batch_mean.l_d += lb.l_d;
            }
            adam.step();
            stats.l_r += batch_mean.l_r / opt.net.batch_size;
            stats.l_c += batch_mean.l_c / opt.net.batch_size;
            stats.l_f += batch_mean.l_f / opt.net.batch_size;
            stats.loss += batch_mean.l_d / opt.net.batch_size;
        }
        stats.l_r /= steps;
        stats.l_c /= steps;
        stats.l_f /= steps;
        stats.loss /= steps;

        double p = 0.0;
        int neval = std::min<std::size_t>(3, triples.size());
        for (int i = 0; i < neval; ++i) {
            FloatImage pred = predict(triples[i].x1, triples[i].x2);
            for (double& v : pred.data) v = std::clamp(v, 0.0, 255.0);
            p += psnr(pred, triples[i].y);
        }
        stats.psnr = p / neval;
        result.history.push_back(stats);
    }
    return result;
}

} // namespace expi
