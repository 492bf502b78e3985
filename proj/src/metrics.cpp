#include "expi/metrics.hpp"

#include <cmath>

namespace expi {

namespace {

constexpr double kPsnrCap = 99.0;
constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01, kK2 = 0.03;
constexpr int kPatch = 8;

void check_same(const FloatImage& a, const FloatImage& b, const char* where) {
    if (!a.same_shape(b)) throw InvalidArgument(std::string(where) + ": dimension mismatch");
}

std::vector<double> gaussian_window() {
    std::vector<double> w(kWin * kWin);
    double sum = 0.0;
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x) {
            double dy = y - (kWin - 1) / 2.0, dx = x - (kWin - 1) / 2.0;
            w[y * kWin + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            sum += w[y * kWin + x];
        }
    for (double& v : w) v /= sum;
    return w;
}

} // namespace

double psnr(const FloatImage& a, const FloatImage& b) {
    check_same(a, b, "psnr");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    double rmse = std::sqrt(acc / double(a.data.size()));
    if (rmse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 20.0 * std::log10(255.0 / rmse));
}

double psnr_masked(const FloatImage& a, const FloatImage& b, const std::vector<std::uint8_t>& mask) {
    check_same(a, b, "psnr_masked");
    std::size_t npix = std::size_t(a.width) * a.height;
    if (mask.size() != npix) throw InvalidArgument("psnr_masked: mask size mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < npix; ++p) {
        if (!mask[p]) continue;
        for (int c = 0; c < a.channels; ++c) {
            double d = a.data[p * a.channels + c] - b.data[p * a.channels + c];
            acc += d * d;
        }
        ++n;
    }
    if (n == 0) throw InvalidArgument("psnr_masked: empty mask");
    double rmse = std::sqrt(acc / double(n * a.channels));
    if (rmse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 20.0 * std::log10(255.0 / rmse));
}

double ssim(const FloatImage& a, const FloatImage& b) {
    check_same(a, b, "ssim");
    if (a.width < kWin || a.height < kWin)
        throw InvalidArgument("ssim: image smaller than the 11x11 window");
    static const std::vector<double> win = gaussian_window();
    const double c1 = (kK1 * 255.0) * (kK1 * 255.0);
    const double c2 = (kK2 * 255.0) * (kK2 * 255.0);

    double total = 0.0;
    for (int ch = 0; ch < a.channels; ++ch) {
        double acc = 0.0;
        std::size_t n = 0;
        for (int y = 0; y + kWin <= a.height; ++y)
            for (int x = 0; x + kWin <= a.width; ++x) {
                double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
                for (int wy = 0; wy < kWin; ++wy)
                    for (int wx = 0; wx < kWin; ++wx) {
                        double wgt = win[wy * kWin + wx];
                        double pa = a.at(x + wx, y + wy, ch);
                        double pb = b.at(x + wx, y + wy, ch);
                        ma += wgt * pa;
                        mb += wgt * pb;
                        va += wgt * pa * pa;
                        vb += wgt * pb * pb;
                        cov += wgt * pa * pb;
                    }
                va -= ma * ma;
                vb -= mb * mb;
                cov -= ma * mb;
                double s = ((2 * ma * mb + c1) * (2 * cov + c2)) /
                           ((ma * ma + mb * mb + c1) * (va + vb + c2));
                acc += s;
                ++n;
            }
        total += acc / double(n);
    }
    return total / a.channels;
}

FloatImage luma(const FloatImage& img) {
    if (img.channels != 3) throw InvalidArgument("luma: expected 3 channels");
    FloatImage out(img.width, img.height, 1);
    for (std::size_t p = 0; p < std::size_t(img.width) * img.height; ++p)
        out.data[p] = 0.299 * img.data[p * 3] + 0.587 * img.data[p * 3 + 1] +
                      0.114 * img.data[p * 3 + 2];
    return out;
}

std::vector<double> mef_desired_patch(const std::vector<FloatImage>& inputs_luma, int x, int y) {
    const int n = kPatch * kPatch;
    std::vector<double> sbar(n, 0.0);
    double chat = 0.0;
    for (const FloatImage& img : inputs_luma) {
        std::vector<double> patch(n);
        double mean = 0.0;
        for (int py = 0; py < kPatch; ++py)
            for (int px = 0; px < kPatch; ++px) {
                patch[py * kPatch + px] = img.at(x + px, y + py, 0);
                mean += patch[py * kPatch + px];
            }
        mean /= n;
        double norm = 0.0;
        for (double& v : patch) {
            v -= mean;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        chat = std::max(chat, norm);
        // structure weighted by signal strength: w_k * x_k/||x_k|| = x_k
        for (int i = 0; i < n; ++i) sbar[i] += patch[i];
    }
    double sn = 0.0;
    for (double v : sbar) sn += v * v;
    sn = std::sqrt(sn);
    if (sn < 1e-12) return std::vector<double>(n, 0.0);
    for (double& v : sbar) v *= chat / sn;
    return sbar;
}

double mef_ssim(const FloatImage& fused, const std::vector<ExposureImage>& inputs) {
    if (inputs.size() < 2) throw InvalidArgument("mef_ssim: need at least 2 input images");
    if (fused.width < kPatch || fused.height < kPatch)
        throw InvalidArgument("mef_ssim: image smaller than the 8x8 patch");
    std::vector<FloatImage> lumas;
    for (const auto& img : inputs) {
        if (img.width != fused.width || img.height != fused.height)
            throw InvalidArgument("mef_ssim: dimension mismatch");
        lumas.push_back(luma(to_float(img)));
    }
    FloatImage fl = luma(fused);

    const double c2 = (kK2 * 255.0) * (kK2 * 255.0);
    const int n = kPatch * kPatch;
    double acc = 0.0;
    std::size_t count = 0;
    for (int y = 0; y + kPatch <= fused.height; ++y)
        for (int x = 0; x + kPatch <= fused.width; ++x) {
            std::vector<double> desired = mef_desired_patch(lumas, x, y);
            std::vector<double> fp(n);
            double mean = 0.0;
            for (int py = 0; py < kPatch; ++py)
                for (int px = 0; px < kPatch; ++px) {
                    fp[py * kPatch + px] = fl.at(x + px, y + py, 0);
                    mean += fp[py * kPatch + px];
                }
            mean /= n;
            double sxy = 0.0, sxx = 0.0, syy = 0.0;
            for (int i = 0; i < n; ++i) {
                double f = fp[i] - mean;
                sxy += desired[i] * f;
                sxx += desired[i] * desired[i];
                syy += f * f;
            }
            double denom = n - 1;
            acc += (2.0 * sxy / denom + c2) / (sxx / denom + syy / denom + c2);
            ++count;
        }
    return acc / double(count);
}

} // namespace expi
