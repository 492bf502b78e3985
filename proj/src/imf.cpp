#include "expi/imf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace expi {

namespace {

double eval_array(const std::array<double, 256>& m, double z) {
    if (z <= 0.0) return m[0];
    if (z >= 255.0) return m[255];
    int i = int(z);
    double t = z - i;
    return m[i] * (1.0 - t) + m[std::min(i + 1, 255)] * t;
}

bool monotone_array(const std::array<double, 256>& m, double eps) {
    for (int z = 1; z < 256; ++z)
        if (m[z] < m[z - 1] - eps) return false;
    return true;
}

void repair_array(std::array<double, 256>& m) {
    for (int z = 1; z < 256; ++z) m[z] = std::max(m[z], m[z - 1]);
}

// Pseudo-inverse of a monotone table; plateaus map to their midpoint.
std::array<double, 256> invert_array(const std::array<double, 256>& m) {
    std::array<double, 256> inv{};
    for (int vi = 0; vi < 256; ++vi) {
        double v = double(vi);
        // left crossing: smallest z with m(z) >= v
        double zl;
        if (v <= m[0]) {
            zl = 0.0;
        } else if (v > m[255]) {
            zl = 255.0;
        } else {
            int i = 1;
            while (m[i] < v) ++i;
            zl = (i - 1) + (v - m[i - 1]) / (m[i] - m[i - 1]);
        }
        // right crossing: largest z with m(z) <= v
        double zr;
        if (v >= m[255]) {
            zr = 255.0;
        } else if (v < m[0]) {
            zr = 0.0;
        } else {
            int j = 254;
            while (m[j] > v) --j;
            zr = (m[j + 1] > m[j]) ? j + (v - m[j]) / (m[j + 1] - m[j]) : double(j);
        }
        inv[vi] = 0.5 * (zl + zr);
    }
    repair_array(inv);
    return inv;
}

// Left-crossing inverse: smallest z with m(z) >= v. Unlike the midpoint
// pseudo-inverse this stays put at the saturation plateau's left edge,
// which is what composition arguments need.
std::array<double, 256> lower_invert_array(const std::array<double, 256>& m) {
    std::array<double, 256> inv{};
    for (int vi = 0; vi < 256; ++vi) {
        double v = double(vi);
        if (v <= m[0]) inv[vi] = 0.0;
        else if (v > m[255]) inv[vi] = 255.0;
        else {
            int i = 1;
            while (m[i] < v) ++i;
            inv[vi] = (m[i] > m[i - 1]) ? (i - 1) + (v - m[i - 1]) / (m[i] - m[i - 1])
                                        : double(i);
        }
    }
    repair_array(inv);
    return inv;
}

double safe_sigmoid(double u) {
    u = std::clamp(u, -500.0, 500.0);
    return 1.0 / (1.0 + std::exp(u));
}

// Solve a 6x6 linear system in place; returns false if singular.
bool solve6(std::array<std::array<double, 6>, 6>& a, std::array<double, 6>& b) {
    for (int col = 0; col < 6; ++col) {
        int piv = col;
        for (int r = col + 1; r < 6; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-14) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < 6; ++r) {
            double f = a[r][col] / a[col][col];
            for (int c = col; c < 6; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int col = 5; col >= 0; --col) {
        double s = b[col];
        for (int c = col + 1; c < 6; ++c) s -= a[col][c] * b[c];
        b[col] = s / a[col][col];
    }
    return true;
}

double sse_of(const ScatterPlot& pts, const std::array<double, 6>& k) {
    double sse = 0.0;
    for (const auto& p : pts) {
        double f = k[0] * safe_sigmoid(k[1] + k[2] * p.x) + k[3] * safe_sigmoid(k[4] + k[5] * p.x);
        double r = f - p.z;
        sse += r * r;
    }
    return sse;
}

// One damped Gauss-Newton run; returns final SSE (or +inf on failure).
double gauss_newton(const ScatterPlot& pts, std::array<double, 6>& k) {
    double lambda = 1e-3;
    double sse = sse_of(pts, k);
    for (int it = 0; it < 300; ++it) {
        std::array<std::array<double, 6>, 6> jtj{};
        std::array<double, 6> jtr{};
        for (const auto& p : pts) {
            double s1 = safe_sigmoid(k[1] + k[2] * p.x);
            double s2 = safe_sigmoid(k[4] + k[5] * p.x);
            double f = k[0] * s1 + k[3] * s2;
            double r = f - p.z;
            double j[6] = {s1, -k[0] * s1 * (1 - s1), -k[0] * s1 * (1 - s1) * p.x,
                           s2, -k[3] * s2 * (1 - s2), -k[3] * s2 * (1 - s2) * p.x};
            for (int a = 0; a < 6; ++a) {
                jtr[a] += j[a] * r;
                for (int b = 0; b < 6; ++b) jtj[a][b] += j[a] * j[b];
            }
        }
        bool improved = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            auto a = jtj;
            std::array<double, 6> rhs = jtr;
            for (int d = 0; d < 6; ++d) a[d][d] += lambda * (jtj[d][d] + 1e-12);
            for (double& v : rhs) v = -v;
            if (!solve6(a, rhs)) {
                lambda *= 10.0;
                continue;
            }
            std::array<double, 6> kn = k;
            double step2 = 0.0;
            for (int d = 0; d < 6; ++d) {
                kn[d] += rhs[d];
                step2 += rhs[d] * rhs[d];
            }
            double sn = sse_of(pts, kn);
            if (std::isfinite(sn) && sn <= sse) {
                k = kn;
                improved = true;
                lambda = std::max(lambda / 3.0, 1e-12);
                if (sse - sn < 1e-12 * (1.0 + sse) || step2 < 1e-20) return sn;
                sse = sn;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
    return sse;
}

} // namespace

bool ImfTable::monotone(double eps) const {
    for (int c = 0; c < 3; ++c)
        if (!monotone_array(map[c], eps)) return false;
    return true;
}

void ImfTable::clamp_range() {
    for (auto& ch : map)
        for (double& v : ch) v = std::clamp(v, 0.0, 255.0);
}

void ImfTable::monotone_repair() {
    for (auto& ch : map) repair_array(ch);
}

double ImfTable::eval(int channel, double z) const {
    return eval_array(map[channel], z);
}

void save_imf_csv(const std::string& path, const ImfTable& table) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "imf-v1\n";
    out.precision(17);
    for (int c = 0; c < 3; ++c)
        for (int z = 0; z < 256; ++z)
            out << c << "," << z << "," << table.map[c][z] << "\n";
    if (!out) throw IoError("short write: " + path);
}

ImfTable load_imf_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "imf-v1")
        throw IoError("bad IMF CSV header in " + path);
    ImfTable t;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        int c, z;
        double v;
        char comma;
        if (!(ss >> c >> comma >> z >> comma >> v) || c < 0 || c > 2 || z < 0 || z > 255)
            throw IoError("bad IMF CSV row in " + path);
        t.map[c][z] = v;
        ++rows;
    }
    if (rows != 768) throw IoError("expected 768 data rows in " + path);
    return t;
}

double CrfModel::forward(int channel, double e) const {
    const Channel& ch = channels[channel];
    if (e <= ch.irradiance.front()) return ch.code.front();
    if (e >= ch.irradiance.back()) return ch.code.back();
    auto it = std::upper_bound(ch.irradiance.begin(), ch.irradiance.end(), e);
    std::size_t i = std::size_t(it - ch.irradiance.begin());
    double t = (e - ch.irradiance[i - 1]) / (ch.irradiance[i] - ch.irradiance[i - 1]);
    return ch.code[i - 1] * (1.0 - t) + ch.code[i] * t;
}

double CrfModel::inverse(int channel, double z) const {
    const Channel& ch = channels[channel];
    if (z <= ch.code.front()) return ch.irradiance.front();
    if (z >= ch.code.back()) return ch.irradiance.back();
    auto it = std::upper_bound(ch.code.begin(), ch.code.end(), z);
    std::size_t i = std::size_t(it - ch.code.begin());
    double t = (z - ch.code[i - 1]) / (ch.code[i] - ch.code[i - 1]);
    return ch.irradiance[i - 1] * (1.0 - t) + ch.irradiance[i] * t;
}

void CrfModel::validate() const {
    for (const auto& ch : channels) {
        if (ch.irradiance.size() != ch.code.size() || ch.irradiance.size() < 2)
            throw InvalidArgument("CrfModel: malformed sample arrays");
        if (ch.irradiance.front() != 0.0 || ch.code.front() != 0.0 || ch.code.back() != 255.0)
            throw InvalidArgument("CrfModel: endpoints must satisfy F(0)=0, F(max)=255");
        for (std::size_t i = 1; i < ch.code.size(); ++i)
            if (ch.irradiance[i] <= ch.irradiance[i - 1] || ch.code[i] <= ch.code[i - 1])
                throw InvalidArgument("CrfModel: samples must be strictly increasing");
    }
}

CrfModel make_gamma_crf(double gamma) {
    if (!(gamma > 0.0)) throw InvalidArgument("make_gamma_crf: gamma must be > 0");
    CrfModel crf;
    CrfModel::Channel ch;
    ch.irradiance.resize(CrfModel::samples);
    ch.code.resize(CrfModel::samples);
    // sample uniformly in code, not irradiance: a power law compresses the
    // shadow range so hard that uniform irradiance samples cannot resolve it
    for (int i = 0; i < CrfModel::samples; ++i) {
        double t = double(i) / (CrfModel::samples - 1);
        ch.irradiance[i] = std::pow(t, gamma);
        ch.code[i] = 255.0 * t;
    }
    for (auto& c : crf.channels) c = ch;
    return crf;
}

double DoubleSigmoidParams::eval(double x) const {
    return k[0] * safe_sigmoid(k[1] + k[2] * x) + k[3] * safe_sigmoid(k[4] + k[5] * x);
}

double eval_linear(const ScatterPlot& points, double x) {
    if (points.empty()) throw InvalidArgument("eval_linear: empty scatter");
    // collapse equal-x ties by averaging
    ScatterPlot pts;
    pts.reserve(points.size());
    std::size_t i = 0;
    while (i < points.size()) {
        double xi = points[i].x, sum = 0.0;
        std::size_t n = 0;
        while (i < points.size() && points[i].x == xi) {
            sum += points[i].z;
            ++n;
            ++i;
        }
        pts.push_back({xi, sum / double(n)});
    }
    if (x <= pts.front().x) return pts.front().z;
    if (x >= pts.back().x) return pts.back().z;
    std::size_t hi = 1;
    while (pts[hi].x < x) ++hi;
    double t = (x - pts[hi - 1].x) / (pts[hi].x - pts[hi - 1].x);
    return pts[hi - 1].z * (1.0 - t) + pts[hi].z * t;
}

DoubleSigmoidParams fit_double_sigmoid(const ScatterPlot& points) {
    if (points.size() < 6) throw InvalidArgument("fit_double_sigmoid: need >= 6 points");
    double xmin = points.front().x, xmax = points.back().x;
    double zmin = points.front().z, zmax = points.front().z;
    for (const auto& p : points) {
        zmin = std::min(zmin, p.z);
        zmax = std::max(zmax, p.z);
    }
    if (zmax - zmin < 1e-9) {
        // degenerate flat scatter: constant curve, zero residual
        DoubleSigmoidParams flat;
        flat.k = {zmin, 0.0, 0.0, zmin, 0.0, 0.0};
        flat.residual_rms = 0.0;
        return flat;
    }
    double range = std::max(xmax - xmin, 1e-12);
    double slope = (zmax - zmin) / range; // secant estimate

    // base initialization: equal 127.5 amplitudes, inflections at 1/3 and 2/3
    // of the irradiance range, slopes matched to half the secant each
    auto base_init = [&](double x1, double x2, double sjit1, double sjit2) {
        std::array<double, 6> k{};
        k[0] = 127.5;
        k[3] = 127.5;
        k[2] = -2.0 * slope / 127.5 * sjit1;
        k[5] = -2.0 * slope / 127.5 * sjit2;
        k[1] = -k[2] * x1;
        k[4] = -k[5] * x2;
        return k;
    };

    std::mt19937 rng(12345);
    std::normal_distribution<double> jn(0.0, 1.0);
    DoubleSigmoidParams best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 5; ++restart) {
        double x1 = xmin + range / 3.0, x2 = xmin + 2.0 * range / 3.0;
        double s1 = 1.0, s2 = 1.0;
        if (restart > 0) {
            x1 += range * 0.1 * jn(rng);
            x2 += range * 0.1 * jn(rng);
            s1 = std::exp(0.3 * jn(rng));
            s2 = std::exp(0.3 * jn(rng));
        }
        auto k = base_init(x1, x2, s1, s2);
        double sse = gauss_newton(points, k);
        if (std::isfinite(sse) && sse < best_sse) {
            best_sse = sse;
            best.k = k;
        }
    }
    if (!std::isfinite(best_sse))
        throw NumericError("fit_double_sigmoid: all restarts diverged");
    best.residual_rms = std::sqrt(best_sse / double(points.size()));
    return best;
}

ImfTable imf_from_crf(const CrfModel& crf, double ratio, CrfEval eval) {
    if (!(ratio > 0.0)) throw InvalidArgument("imf_from_crf: ratio must be > 0");
    crf.validate();
    ImfTable t;
    for (int c = 0; c < 3; ++c) {
        DoubleSigmoidParams fit;
        if (eval == CrfEval::double_sigmoid) {
            ScatterPlot scatter;
            const auto& ch = crf.channels[c];
            for (std::size_t i = 0; i < ch.irradiance.size(); i += 8)
                scatter.push_back({ch.irradiance[i], ch.code[i]});
            if (scatter.back().x != ch.irradiance.back())
                scatter.push_back({ch.irradiance.back(), ch.code.back()});
            fit = fit_double_sigmoid(scatter);
        }
        double emax = crf.channels[c].irradiance.back();
        for (int z = 0; z < 256; ++z) {
            double e = crf.inverse(c, double(z));
            double e2 = std::min(ratio * e, emax);
            double v = (eval == CrfEval::linear) ? crf.forward(c, e2) : fit.eval(e2);
            t.map[c][z] = std::clamp(v, 0.0, 255.0);
        }
    }
    t.monotone_repair();
    t.clamp_range();
    return t;
}

ImfTable estimate_pair_imf(const ExposureImage& dark, const ExposureImage& bright) {
    dark.validate();
    bright.validate();
    if (dark.width != bright.width || dark.height != bright.height)
        throw InvalidArgument("estimate_pair_imf: dimension mismatch");

    ImfTable t;
    for (int c = 0; c < 3; ++c) {
        // joint histograms over comparable pixels (both codes in [5,250])
        std::array<double, 256> hd{}, hb{};
        double count = 0.0;
        for (std::size_t p = 0; p < dark.pixel_count(); ++p) {
            int d = dark.data[p * 3 + c], b = bright.data[p * 3 + c];
            if (d >= 5 && d <= 250 && b >= 5 && b <= 250) {
                hd[d] += 1.0;
                hb[b] += 1.0;
                count += 1.0;
            }
        }
        if (count == 0.0)
            throw NumericError("estimate_pair_imf: channel has no comparable pixels "
                               "(input saturated)");

        // bright quantile knots at bin centers (midpoint convention)
        std::vector<double> qc, qv;
        double cum = 0.0;
        for (int v = 0; v < 256; ++v) {
            if (hb[v] > 0.0) {
                qc.push_back((cum + 0.5 * hb[v]) / count);
                qv.push_back(double(v));
            }
            cum += hb[v];
        }
        auto quantile = [&](double q) {
            if (q <= qc.front()) return qv.front();
            if (q >= qc.back()) return qv.back();
            std::size_t i = 1;
            while (qc[i] < q) ++i;
            double t0 = (q - qc[i - 1]) / (qc[i] - qc[i - 1]);
            return qv[i - 1] * (1.0 - t0) + qv[i] * t0;
        };

        double dcum = 0.0;
        for (int z = 0; z < 256; ++z) {
            double center = (dcum + 0.5 * hd[z]) / count;
            t.map[c][z] = quantile(center);
            dcum += hd[z];
        }
        // below the data floor the matching clamps to a plateau; extend
        // through the origin instead (IMFs of zero-anchored CRFs pass
        // through (0,0) and are near-multiplicative at the bottom)
        int z_lo = 0;
        while (z_lo < 255 && hd[z_lo] == 0.0) ++z_lo;
        if (z_lo > 0)
            for (int z = 0; z < z_lo; ++z)
                t.map[c][z] = t.map[c][z_lo] * double(z) / double(z_lo);
        repair_array(t.map[c]);
    }
    t.clamp_range();
    return t;
}

ImfTable functional_sqrt(const ImfTable& imf) {
    if (!imf.monotone())
        throw InvalidArgument("functional_sqrt: non-monotone input table");
    ImfTable out;
    for (int c = 0; c < 3; ++c) {
        const auto& lam = imf.map[c];
        std::array<double, 256> g{};
        // geometric-mean start on the unclipped domain: exact for
        // multiplicative maps (gamma CRFs give lam(z) = s*z below clipping,
        // whose half-iterate is sqrt(s)*z) and a fixed point of the
        // averaged iteration there
        // treat both near-255 values and the terminal plateau as saturated:
        // estimated tables can saturate slightly below 250 when the top of
        // the comparable range censors the true clip value
        double lam_top = lam[255];
        int zc = 255;
        while (zc > 0 && (lam[zc] >= 250.0 || lam[zc] >= lam_top - 1e-9)) --zc;
        for (int z = 0; z <= zc; ++z) g[z] = std::sqrt(double(z) * lam[z]);
        for (int z = 0; z <= zc; ++z) g[z] = std::max(g[z], z > 0 ? g[z - 1] : 0.0);

        // extend upward with g = lam o g^{-1}, which is what the
        // composition g(g(z)) = lam(z) forces beyond the clip point
        auto extend = [&]() {
            int z0 = std::max(0, zc - 8);
            double slope = zc > z0 ? (g[zc] - g[z0]) / double(zc - z0) : 1.0;
            for (int z = zc + 1; z < 256; ++z) {
                if (double(z) <= g[zc]) {
                    // monotone inverse of the prefix built so far
                    double lo = 0.0, hi = double(zc);
                    for (int b = 0; b < 40; ++b) {
                        double mid = 0.5 * (lo + hi);
                        (eval_array(g, mid) < double(z) ? lo : hi) = mid;
                    }
                    g[z] = std::clamp(eval_array(lam, 0.5 * (lo + hi)), g[z - 1], 255.0);
                } else {
                    // z is beyond the range the trusted prefix can invert;
                    // continue with the prefix's end slope instead of clamping
                    g[z] = std::clamp(g[z - 1] + slope, g[z - 1], 255.0);
                }
            }
        };
        extend();

        auto comp_err = [&]() {
            double e = 0.0;
            for (int z = 0; z <= zc; ++z) // saturation plateau excluded
                e = std::max(e, std::fabs(eval_array(g, g[z]) - lam[z]));
            return e;
        };

        // averaged fixed-point iteration g <- (g + g^{-1} o lam) / 2 on the
        // unclipped domain, re-extending the clipped tail after each pass.
        // The composition residual only needs to reach 1 code; iterating
        // further lets the solution slide along the (non-unique) family of
        // half-iterates away from the canonical geometric-mean one, so stop
        // as soon as the residual is comfortably inside that budget and keep
        // the best iterate seen.
        std::array<double, 256> g_best = g;
        double err_best = comp_err();
        for (int it = 0; it < 200 && err_best > 0.5; ++it) {
            auto ginv = lower_invert_array(g);
            std::array<double, 256> gn = g;
            for (int z = 0; z <= zc; ++z)
                gn[z] = 0.5 * (g[z] + eval_array(ginv, lam[z]));
            for (int z = 1; z <= zc; ++z) gn[z] = std::max(gn[z], gn[z - 1]);
            for (int z = 0; z <= zc; ++z) g[z] = std::clamp(gn[z], 0.0, 255.0);
            extend();
            double e = comp_err();
            if (e < err_best) {
                err_best = e;
                g_best = g;
            }
        }
        g = g_best;

        // per-entry bisection fallback: solve g(t) = lam[z] for t, damped sweeps
        if (comp_err() > 0.5) {
            for (int sweep = 0; sweep < 50 && comp_err() > 0.5; ++sweep) {
                for (int z = 0; z <= zc; ++z) {
                    double lo = 0.0, hi = 255.0;
                    for (int b = 0; b < 40; ++b) {
                        double mid = 0.5 * (lo + hi);
                        (eval_array(g, mid) < lam[z] ? lo : hi) = mid;
                    }
                    g[z] = 0.5 * (g[z] + 0.5 * (lo + hi));
                }
                for (int z = 1; z <= zc; ++z) g[z] = std::max(g[z], g[z - 1]);
                extend();
            }
        }
        out.map[c] = g;
    }
    out.clamp_range();
    out.monotone_repair();
    return out;
}

ImfTable invert(const ImfTable& imf) {
    if (!imf.monotone())
        throw InvalidArgument("invert: non-monotone input table");
    ImfTable out;
    for (int c = 0; c < 3; ++c) out.map[c] = invert_array(imf.map[c]);
    return out;
}

ImfTable compose(const ImfTable& outer, const ImfTable& inner) {
    ImfTable out;
    for (int c = 0; c < 3; ++c)
        for (int z = 0; z < 256; ++z)
            out.map[c][z] = eval_array(outer.map[c], inner.map[c][z]);
    out.monotone_repair();
    out.clamp_range();
    return out;
}

ImfTable identity_imf() {
    ImfTable t;
    for (int c = 0; c < 3; ++c)
        for (int z = 0; z < 256; ++z) t.map[c][z] = double(z);
    return t;
}

} // namespace expi
