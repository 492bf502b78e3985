#pragma once

#include <array>
#include <string>
#include <vector>

#include "expi/image.hpp"

namespace expi {

// Per-channel 256-entry intensity mapping table on the [0,255] scale.
// Entries are monotone non-decreasing in z.
struct ImfTable {
    std::array<std::array<double, 256>, 3> map{};

    bool monotone(double eps = 1e-9) const;
    void clamp_range();        // clamp entries into [0,255]
    void monotone_repair();    // running-maximum pass
    double eval(int channel, double z) const; // linear interpolation between entries
};

// CSV serialization: header line "imf-v1", then channel,z,value rows.
void save_imf_csv(const std::string& path, const ImfTable& table);
ImfTable load_imf_csv(const std::string& path);

// Camera response function sampled at 1024 (irradiance, code) pairs per
// channel, strictly increasing with F(0)=0 and F(max)=255.
struct CrfModel {
    struct Channel {
        std::vector<double> irradiance; // ascending, irradiance[0] == 0
        std::vector<double> code;       // strictly increasing, back() == 255
    };
    std::array<Channel, 3> channels;

    static constexpr int samples = 1024;

    double forward(int channel, double e) const;  // F_c, linear interpolation
    double inverse(int channel, double z) const;  // F_c^{-1}, table lookup
    void validate() const;
};

// Gamma CRF F(e) = 255 * e^(1/gamma), identical for all channels.
CrfModel make_gamma_crf(double gamma);

// One channel's (irradiance-proxy, code) scatter, sorted by the proxy.
struct ScatterPoint {
    double x; // irradiance proxy
    double z; // code
};
using ScatterPlot = std::vector<ScatterPoint>;

// Double-sigmoid curve z = k1/(1+e^(k2+k3 x)) + k4/(1+e^(k5+k6 x)).
struct DoubleSigmoidParams {
    std::array<double, 6> k{};
    double residual_rms = 0.0;

    double eval(double x) const;
};

// Piecewise-linear interpolation with end clamping; equal-x ties are
// averaged before interpolation.
double eval_linear(const ScatterPlot& points, double x);

// Damped Gauss-Newton least-squares fit with seeded jittered restarts.
// Throws NumericError if every restart diverges.
DoubleSigmoidParams fit_double_sigmoid(const ScatterPlot& points);

enum class CrfEval { linear, double_sigmoid };

// Eq.-(4)-style table: z -> F_c(ratio * F_c^{-1}(z)), the curve evaluated
// either by monotone linear interpolation of the samples or by a fitted
// double sigmoid.
ImfTable imf_from_crf(const CrfModel& crf, double ratio,
                      CrfEval eval = CrfEval::linear);

// Cumulative-histogram matching between codes of the dark and bright image,
// restricted to pixels with both codes in [5,250]. Throws NumericError when
// a channel has no comparable pixels (entirely saturated input).
ImfTable estimate_pair_imf(const ExposureImage& dark, const ExposureImage& bright);

// Monotone g with g(g(z)) ~= imf(z): averaged fixed-point iteration
// g <- (g + g^{-1} o imf)/2 with a per-entry bisection fallback.
ImfTable functional_sqrt(const ImfTable& imf);

// Monotone pseudo-inverse; plateaus invert to their midpoint.
ImfTable invert(const ImfTable& imf);

// h(z) = outer(inner(z)) as a table.
ImfTable compose(const ImfTable& outer, const ImfTable& inner);

ImfTable identity_imf();

} // namespace expi
