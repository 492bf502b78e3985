#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "expi/dataio.hpp"
#include "expi/interp.hpp"
#include "expi/metrics.hpp"

using namespace expi;

namespace {

ExposureImage uniform_image(int w, int h, std::uint8_t code, double dt) {
    ExposureImage img(w, h, dt);
    for (auto& v : img.data) v = code;
    return img;
}

ImfTable scaled_table(double slope) {
    ImfTable t;
    for (int c = 0; c < 3; ++c)
        for (int z = 0; z < 256; ++z) t.map[c][z] = std::min(slope * z, 255.0);
    return t;
}

} // namespace

TEST_CASE("weight_w1 matches the smoothstep definition") {
    WeightParams p;
    CHECK(weight_w1(10.0, p) == 0.0);
    CHECK(weight_w1(55.0, p) == 1.0);
    CHECK(weight_w1(40.0, p) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(weight_w1(0.0, p) == 0.0);
    CHECK(weight_w1(255.0, p) == 1.0);
    // closed form at an interior point: h1 = (55-30)/30
    double h1 = (55.0 - 30.0) / (55.0 - 25.0);
    CHECK(weight_w1(30.0, p) == doctest::Approx(1.0 - 3 * h1 * h1 + 2 * h1 * h1 * h1));
}

TEST_CASE("weight_w2 matches the smoothstep definition") {
    WeightParams p;
    CHECK(weight_w2(100.0, p) == 1.0);
    CHECK(weight_w2(230.0, p) == 0.0);
    CHECK(weight_w2(215.0, p) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(weight_w2(255.0, p) == 0.0);
    double h2 = (210.0 - 200.0) / (230.0 - 200.0);
    CHECK(weight_w2(210.0, p) == doctest::Approx(1.0 - 3 * h2 * h2 + 2 * h2 * h2 * h2));
}

TEST_CASE("weights are continuous at every branch boundary") {
    WeightParams p;
    const double d = 1e-12;
    for (double b : {p.xi_l, 55.0})
        CHECK(std::fabs(weight_w1(b - d, p) - weight_w1(b + d, p)) <= 1e-12);
    for (double b : {200.0, p.xi_u})
        CHECK(std::fabs(weight_w2(b - d, p) - weight_w2(b + d, p)) <= 1e-12);
}

TEST_CASE("W1 is non-decreasing and W2 non-increasing, both in [0,1]") {
    WeightParams p;
    double prev1 = weight_w1(0.0, p), prev2 = weight_w2(0.0, p);
    for (double z = 0.25; z <= 255.0; z += 0.25) {
        double w1 = weight_w1(z, p), w2 = weight_w2(z, p);
        CHECK(w1 >= prev1 - 1e-15);
        CHECK(w2 <= prev2 + 1e-15);
        CHECK(w1 >= 0.0);
        CHECK(w1 <= 1.0);
        CHECK(w2 >= 0.0);
        CHECK(w2 <= 1.0);
        prev1 = w1;
        prev2 = w2;
    }
}

TEST_CASE("WeightParams validation rejects out-of-range thresholds") {
    WeightParams p;
    CHECK_NOTHROW(p.validate());
    p.xi_l = 55.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p.xi_l = 25.0;
    p.xi_u = 200.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("saturated bright pixel takes the dark image's mapping only") {
    ExposureImage dark = uniform_image(2, 2, 128, 1.0);
    ExposureImage bright = uniform_image(2, 2, 250, 16.0);
    ImfTable imf13 = scaled_table(1.5);
    ImfTable imf23 = scaled_table(0.5);
    FloatImage y0 = synthesize_intermediate(dark, bright, imf13, imf23);
    CHECK(y0.at(0, 0, 0) == doctest::Approx(imf13.eval(0, 128.0)).epsilon(1e-12));
    CHECK(y0.at(1, 1, 2) == doctest::Approx(1.5 * 128.0).epsilon(1e-12));
}

TEST_CASE("under-exposed dark pixel takes the bright image's mapping only") {
    ExposureImage dark = uniform_image(2, 2, 10, 1.0);
    ExposureImage bright = uniform_image(2, 2, 100, 16.0);
    ImfTable imf13 = scaled_table(2.0);
    ImfTable imf23 = scaled_table(0.5);
    FloatImage y0 = synthesize_intermediate(dark, bright, imf13, imf23);
    CHECK(y0.at(0, 0, 1) == doctest::Approx(imf23.eval(1, 100.0)).epsilon(1e-12));
    CHECK(y0.at(1, 0, 0) == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("both weights zero falls back to the unweighted mean") {
    ExposureImage dark = uniform_image(1, 1, 10, 1.0);
    ExposureImage bright = uniform_image(1, 1, 250, 16.0);
    ImfTable imf13 = scaled_table(2.0);
    ImfTable imf23 = scaled_table(0.5);
    FloatImage y0 = synthesize_intermediate(dark, bright, imf13, imf23);
    double expected = 0.5 * (imf13.eval(0, 10.0) + imf23.eval(0, 250.0));
    CHECK(y0.at(0, 0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("output is a convex combination of the two mapped values") {
    std::mt19937_64 rng(13);
    ExposureImage dark(17, 11, 1.0), bright(17, 11, 16.0);
    for (auto& v : dark.data) v = std::uint8_t(rng() % 256);
    for (auto& v : bright.data) v = std::uint8_t(rng() % 256);
    ImfTable imf13 = scaled_table(1.9);
    ImfTable imf23 = scaled_table(0.6);
    FloatImage y0 = synthesize_intermediate(dark, bright, imf13, imf23);
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 17; ++x)
            for (int c = 0; c < 3; ++c) {
                double a = imf13.eval(c, dark.at(x, y, c));
                double b = imf23.eval(c, bright.at(x, y, c));
                CHECK(y0.at(x, y, c) >= std::min(a, b) - 1e-9);
                CHECK(y0.at(x, y, c) <= std::max(a, b) + 1e-9);
            }
}

TEST_CASE("identity maps and identical inputs reproduce the input") {
    std::mt19937_64 rng(29);
    ExposureImage img(9, 7, 1.0);
    for (auto& v : img.data) v = std::uint8_t(rng() % 256);
    ExposureImage img2 = img;
    img2.exposure_time = 4.0;
    FloatImage y0 = synthesize_intermediate(img, img2, identity_imf(), identity_imf());
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(y0.data[i] == doctest::Approx(double(img.data[i])).epsilon(1e-12));
}

TEST_CASE("dimension mismatch is rejected") {
    ExposureImage dark = uniform_image(4, 4, 100, 1.0);
    ExposureImage bright = uniform_image(4, 5, 100, 16.0);
    CHECK_THROWS_AS(synthesize_intermediate(dark, bright, identity_imf(), identity_imf()),
                    InvalidArgument);
}

TEST_CASE("synthetic ratio-16 stack reaches 40 dB against the true medium exposure") {
    SynthConfig cfg;
    cfg.seed = 1;
    cfg.width = 128;
    cfg.height = 128;
    cfg.noise = 0.0;
    SynthScene s = synth_scene(cfg);
    ImfTable db = estimate_pair_imf(s.dark, s.bright);
    ImfTable imf13 = functional_sqrt(db);          // dark -> medium
    ImfTable imf23 = compose(imf13, invert(db));   // bright -> medium
    FloatImage y0 = synthesize_intermediate(s.dark, s.bright, imf13, imf23);
    CHECK(psnr(y0, to_float(s.truth)) >= 40.0);
}
