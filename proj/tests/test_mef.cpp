#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "expi/dataio.hpp"
#include "expi/mef.hpp"

using namespace expi;

namespace {

ExposureImage random_exposure(int w, int h, std::uint64_t seed, double dt) {
    std::mt19937_64 rng(seed);
    ExposureImage img(w, h, dt);
    for (auto& v : img.data) v = std::uint8_t(rng() % 256);
    return img;
}

ExposureImage flat(int w, int h, std::uint8_t code, double dt) {
    ExposureImage img(w, h, dt);
    for (auto& v : img.data) v = code;
    return img;
}

} // namespace

TEST_CASE("weight maps are non-negative and sum to 1 at every pixel") {
    std::vector<ExposureImage> stack = {random_exposure(32, 24, 1, 1.0),
                                        random_exposure(32, 24, 2, 4.0),
                                        random_exposure(32, 24, 3, 16.0)};
    auto weights = mef_weights(stack);
    REQUIRE(weights.size() == 3);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x) {
            double sum = 0.0;
            for (const auto& w : weights) {
                CHECK(w.at(x, y, 0) >= 0.0);
                sum += w.at(x, y, 0);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
}

TEST_CASE("two identical images split the weight evenly") {
    ExposureImage img = random_exposure(16, 16, 4, 1.0);
    ExposureImage img2 = img;
    img2.exposure_time = 4.0;
    auto weights = mef_weights({img, img2});
    // symmetry is exact; the absolute value sits a hair under 0.5 because of
    // the normalization regularizer
    for (std::size_t i = 0; i < weights[0].data.size(); ++i) {
        CHECK(weights[0].data[i] == weights[1].data[i]);
        CHECK(weights[0].data[i] == doctest::Approx(0.5).epsilon(1e-6));
    }
}

TEST_CASE("well-exposedness drives mid-gray far above near-black") {
    auto weights = mef_weights({flat(16, 16, 128, 4.0), flat(16, 16, 5, 1.0)});
    for (double v : weights[0].data) CHECK(v > 0.99);
    for (double v : weights[1].data) CHECK(v < 0.01);
}

TEST_CASE("fusing identical images reproduces the input within one code") {
    ExposureImage img = random_exposure(32, 32, 5, 1.0);
    ExposureImage img2 = img, img3 = img;
    img2.exposure_time = 4.0;
    img3.exposure_time = 16.0;
    ExposureImage fused = fuse_mef({img, img2, img3});
    REQUIRE(fused.width == 32);
    REQUIRE(fused.height == 32);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(int(fused.data[i]) - int(img.data[i])) <= 1);
}

TEST_CASE("a single-image stack round-trips within one code") {
    ExposureImage img = random_exposure(20, 20, 6, 1.0);
    ExposureImage fused = fuse_mef({img});
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(std::abs(int(fused.data[i]) - int(img.data[i])) <= 1);
}

TEST_CASE("fusion is invariant to input order") {
    SynthConfig cfg;
    cfg.seed = 7;
    cfg.width = 48;
    cfg.height = 48;
    SynthScene s = synth_scene(cfg);
    ExposureImage a = fuse_mef({s.dark, s.truth, s.bright});
    ExposureImage b = fuse_mef({s.bright, s.dark, s.truth});
    CHECK(a.data == b.data);
}

TEST_CASE("fused output stays in range on a real synthetic stack") {
    SynthConfig cfg;
    cfg.seed = 8;
    cfg.width = 64;
    cfg.height = 64;
    cfg.noise = 1.0;
    SynthScene s = synth_scene(cfg);
    ExposureImage fused = fuse_mef({s.dark, s.bright});
    CHECK(fused.width == 64);
    CHECK(fused.height == 64);
    // uint8 storage guarantees range; validate() checks structure
    CHECK_NOTHROW(fused.validate());
}

TEST_CASE("explicit level counts are honored and bad params rejected") {
    ExposureImage a = random_exposure(32, 32, 9, 1.0);
    ExposureImage b = random_exposure(32, 32, 10, 4.0);
    MefParams p;
    p.levels = 2;
    CHECK_NOTHROW(fuse_mef({a, b}, p));
    p.levels = 0; // auto
    CHECK_NOTHROW(fuse_mef({a, b}, p));
    MefParams bad;
    bad.contrast_exp = -1.0;
    CHECK_THROWS_AS(fuse_mef({a, b}, bad), InvalidArgument);
}

TEST_CASE("dimension mismatches and empty stacks are rejected") {
    ExposureImage a = random_exposure(16, 16, 11, 1.0);
    ExposureImage b = random_exposure(16, 17, 12, 4.0);
    CHECK_THROWS_AS(mef_weights({a, b}), InvalidArgument);
    CHECK_THROWS_AS(fuse_mef({a, b}), InvalidArgument);
    CHECK_THROWS_AS(mef_weights({}), InvalidArgument);
}
