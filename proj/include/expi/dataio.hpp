#pragma once

#include <optional>
#include <string>
#include <vector>

#include "expi/image.hpp"
#include "expi/imf.hpp"

namespace expi {

// One stack directory: exposures.csv rows of filename,exposure_time,role.
struct StackManifest {
    struct Row {
        std::string filename;
        double exposure_time = 0.0;
        std::string role; // dark | medium | bright
    };
    std::string directory;
    std::vector<Row> rows;

    void validate() const;
};

StackManifest load_manifest(const std::string& manifest_path);
void save_manifest(const StackManifest& manifest); // writes directory/exposures.csv

struct Stack {
    ExposureImage dark;
    std::optional<ExposureImage> medium;
    ExposureImage bright;

    double exposure_ratio() const { return bright.exposure_time / dark.exposure_time; }
    // Eq.-(1) medium exposure: geometric mean of the pair
    double medium_exposure_time() const;
};

Stack load_stack(const std::string& manifest_path);

// Procedural synthetic scene configuration.
struct SynthConfig {
    std::uint64_t seed = 1;
    int width = 256;
    int height = 256;
    double gamma = 2.2;  // CRF exponent
    double ratio = 16.0; // bright/dark exposure ratio
    double noise = 1.0;  // Gaussian sigma in codes, applied to the inputs

    void validate() const;
};

struct SynthScene {
    ExposureImage dark;    // x1 (short exposure)
    ExposureImage truth;   // y, noise-free
    ExposureImage bright;  // x2 (long exposure)
    FloatImage radiance;   // E(p), [0,1]
    CrfModel crf;
};

// Gradients + blobs + texture octaves with deliberate deep shadows and
// highlights; exposures dark=1s, bright=ratio s, medium=sqrt(ratio) s.
SynthScene synth_scene(const SynthConfig& cfg);

// Deterministic disjoint, exhaustive index split.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_dataset(std::size_t count, double train_fraction, std::uint64_t seed);

// Write the scene as a stack directory (PNG images + manifest + truth.png).
void save_scene(const SynthScene& scene, const std::string& directory);

} // namespace expi
