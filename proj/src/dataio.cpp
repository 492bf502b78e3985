#include "expi/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "expi/image_io.hpp"

namespace expi {

namespace fs = std::filesystem;

void StackManifest::validate() const {
    if (rows.empty()) throw IoError("manifest has no rows");
    double dark_dt = 0.0, bright_dt = 0.0;
    std::vector<std::string> seen;
    for (const auto& r : rows) {
        if (r.role != "dark" && r.role != "medium" && r.role != "bright")
            throw IoError("manifest role must be dark|medium|bright, got " + r.role);
        if (std::find(seen.begin(), seen.end(), r.role) != seen.end())
            throw IoError("duplicate role in manifest: " + r.role);
        seen.push_back(r.role);
        if (!(r.exposure_time > 0.0))
            throw IoError("non-positive exposure time in manifest");
        if (r.role == "dark") dark_dt = r.exposure_time;
        if (r.role == "bright") bright_dt = r.exposure_time;
    }
    if (dark_dt == 0.0 || bright_dt == 0.0)
        throw IoError("manifest needs both a dark and a bright row");
    if (!(bright_dt / dark_dt > 1.0))
        throw IoError("manifest exposure ratio bright/dark must be > 1");
}

StackManifest load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path);
    StackManifest m;
    m.directory = fs::path(manifest_path).parent_path().string();
    std::string line;
    if (!std::getline(in, line) || line != "filename,exposure_time,role")
        throw IoError("bad manifest header in " + manifest_path);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        StackManifest::Row row;
        std::string dt;
        if (!std::getline(ss, row.filename, ',') || !std::getline(ss, dt, ',') ||
            !std::getline(ss, row.role))
            throw IoError("bad manifest row in " + manifest_path);
        row.exposure_time = std::stod(dt);
        m.rows.push_back(row);
    }
    m.validate();
    return m;
}

void save_manifest(const StackManifest& manifest) {
    manifest.validate();
    fs::path path = fs::path(manifest.directory) / "exposures.csv";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "filename,exposure_time,role\n";
    out.precision(17);
    for (const auto& r : manifest.rows)
        out << r.filename << "," << r.exposure_time << "," << r.role << "\n";
    if (!out) throw IoError("short write: " + path.string());
}

double Stack::medium_exposure_time() const {
    return std::sqrt(dark.exposure_time * bright.exposure_time);
}

Stack load_stack(const std::string& manifest_path) {
    StackManifest m = load_manifest(manifest_path);
    Stack s;
    for (const auto& r : m.rows) {
        fs::path p = fs::path(m.directory) / r.filename;
        if (!fs::exists(p)) throw IoError("missing image file: " + p.string());
        ExposureImage img = read_image(p.string(), r.exposure_time);
        if (r.role == "dark") s.dark = img;
        else if (r.role == "medium") s.medium = img;
        else s.bright = img;
    }
    if (s.dark.width != s.bright.width || s.dark.height != s.bright.height ||
        (s.medium && (s.medium->width != s.dark.width || s.medium->height != s.dark.height)))
        throw IoError("stack images have mismatched dimensions");
    if (s.medium && !(s.dark.exposure_time < s.medium->exposure_time &&
                      s.medium->exposure_time < s.bright.exposure_time))
        throw IoError("stack exposure times must satisfy dark < medium < bright");
    return s;
}

void SynthConfig::validate() const {
    if (width < 8 || height < 8) throw InvalidArgument("SynthConfig: scene too small");
    if (!(ratio > 1.0)) throw InvalidArgument("SynthConfig: ratio must be > 1");
    if (!(gamma > 0.0)) throw InvalidArgument("SynthConfig: gamma must be > 0");
    if (noise < 0.0) throw InvalidArgument("SynthConfig: noise must be >= 0");
}

namespace {

// smooth value noise: coarse random grid, bilinear interpolation
FloatImage value_noise(std::mt19937_64& rng, int w, int h, int cells) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int gw = cells + 1, gh = cells + 1;
    std::vector<double> grid(std::size_t(gw) * gh);
    for (double& v : grid) v = u(rng);
    FloatImage out(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double fx = double(x) / w * cells, fy = double(y) / h * cells;
            int ix = int(fx), iy = int(fy);
            double tx = fx - ix, ty = fy - iy;
            double a = grid[std::size_t(iy) * gw + ix];
            double b = grid[std::size_t(iy) * gw + ix + 1];
            double c = grid[std::size_t(iy + 1) * gw + ix];
            double d = grid[std::size_t(iy + 1) * gw + ix + 1];
            out.at(x, y, 0) = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
        }
    return out;
}

ExposureImage render_exposure(const FloatImage& radiance, const CrfModel& crf, double dt,
                              double noise, std::mt19937_64& rng) {
    ExposureImage img(radiance.width, radiance.height, dt);
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t p = 0; p < radiance.data.size() / 3; ++p)
        for (int c = 0; c < 3; ++c) {
            double e = std::clamp(dt * radiance.data[p * 3 + c], 0.0, 1.0);
            double code = double(quantize_value(crf.forward(c, e)));
            if (noise > 0.0) code = double(quantize_value(code + noise * n(rng)));
            img.data[p * 3 + c] = std::uint8_t(code);
        }
    return img;
}

} // namespace

SynthScene synth_scene(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int w = cfg.width, h = cfg.height;

    // lightness field s in [0,1], mapped exponentially onto radiance so the
    // dark image's code range is covered densely from deep shadow upward
    constexpr double kEmin = 5e-5;
    double grad_top = 1.0 - std::log(1.25 / cfg.ratio) / std::log(kEmin);
    FloatImage s_field(w, h, 1);
    bool diag = rng() & 1;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double g = diag ? (x + y) / double(w + h - 2) : x / double(w - 1);
            s_field.at(x, y, 0) = grad_top * g; // gradient tops out near clip
        }

    // flat rectangles (plateau regions); the first one is a highlight sized
    // and placed into the pair's coverage gap — clipped in the long exposure
    // but still well-exposed at the medium exposure — so every scene carries
    // the kind of region the interpolation exists for, alongside the deep
    // shadows the gradient provides
    double clip_e = std::pow(250.0 / 255.0, cfg.gamma);
    double s_gap_lo = 1.0 - std::log(clip_e / cfg.ratio) / std::log(kEmin) + 0.01;
    double s_gap_hi = 1.0 - std::log(clip_e / std::sqrt(cfg.ratio)) / std::log(kEmin) - 0.01;
    int nrect = 2 + int(rng() % 3);
    for (int i = 0; i < nrect; ++i) {
        int rw = w / 8 + int(rng() % (w / 4)), rh = h / 8 + int(rng() % (h / 4));
        int rx = int(rng() % std::max(1, w - rw)), ry = int(rng() % std::max(1, h - rh));
        double level = u(rng) * grad_top;
        for (int y = ry; y < std::min(h, ry + rh); ++y)
            for (int x = rx; x < std::min(w, rx + rw); ++x) s_field.at(x, y, 0) = level;
    }

    // smooth bumps plus two compact highlights, truncated at 4 sigma so
    // their tails never lift the deep shadows
    int nblob = 4 + int(rng() % 3);
    for (int i = 0; i < nblob; ++i) {
        double cx = u(rng) * w, cy = u(rng) * h;
        bool highlight = i < 2;
        double sigma = w * (highlight ? 0.02 + 0.03 * u(rng) : 0.05 + 0.10 * u(rng));
        double amp = highlight ? 0.30 + 0.15 * u(rng) : 0.08 + 0.14 * u(rng);
        int x0 = std::max(0, int(cx - 4 * sigma)), x1 = std::min(w, int(cx + 4 * sigma) + 1);
        int y0 = std::max(0, int(cy - 4 * sigma)), y1 = std::min(h, int(cy + 4 * sigma) + 1);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                if (d2 > 16.0 * sigma * sigma) continue;
                s_field.at(x, y, 0) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    }

    // highlight plateau painted last so nothing overwrites it: a region
    // clipped in the long exposure but well-exposed at the medium exposure —
    // the coverage gap the interpolation exists for
    {
        int rw = w / 3 + int(rng() % (w / 4)), rh = h / 3 + int(rng() % (h / 4));
        int rx = int(rng() % std::max(1, w - rw)), ry = int(rng() % std::max(1, h - rh));
        double level = s_gap_lo + u(rng) * (s_gap_hi - s_gap_lo);
        for (int y = ry; y < std::min(h, ry + rh); ++y)
            for (int x = rx; x < std::min(w, rx + rw); ++x) s_field.at(x, y, 0) = level;
    }

    // texture octaves
    for (int cells : {6, 12, 24}) {
        FloatImage n = value_noise(rng, w, h, cells);
        for (std::size_t i = 0; i < s_field.data.size(); ++i)
            s_field.data[i] += 0.015 * n.data[i];
    }

    FloatImage rad(w, h, 1);
    for (std::size_t i = 0; i < rad.data.size(); ++i) {
        double s = std::clamp(s_field.data[i], 0.0, 1.0);
        rad.data[i] = std::pow(kEmin, 1.0 - s); // kEmin..1, log-uniform in s
    }

    // slight per-channel gains for color content
    double gains[3] = {0.92 + 0.16 * u(rng), 0.92 + 0.16 * u(rng), 0.92 + 0.16 * u(rng)};
    FloatImage radiance(w, h, 3);
    for (std::size_t p = 0; p < std::size_t(w) * h; ++p)
        for (int c = 0; c < 3; ++c)
            radiance.data[p * 3 + c] = std::clamp(rad.data[p] * gains[c], 0.0, 1.0);

    SynthScene scene;
    scene.radiance = radiance;
    scene.crf = make_gamma_crf(cfg.gamma);
    double dt_dark = 1.0, dt_bright = cfg.ratio, dt_med = std::sqrt(cfg.ratio);
    scene.dark = render_exposure(radiance, scene.crf, dt_dark, cfg.noise, rng);
    scene.bright = render_exposure(radiance, scene.crf, dt_bright, cfg.noise, rng);
    scene.truth = render_exposure(radiance, scene.crf, dt_med, 0.0, rng);
    return scene;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_dataset(std::size_t count, double train_fraction, std::uint64_t seed) {
    if (count == 0) throw InvalidArgument("split_dataset: empty input");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidArgument("split_dataset: fraction must be in (0,1)");
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t ntrain = std::size_t(std::llround(train_fraction * double(count)));
    ntrain = std::clamp<std::size_t>(ntrain, 1, count - 1);
    return {std::vector<std::size_t>(idx.begin(), idx.begin() + ntrain),
            std::vector<std::size_t>(idx.begin() + ntrain, idx.end())};
}

void save_scene(const SynthScene& scene, const std::string& directory) {
    fs::create_directories(directory);
    write_png((fs::path(directory) / "dark.png").string(), scene.dark);
    write_png((fs::path(directory) / "bright.png").string(), scene.bright);
    write_png((fs::path(directory) / "truth.png").string(), scene.truth);
    StackManifest m;
    m.directory = directory;
    m.rows = {{"dark.png", scene.dark.exposure_time, "dark"},
              {"truth.png", scene.truth.exposure_time, "medium"},
              {"bright.png", scene.bright.exposure_time, "bright"}};
    save_manifest(m);
}

} // namespace expi
