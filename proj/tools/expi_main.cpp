// Command-line frontend for the exposure-interpolation pipeline.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "expi/dataio.hpp"
#include "expi/image_io.hpp"
#include "expi/interp.hpp"
#include "expi/mef.hpp"
#include "expi/metrics.hpp"
#include "expi/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace expi;

namespace {

void write_run_json(const fs::path& out_dir, const json& j) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "run.json");
    if (!f) throw IoError("cannot write " + (out_dir / "run.json").string());
    f << j.dump(2) << "\n";
}

// "gamma:2.2" -> CrfModel
CrfModel parse_crf(const std::string& s) {
    if (s.rfind("gamma:", 0) != 0)
        throw InvalidArgument("unsupported CRF argument (expected gamma:<exponent>): " + s);
    return make_gamma_crf(std::stod(s.substr(6)));
}

struct ImfPair {
    ImfTable imf13; // dark -> medium
    ImfTable imf23; // bright -> medium
};

ImfPair derive_imfs(const ExposureImage& dark, const ExposureImage& bright,
                    const std::string& crf_spec, double ratio) {
    ImfPair out;
    if (!crf_spec.empty()) {
        CrfModel crf = parse_crf(crf_spec);
        out.imf13 = imf_from_crf(crf, std::sqrt(ratio));
        out.imf23 = imf_from_crf(crf, 1.0 / std::sqrt(ratio));
    } else {
        ImfTable db = estimate_pair_imf(dark, bright);
        out.imf13 = functional_sqrt(db);
        out.imf23 = compose(out.imf13, invert(db));
    }
    return out;
}

int cmd_synth(std::uint64_t seed, const std::string& out_dir, int width, int height,
              double gamma, double ratio, double noise) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.width = width;
    cfg.height = height;
    cfg.gamma = gamma;
    cfg.ratio = ratio;
    cfg.noise = noise;
    SynthScene scene = synth_scene(cfg);
    save_scene(scene, out_dir);
    write_run_json(out_dir, {{"command", "synth"},
                             {"seed", seed},
                             {"width", width},
                             {"height", height},
                             {"gamma", gamma},
                             {"ratio", ratio},
                             {"noise", noise},
                             {"out", out_dir}});
    std::cout << "wrote stack to " << out_dir << "\n";
    return 0;
}

int cmd_interpolate(const std::string& dark_path, const std::string& bright_path,
                    const std::string& out_path, double xi_l, double xi_u,
                    const std::string& crf_spec, double ratio,
                    const std::string& truth_path) {
    ExposureImage dark = read_image(dark_path, 1.0);
    ExposureImage bright = read_image(bright_path, ratio);
    ImfPair imfs = derive_imfs(dark, bright, crf_spec, ratio);

    WeightParams wp;
    wp.xi_l = xi_l;
    wp.xi_u = xi_u;
    FloatImage y0 = synthesize_intermediate(dark, bright, imfs.imf13, imfs.imf23, wp);

    fs::path out(out_path);
    fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    fs::create_directories(dir);
    write_pfm(out.string(), y0);
    write_png((dir / (out.stem().string() + ".png")).string(),
              quantize(y0, std::sqrt(ratio)));
    save_imf_csv((dir / "imf13.csv").string(), imfs.imf13);
    save_imf_csv((dir / "imf23.csv").string(), imfs.imf23);
    write_run_json(dir, {{"command", "interpolate"},
                         {"dark", dark_path},
                         {"bright", bright_path},
                         {"out", out_path},
                         {"xi_l", xi_l},
                         {"xi_u", xi_u},
                         {"crf", crf_spec},
                         {"ratio", ratio}});
    if (!truth_path.empty()) {
        FloatImage truth = to_float(read_image(truth_path));
        std::cout << "psnr," << psnr(y0, truth) << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

// Every subdirectory of `stacks_dir` holding exposures.csv is one scene.
std::vector<Stack> load_scene_stacks(const std::string& stacks_dir) {
    std::vector<fs::path> manifests;
    if (fs::exists(fs::path(stacks_dir) / "exposures.csv"))
        manifests.push_back(fs::path(stacks_dir) / "exposures.csv");
    else if (fs::is_directory(stacks_dir))
        for (const auto& e : fs::directory_iterator(stacks_dir))
            if (e.is_directory() && fs::exists(e.path() / "exposures.csv"))
                manifests.push_back(e.path() / "exposures.csv");
    if (manifests.empty()) throw IoError("no exposures.csv found under " + stacks_dir);
    std::sort(manifests.begin(), manifests.end());
    std::vector<Stack> stacks;
    for (const auto& m : manifests) stacks.push_back(load_stack(m.string()));
    return stacks;
}

int cmd_refine_train(const std::string& stacks_dir, const std::string& model_path,
                     const std::string& crf_spec, const std::string& loss_name,
                     NetConfig net, double w_c, double w_f, double psi_c,
                     std::uint64_t sample_seed) {
    std::vector<Stack> stacks = load_scene_stacks(stacks_dir);
    std::vector<ResidualPair> pairs;
    for (const auto& s : stacks) {
        if (!s.medium) throw IoError("training stack without a medium image in " + stacks_dir);
        ImfPair imfs = derive_imfs(s.dark, s.bright, crf_spec, s.exposure_ratio());
        ResidualPair p;
        p.y0 = synthesize_intermediate(s.dark, s.bright, imfs.imf13, imfs.imf23);
        p.y = to_float(*s.medium);
        pairs.push_back(std::move(p));
    }

    TrainOptions opt;
    opt.net = net;
    opt.weights.w_c = w_c;
    opt.weights.w_f = w_f;
    opt.psi.c = psi_c;
    opt.sample_seed = sample_seed;
    if (loss_name == "hybrid") opt.recon = ReconKind::hybrid;
    else if (loss_name == "l1") opt.recon = ReconKind::l1;
    else if (loss_name == "l2") opt.recon = ReconKind::l2;
    else throw InvalidArgument("unknown loss: " + loss_name);

    RefineNet refine_net(net);
    TrainResult result = train(refine_net, pairs, opt);

    fs::path out(model_path);
    fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    fs::create_directories(dir);
    save_refinenet(model_path, refine_net);
    save_history_csv((dir / "history.csv").string(), result.history);
    write_run_json(dir, {{"command", "refine-train"},
                         {"stacks", stacks_dir},
                         {"model", model_path},
                         {"crf", crf_spec},
                         {"loss", loss_name},
                         {"epochs", net.epochs},
                         {"learning_rate", net.learning_rate},
                         {"patch_size", net.patch_size},
                         {"batch_size", net.batch_size},
                         {"feature_channels", net.feature_channels},
                         {"seed", net.seed},
                         {"sample_seed", sample_seed},
                         {"w_c", w_c},
                         {"w_f", w_f},
                         {"psi_c", psi_c}});
    std::cout << "final loss," << result.history.back().loss << "\n";
    std::cout << "final psnr," << result.history.back().psnr << "\n";
    return 0;
}

int cmd_refine_apply(const std::string& model_path, const std::string& y0_path,
                     const std::string& out_path) {
    RefineNet net = load_refinenet(model_path);
    FloatImage y0;
    if (fs::path(y0_path).extension() == ".pfm") y0 = read_pfm(y0_path);
    else y0 = to_float(read_image(y0_path));
    FloatImage yhat = apply_refinement(net, y0);
    fs::path out(out_path);
    fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    fs::create_directories(dir);
    if (out.extension() == ".pfm") write_pfm(out_path, yhat);
    else write_image(out_path, quantize(yhat));
    write_run_json(dir, {{"command", "refine-apply"},
                         {"model", model_path},
                         {"y0", y0_path},
                         {"out", out_path}});
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_fuse(const std::vector<std::string>& inputs, const std::string& out_path,
             int levels) {
    std::vector<ExposureImage> stack;
    for (const auto& p : inputs) stack.push_back(read_image(p));
    MefParams mp;
    mp.levels = levels;
    ExposureImage fused = fuse_mef(stack, mp);
    fs::path out(out_path);
    fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    fs::create_directories(dir);
    write_image(out_path, fused);
    write_run_json(dir, {{"command", "fuse"},
                         {"inputs", inputs},
                         {"out", out_path},
                         {"levels", levels}});
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& fused_path, const std::string& truth_path,
                 const std::vector<std::string>& refs, const std::string& out_csv) {
    FloatImage fused = fs::path(fused_path).extension() == ".pfm"
                           ? read_pfm(fused_path)
                           : to_float(read_image(fused_path));
    std::vector<std::pair<std::string, double>> rows;
    if (!truth_path.empty()) {
        FloatImage truth = to_float(read_image(truth_path));
        rows.emplace_back("psnr", psnr(fused, truth));
        rows.emplace_back("ssim", ssim(fused, truth));
        PsiParams pp;
        FloatImage zero(fused.width, fused.height, fused.channels);
        rows.emplace_back("l_r", reconstruction_loss(truth, zero, fused, pp));
        rows.emplace_back("l_c", color_loss(truth, fused));
        FeatureExtractor fx;
        rows.emplace_back("l_f", feature_loss(fx, truth, fused));
        LossWeights lw;
        rows.emplace_back("l_d", rows[2].second + lw.w_c * rows[3].second +
                                     lw.w_f * rows[4].second);
    }
    if (!refs.empty()) {
        std::vector<ExposureImage> stack;
        for (const auto& p : refs) stack.push_back(read_image(p));
        rows.emplace_back("mef_ssim", mef_ssim(fused, stack));
    }
    if (rows.empty())
        throw InvalidArgument("evaluate: provide --truth and/or --refs");

    std::ostream* os = &std::cout;
    std::ofstream f;
    if (!out_csv.empty()) {
        f.open(out_csv);
        if (!f) throw IoError("cannot write " + out_csv);
        os = &f;
    }
    *os << "metric,value\n";
    os->precision(10);
    for (const auto& [k, v] : rows) *os << k << "," << v << "\n";
    if (!out_csv.empty())
        for (const auto& [k, v] : rows) std::cout << k << "," << v << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exposure interpolation, refinement, and multi-exposure fusion"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic exposure stack");
    std::uint64_t seed = 1;
    std::string out_dir;
    int width = 256, height = 256;
    double gamma = 2.2, ratio = 16.0, noise = 1.0;
    synth->add_option("--seed", seed, "RNG seed");
    synth->add_option("--out", out_dir, "output stack directory")->required();
    synth->add_option("--width", width);
    synth->add_option("--height", height);
    synth->add_option("--gamma", gamma, "CRF gamma exponent");
    synth->add_option("--ratio", ratio, "bright/dark exposure ratio");
    synth->add_option("--noise", noise, "code-space Gaussian sigma");

    // interpolate
    auto* interp = app.add_subcommand("interpolate", "Synthesize the intermediate image y0");
    std::string dark_path, bright_path, out_path, crf_spec, truth_path;
    double xi_l = 25.0, xi_u = 230.0, iratio = 16.0;
    interp->add_option("--dark", dark_path)->required();
    interp->add_option("--bright", bright_path)->required();
    interp->add_option("--out", out_path, "output PFM path")->required();
    interp->add_option("--xi-l", xi_l, "lower weight threshold (default 25)");
    interp->add_option("--xi-u", xi_u, "upper weight threshold (default 230)");
    interp->add_option("--crf", crf_spec, "known CRF, e.g. gamma:2.2 (skips estimation)");
    interp->add_option("--ratio", iratio, "bright/dark exposure ratio");
    interp->add_option("--truth", truth_path, "optional ground truth for PSNR report");

    // refine-train
    auto* rtrain = app.add_subcommand("refine-train", "Train the residual refinement net");
    std::string stacks_dir, model_path, loss_name = "hybrid";
    NetConfig net;
    double w_c = 0.01, w_f = 0.01, psi_c = 5.0;
    std::uint64_t sample_seed = 7;
    rtrain->add_option("--stacks", stacks_dir, "directory of stack directories")->required();
    rtrain->add_option("--model", model_path, "output model path")->required();
    rtrain->add_option("--crf", crf_spec, "known CRF, e.g. gamma:2.2");
    rtrain->add_option("--loss", loss_name, "hybrid | l1 | l2 (default hybrid)");
    rtrain->add_option("--epochs", net.epochs);
    rtrain->add_option("--lr", net.learning_rate);
    rtrain->add_option("--patch", net.patch_size);
    rtrain->add_option("--batch", net.batch_size);
    rtrain->add_option("--channels", net.feature_channels);
    rtrain->add_option("--rrgs", net.rrg_count);
    rtrain->add_option("--dabs", net.dabs_per_rrg);
    rtrain->add_option("--seed", net.seed, "parameter init seed");
    rtrain->add_option("--sample-seed", sample_seed, "patch sampling seed");
    rtrain->add_option("--wc", w_c, "color loss weight (default 0.01)");
    rtrain->add_option("--wf", w_f, "feature loss weight (default 0.01)");
    rtrain->add_option("--psi-c", psi_c,
                       "hybrid loss transition point in codes (default 5, i.e. 5/255)");

    // refine-apply
    auto* rapply = app.add_subcommand("refine-apply", "Apply a trained refinement net");
    std::string y0_path;
    rapply->add_option("--model", model_path)->required();
    rapply->add_option("--y0", y0_path, "intermediate image (.pfm or .png)")->required();
    rapply->add_option("--out", out_path)->required();

    // fuse
    auto* fuse = app.add_subcommand("fuse", "Multi-scale exposure fusion");
    std::vector<std::string> inputs;
    int levels = 0;
    fuse->add_option("--inputs", inputs, "input images")->required()->expected(-1);
    fuse->add_option("--out", out_path)->required();
    fuse->add_option("--levels", levels, "pyramid levels (0 = auto)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Quality metrics as metric,value CSV");
    std::vector<std::string> refs;
    std::string fused_path, out_csv;
    eval->add_option("--fused", fused_path)->required();
    eval->add_option("--truth", truth_path, "ground truth for psnr/ssim/losses");
    eval->add_option("--refs", refs, "input stack for mef_ssim")->expected(-1);
    eval->add_option("--out", out_csv, "CSV output path (default stdout)");

    try {
        app.parse(argc, argv);
        if (*synth) return cmd_synth(seed, out_dir, width, height, gamma, ratio, noise);
        if (*interp)
            return cmd_interpolate(dark_path, bright_path, out_path, xi_l, xi_u, crf_spec,
                                   iratio, truth_path);
        if (*rtrain)
            return cmd_refine_train(stacks_dir, model_path, crf_spec, loss_name, net, w_c,
                                    w_f, psi_c, sample_seed);
        if (*rapply) return cmd_refine_apply(model_path, y0_path, out_path);
        if (*fuse) return cmd_fuse(inputs, out_path, levels);
        if (*eval) return cmd_evaluate(fused_path, truth_path, refs, out_csv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage errors collapse to exit code 1
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
