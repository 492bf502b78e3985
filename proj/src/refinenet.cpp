#include "expi/refinenet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace expi {

void NetConfig::validate() const {
    if (rrg_count < 1 || dabs_per_rrg < 1 || feature_channels < 1 || kernel_size < 1 ||
        ca_reduction < 1 || patch_size < 1 || batch_size < 1 || epochs < 1)
        throw InvalidArgument("NetConfig: all counts must be >= 1");
    if (feature_channels % ca_reduction != 0)
        throw InvalidArgument("NetConfig: feature_channels must be divisible by ca_reduction");
    if (!(learning_rate > 0.0))
        throw InvalidArgument("NetConfig: learning_rate must be > 0");
}

// --------------------------------------------------------------- RefineNet

RefineNet::RefineNet(const NetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    conv_in = Conv2d(3, cfg.feature_channels, cfg.kernel_size);
    for (int i = 0; i < cfg.rrg_count; ++i)
        rrgs.emplace_back(cfg.feature_channels, cfg.kernel_size, cfg.ca_reduction,
                          cfg.dabs_per_rrg);
    conv_out = Conv2d(cfg.feature_channels, 3, cfg.kernel_size);

    std::mt19937_64 rng(cfg.seed);
    conv_in.init_he(rng);
    for (auto& r : rrgs) r.init(rng);
    conv_out.init_zero(); // untrained net is the identity refinement
}

Tensor RefineNet::forward(const Tensor& y0_unit) {
    if (y0_unit.c != 3) throw InvalidArgument("RefineNet::forward: expected 3 channels");
    f0_ = conv_in.forward(y0_unit);
    Tensor t = f0_;
    for (auto& r : rrgs) t = r.forward(t);
    for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] += f0_.v[i]; // global skip
    return conv_out.forward(t);
}

Tensor RefineNet::backward(const Tensor& dresidual) {
    Tensor dt = conv_out.backward(dresidual);
    Tensor df0 = dt; // global skip branch
    for (auto it = rrgs.rbegin(); it != rrgs.rend(); ++it) dt = it->backward(dt);
    for (std::size_t i = 0; i < dt.v.size(); ++i) dt.v[i] += df0.v[i];
    return conv_in.backward(dt);
}

std::vector<ParamRef> RefineNet::params() {
    std::vector<ParamRef> out;
    conv_in.collect("conv_in", out);
    for (std::size_t i = 0; i < rrgs.size(); ++i)
        rrgs[i].collect("rrg" + std::to_string(i), out);
    conv_out.collect("conv_out", out);
    return out;
}

std::size_t RefineNet::param_count() const {
    std::size_t n = conv_in.param_count() + conv_out.param_count();
    for (const auto& r : rrgs) n += r.param_count();
    return n;
}

void RefineNet::zero_grad() {
    for (auto& p : params()) std::fill(p.g->begin(), p.g->end(), 0.0);
}

// --------------------------------------------------------------- DirectNet

DirectNet::DirectNet(const NetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    if (cfg.feature_channels % 2 != 0)
        throw InvalidArgument("DirectNet: feature_channels must be even");
    int half = cfg.feature_channels / 2;
    conv_in_a = Conv2d(3, half, cfg.kernel_size);
    conv_in_b = Conv2d(3, half, cfg.kernel_size);
    for (int i = 0; i < cfg.rrg_count; ++i)
        rrgs.emplace_back(cfg.feature_channels, cfg.kernel_size, cfg.ca_reduction,
                          cfg.dabs_per_rrg);
    conv_out = Conv2d(cfg.feature_channels, 3, cfg.kernel_size);

    std::mt19937_64 rng(cfg.seed);
    conv_in_a.init_he(rng);
    conv_in_b.init_he(rng);
    for (auto& r : rrgs) r.init(rng);
    conv_out.init_zero();
}

Tensor DirectNet::forward(const Tensor& x1_unit, const Tensor& x2_unit) {
    if (!x1_unit.same_shape(x2_unit))
        throw InvalidArgument("DirectNet::forward: input shape mismatch");
    Tensor fa = conv_in_a.forward(x1_unit);
    Tensor fb = conv_in_b.forward(x2_unit);
    f0_ = Tensor(fa.c + fb.c, fa.h, fa.w);
    std::copy(fa.v.begin(), fa.v.end(), f0_.v.begin());
    std::copy(fb.v.begin(), fb.v.end(), f0_.v.begin() + fa.v.size());
    Tensor t = f0_;
    for (auto& r : rrgs) t = r.forward(t);
    for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] += f0_.v[i];
    return conv_out.forward(t);
}

Tensor DirectNet::backward(const Tensor& dprediction) {
    Tensor dt = conv_out.backward(dprediction);
    Tensor df0 = dt;
    for (auto it = rrgs.rbegin(); it != rrgs.rend(); ++it) dt = it->backward(dt);
    for (std::size_t i = 0; i < dt.v.size(); ++i) dt.v[i] += df0.v[i];
    int half = cfg_.feature_channels / 2;
    Tensor da(half, dt.h, dt.w), db(half, dt.h, dt.w);
    std::copy(dt.v.begin(), dt.v.begin() + da.v.size(), da.v.begin());
    std::copy(dt.v.begin() + da.v.size(), dt.v.end(), db.v.begin());
    Tensor dx1 = conv_in_a.backward(da);
    Tensor dx2 = conv_in_b.backward(db);
    for (std::size_t i = 0; i < dx1.v.size(); ++i) dx1.v[i] += dx2.v[i];
    return dx1; // gradients of the two inputs are not needed separately
}

std::vector<ParamRef> DirectNet::params() {
    std::vector<ParamRef> out;
    conv_in_a.collect("conv_in_a", out);
    conv_in_b.collect("conv_in_b", out);
    for (std::size_t i = 0; i < rrgs.size(); ++i)
        rrgs[i].collect("rrg" + std::to_string(i), out);
    conv_out.collect("conv_out", out);
    return out;
}

std::size_t DirectNet::param_count() const {
    std::size_t n = conv_in_a.param_count() + conv_in_b.param_count() + conv_out.param_count();
    for (const auto& r : rrgs) n += r.param_count();
    return n;
}

void DirectNet::zero_grad() {
    for (auto& p : params()) std::fill(p.g->begin(), p.g->end(), 0.0);
}

// ------------------------------------------------------------ model file

namespace {

constexpr char kMagic[4] = {'R', 'F', 'N', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void save_refinenet(const std::string& path, RefineNet& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    const NetConfig& c = net.config();
    write_raw(out, std::int32_t(c.rrg_count));
    write_raw(out, std::int32_t(c.dabs_per_rrg));
    write_raw(out, std::int32_t(c.feature_channels));
    write_raw(out, std::int32_t(c.kernel_size));
    write_raw(out, std::int32_t(c.ca_reduction));
    write_raw(out, std::uint64_t(c.seed));
    write_raw(out, double(c.learning_rate));
    write_raw(out, std::int32_t(c.epochs));
    write_raw(out, std::int32_t(c.patch_size));
    write_raw(out, std::int32_t(c.batch_size));
    for (const auto& p : net.params()) {
        write_raw(out, std::uint64_t(p.w->size()));
        for (double v : *p.w) write_raw(out, float(v));
    }
    if (!out) throw IoError("short write: " + path);
}

RefineNet load_refinenet(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad model magic in " + path);
    NetConfig c;
    c.rrg_count = read_raw<std::int32_t>(in);
    c.dabs_per_rrg = read_raw<std::int32_t>(in);
    c.feature_channels = read_raw<std::int32_t>(in);
    c.kernel_size = read_raw<std::int32_t>(in);
    c.ca_reduction = read_raw<std::int32_t>(in);
    c.seed = read_raw<std::uint64_t>(in);
    c.learning_rate = read_raw<double>(in);
    c.epochs = read_raw<std::int32_t>(in);
    c.patch_size = read_raw<std::int32_t>(in);
    c.batch_size = read_raw<std::int32_t>(in);
    RefineNet net(c);
    for (auto& p : net.params()) {
        std::uint64_t n = read_raw<std::uint64_t>(in);
        if (n != p.w->size()) throw IoError("model parameter size mismatch in " + path);
        for (double& v : *p.w) v = double(read_raw<float>(in));
    }
    if (!in) throw IoError("truncated model file: " + path);
    return net;
}

// ------------------------------------------------------- apply_refinement

namespace {

constexpr int kTile = 128;
constexpr int kOverlap = 16;

FloatImage refine_whole(RefineNet& net, const FloatImage& y0) {
    Tensor out = net.forward(tensor_from_image(y0, 1.0 / 255.0));
    FloatImage r = image_from_tensor(out, 255.0);
    FloatImage y(y0.width, y0.height, 3);
    for (std::size_t i = 0; i < y.data.size(); ++i)
        y.data[i] = std::clamp(y0.data[i] + r.data[i], 0.0, 255.0);
    return y;
}

} // namespace

FloatImage apply_refinement(RefineNet& net, const FloatImage& y0) {
    if (y0.width <= kTile && y0.height <= kTile) return refine_whole(net, y0);

    FloatImage acc(y0.width, y0.height, 3);
    std::vector<double> wsum(std::size_t(y0.width) * y0.height, 0.0);
    int step = kTile - kOverlap;
    for (int ty = 0; ty < y0.height; ty += step) {
        int y1 = std::min(ty + kTile, y0.height);
        int y0i = std::max(0, y1 - kTile);
        // evaluate each tile on a context-extended window so the blended
        // region never sees the window's own reflect-padding artifacts
        int cy0 = std::max(0, y0i - kOverlap);
        int cy1 = std::min(y0.height, y1 + kOverlap);
        for (int tx = 0; tx < y0.width; tx += step) {
            int x1 = std::min(tx + kTile, y0.width);
            int x0i = std::max(0, x1 - kTile);
            int cx0 = std::max(0, x0i - kOverlap);
            int cx1 = std::min(y0.width, x1 + kOverlap);
            FloatImage tile(cx1 - cx0, cy1 - cy0, 3);
            for (int y = cy0; y < cy1; ++y)
                for (int x = cx0; x < cx1; ++x)
                    for (int c = 0; c < 3; ++c)
                        tile.at(x - cx0, y - cy0, c) = y0.at(x, y, c);
            FloatImage refined = refine_whole(net, tile);
            int th = y1 - y0i, tw = x1 - x0i;
            for (int y = y0i; y < y1; ++y)
                for (int x = x0i; x < x1; ++x) {
                    // linear feather toward tile borders that are interior cuts
                    double wy = 1.0, wx = 1.0;
                    int ly = y - y0i, lx = x - x0i;
                    if (y0i > 0) wy = std::min(wy, (ly + 1.0) / (kOverlap + 1.0));
                    if (y1 < y0.height) wy = std::min(wy, (th - ly) / double(kOverlap + 1));
                    if (x0i > 0) wx = std::min(wx, (lx + 1.0) / (kOverlap + 1.0));
                    if (x1 < y0.width) wx = std::min(wx, (tw - lx) / double(kOverlap + 1));
                    double wgt = std::clamp(wy, 0.0, 1.0) * std::clamp(wx, 0.0, 1.0);
                    wsum[std::size_t(y) * y0.width + x] += wgt;
                    for (int c = 0; c < 3; ++c)
                        acc.at(x, y, c) += wgt * refined.at(x - cx0, y - cy0, c);
                }
            if (x1 >= y0.width) break;
        }
        if (y1 >= y0.height) break;
    }
    for (std::size_t p = 0; p < wsum.size(); ++p)
        for (int c = 0; c < 3; ++c) acc.data[p * 3 + c] /= wsum[p];
    return acc;
}

} // namespace expi
