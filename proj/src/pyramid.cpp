#include "expi/pyramid.hpp"

#include <cmath>

namespace expi {

namespace {

constexpr double kTap[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

// reflect-101 index mapping: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

FloatImage conv_horizontal(const FloatImage& img, double scale) {
    FloatImage out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int t = -2; t <= 2; ++t)
                    acc += kTap[t + 2] * img.at(reflect101(x + t, img.width), y, c);
                out.at(x, y, c) = acc * scale;
            }
    return out;
}

FloatImage conv_vertical(const FloatImage& img, double scale) {
    FloatImage out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int t = -2; t <= 2; ++t)
                    acc += kTap[t + 2] * img.at(x, reflect101(y + t, img.height), c);
                out.at(x, y, c) = acc * scale;
            }
    return out;
}

FloatImage decimate2(const FloatImage& img) {
    int w = (img.width + 1) / 2, h = (img.height + 1) / 2;
    FloatImage out(w, h, img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(x, y, c) = img.at(2 * x, 2 * y, c);
    return out;
}

} // namespace

int max_pyramid_levels(int width, int height) {
    int m = std::min(width, height);
    int levels = 1;
    while ((1 << levels) <= m) ++levels; // min dim >= 2^(levels-1)
    return levels;
}

FloatImage blur5(const FloatImage& img) {
    return conv_vertical(conv_horizontal(img, 1.0), 1.0);
}

FloatImage upsample(const FloatImage& img, int out_w, int out_h) {
    if (out_w < img.width || out_h < img.height || out_w > 2 * img.width || out_h > 2 * img.height)
        throw InvalidArgument("upsample: incompatible target size");
    FloatImage zi(out_w, out_h, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                if (2 * x < out_w && 2 * y < out_h)
                    zi.at(2 * x, 2 * y, c) = img.at(x, y, c);
    // kernel doubled per axis so unit-DC input stays unit-DC
    return conv_vertical(conv_horizontal(zi, 2.0), 2.0);
}

Pyramid gaussian_pyramid(const FloatImage& img, int levels) {
    if (levels < 1) throw InvalidArgument("gaussian_pyramid: levels must be >= 1");
    if (levels > max_pyramid_levels(img.width, img.height))
        throw InvalidArgument("gaussian_pyramid: too many levels for image size");
    Pyramid p;
    p.kind = Pyramid::Kind::gaussian;
    p.levels.push_back(img);
    for (int l = 1; l < levels; ++l)
        p.levels.push_back(decimate2(blur5(p.levels.back())));
    return p;
}

Pyramid laplacian_pyramid(const FloatImage& img, int levels) {
    Pyramid g = gaussian_pyramid(img, levels);
    Pyramid p;
    p.kind = Pyramid::Kind::laplacian;
    for (int l = 0; l + 1 < levels; ++l) {
        const FloatImage& cur = g.levels[l];
        FloatImage up = upsample(g.levels[l + 1], cur.width, cur.height);
        FloatImage band(cur.width, cur.height, cur.channels);
        for (std::size_t i = 0; i < band.data.size(); ++i)
            band.data[i] = cur.data[i] - up.data[i];
        p.levels.push_back(std::move(band));
    }
    p.levels.push_back(g.levels.back());
    return p;
}

FloatImage collapse(const Pyramid& p) {
    if (p.levels.empty()) throw InvalidArgument("collapse: empty pyramid");
    if (p.kind != Pyramid::Kind::laplacian)
        throw InvalidArgument("collapse: expected a laplacian pyramid");
    FloatImage acc = p.levels.back();
    for (int l = int(p.levels.size()) - 2; l >= 0; --l) {
        const FloatImage& band = p.levels[l];
        FloatImage up = upsample(acc, band.width, band.height);
        acc = FloatImage(band.width, band.height, band.channels);
        for (std::size_t i = 0; i < acc.data.size(); ++i)
            acc.data[i] = band.data[i] + up.data[i];
    }
    return acc;
}

} // namespace expi
