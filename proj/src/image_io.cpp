#include "expi/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace expi {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

ExposureImage read_png(const std::string& path, double exposure_time) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw IoError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decode error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    int w = int(png_get_image_width(png, info));
    int h = int(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG channel layout: " + path);
    }

    ExposureImage img(w, h, exposure_time);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = img.data.data() + std::size_t(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::string& path, const ExposureImage& img) {
    img.validate();
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode error: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + std::size_t(y) * img.width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ExposureImage read_ppm(const std::string& path, double exposure_time) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
        throw IoError("unsupported PPM file: " + path);
    in.get(); // single whitespace after header
    ExposureImage img(w, h, exposure_time);
    in.read(reinterpret_cast<char*>(img.data.data()), std::streamsize(img.data.size()));
    if (!in) throw IoError("truncated PPM file: " + path);
    return img;
}

void write_ppm(const std::string& path, const ExposureImage& img) {
    img.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), std::streamsize(img.data.size()));
    if (!out) throw IoError("short write: " + path);
}

FloatImage read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (magic != "PF" || w <= 0 || h <= 0)
        throw IoError("unsupported PFM file: " + path);
    if (scale >= 0.0) throw IoError("big-endian PFM not supported: " + path);
    in.get();
    FloatImage img(w, h, 3);
    std::vector<float> row(std::size_t(w) * 3);
    for (int y = h - 1; y >= 0; --y) { // PFM rows are bottom-up
        in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
        if (!in) throw IoError("truncated PFM file: " + path);
        for (std::size_t i = 0; i < row.size(); ++i)
            img.data[std::size_t(y) * w * 3 + i] = double(row[i]);
    }
    return img;
}

void write_pfm(const std::string& path, const FloatImage& img) {
    if (img.channels != 3) throw InvalidArgument("write_pfm: expected 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(std::size_t(img.width) * 3);
    for (int y = img.height - 1; y >= 0; --y) {
        for (std::size_t i = 0; i < row.size(); ++i)
            row[i] = float(img.data[std::size_t(y) * img.width * 3 + i]);
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("short write: " + path);
}

ExposureImage read_image(const std::string& path, double exposure_time) {
    if (ends_with(path, ".png")) return read_png(path, exposure_time);
    if (ends_with(path, ".ppm")) return read_ppm(path, exposure_time);
    throw IoError("unsupported image extension: " + path);
}

void write_image(const std::string& path, const ExposureImage& img) {
    if (ends_with(path, ".png")) return write_png(path, img);
    if (ends_with(path, ".ppm")) return write_ppm(path, img);
    throw IoError("unsupported image extension: " + path);
}

} // namespace expi
