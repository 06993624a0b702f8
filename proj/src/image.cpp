// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace hdrsplat {

void write_pfm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    out << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    // PFM stores rows bottom-to-top.
    for (int y = img.height - 1; y >= 0; --y) {
        out.write(reinterpret_cast<const char*>(img.pixel(0, y)),
                  static_cast<std::streamsize>(img.width) * 3 * sizeof(float));
    }
    if (!out)
        throw IoError("short write: " + path.string());
}

Image read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "PF")
        throw IoError("not a color PFM file: " + path.string());
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    if (w <= 0 || h <= 0 || scale >= 0.0)
        throw IoError("unsupported PFM header (expect little-endian): " + path.string());
    in.get(); // single whitespace after the scale
    Image img(w, h);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(img.pixel(0, y)), static_cast<std::streamsize>(w) * 3 * sizeof(float));
    }
    if (!in)
        throw IoError("truncated PFM data: " + path.string());
    return img;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void write_png(const std::filesystem::path& path, const ImageU8& img) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp)
        throw IoError("cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y) * img.width * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_png(const std::filesystem::path& path, const Image& img) {
    ImageU8 u8(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        float v = std::clamp(img.data[i], 0.0f, 1.0f);
        u8.data[i] = static_cast<std::uint8_t>(std::lround(255.0f * v));
    }
    write_png(path, u8);
}

Image read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp)
        throw IoError("cannot open: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng read failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("expected 3-channel PNG: " + path.string());
    }

    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        float* dst = img.pixel(0, y);
        for (std::size_t i = 0; i < row.size(); ++i)
            dst[i] = static_cast<float>(row[i]) / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

} // namespace hdrsplat
