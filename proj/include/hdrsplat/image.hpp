// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/common.hpp"

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace hdrsplat {

/// Row-major H x W x 3 float image. Linear radiance for HDR, [0,1] for LDR.
template <typename T>
struct ImageT {
    int width = 0;
    int height = 0;
    std::vector<T> data; // height * width * 3

    ImageT() = default;
    ImageT(int w, int h, T fill = T(0)) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    T* pixel(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const T* pixel(int x, int y) const { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }

    std::size_t size() const { return data.size(); }

    bool same_shape(const ImageT& o) const { return width == o.width && height == o.height; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v)))
                return false;
        return true;
    }

    template <typename U>
    ImageT<U> cast() const {
        ImageT<U> out(width, height);
        for (std::size_t i = 0; i < data.size(); ++i)
            out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Image = ImageT<float>;
using ImageD = ImageT<double>;

// PFM ("PF", scale -1.0 = little-endian, rows bottom-to-top). Round-trip is bit-exact.
void write_pfm(const std::filesystem::path& path, const Image& img);
Image read_pfm(const std::filesystem::path& path);

// 8-bit RGB PNG. Values are clamped to [0,1] and quantized with round(255*v).
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

/// 8-bit LDR image as raw bytes, used by the capture simulator before encoding.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    ImageU8() = default;
    ImageU8(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    Image to_float() const {
        Image out(width, height);
        for (std::size_t i = 0; i < data.size(); ++i)
            out.data[i] = static_cast<float>(data[i]) / 255.0f;
        return out;
    }
};

void write_png(const std::filesystem::path& path, const ImageU8& img);

} // namespace hdrsplat
