// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/camera.hpp"
#include "hdrsplat/rasterizer.hpp"
#include "hdrsplat/scene.hpp"

#include <random>

namespace hdrsplat::testing {

/// Set the DC coefficient so eval_color_sh4d returns exactly `c` for any
/// direction and time (all other coefficients zero).
template <typename T>
void set_dc_color(CloudT<T>& cloud, int i, const Vec3T<T>& c) {
    for (int ch = 0; ch < 3; ++ch)
        cloud.sh(i, ch) = (c[ch] - T(0.5)) / T(sh::kC0);
}

/// A camera at -z looking toward the origin, sized for small test scenes.
template <typename T>
CameraT<T> test_camera(int size = 16, T distance = T(6)) {
    CameraT<T> cam = CameraT<T>::look_at(Vec3T<T>(T(0), T(0), -distance), Vec3T<T>::Zero(),
                                         Vec3T<T>(T(0), T(1), T(0)), T(size) * T(1.2), T(size) * T(1.2), size, size);
    return cam;
}

/// Seeded random scene in front of the test camera: positions in a box around
/// the origin, moderate scales and opacities, low-order SH with random DC.
template <typename T>
CloudT<T> random_test_cloud(int n, unsigned seed, int sh_degree = 2, int fourier_degree = 2) {
    std::mt19937 rng(seed);
    CloudInitOptions opt;
    opt.extent = 1.2f;
    opt.scale_min = 0.15f;
    opt.scale_max = 0.5f;
    opt.time_scale_min = 0.3f;
    opt.time_scale_max = 0.8f;
    opt.quat_jitter = 0.2f;
    opt.sh_dc_std = 0.4f;
    CloudT<T> cloud = make_random_cloud<T>(n, rng, sh_degree, fourier_degree, opt);
    std::uniform_real_distribution<double> uo(-1.5, 1.5);
    std::normal_distribution<double> hi(0.0, 0.1);
    for (int i = 0; i < n; ++i) {
        cloud.raw_opacity[i] = T(uo(rng));
        // sprinkle every SH order so gradients reach all of them
        for (int j = 3; j < cloud.sh_dim(); ++j)
            cloud.sh(i, j) = T(hi(rng));
        // keep times near the middle so the temporal weight stays live
        cloud.mean4(i, 3) = T(0.3 + 0.4 * (static_cast<double>(i) / std::max(1, n - 1)));
    }
    return cloud;
}

} // namespace hdrsplat::testing
