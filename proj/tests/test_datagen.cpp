// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/datagen.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace hdrsplat;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "hdrsplat_datagen" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("ground-truth render basics") {
    SceneSpec spec;
    spec.size = 32;

    SUBCASE("empty view is all zero") {
        // look straight up, away from both spheres
        const CameraT<double> cam = CameraT<double>::look_at(Vec3T<double>(0, 2.5, 0), Vec3T<double>(0, 10, 0),
                                                             Vec3T<double>(1, 0, 0), 40, 40, 32, 32);
        const ImageD img = render_hdr_gt(spec, cam, 0.0);
        for (double v : img.data)
            CHECK(v == 0.0);
    }
    SUBCASE("emitter pixels carry the emitter radiance exactly") {
        const CameraT<double> cam = scene_camera(spec, 0);
        const ImageD img = render_hdr_gt(spec, cam, 0.25);
        double peak = 0.0;
        for (double v : img.data)
            peak = std::max(peak, v);
        CHECK(peak == spec.emitter_radiance); // unshaded emitter
    }
    SUBCASE("renders are deterministic") {
        const CameraT<double> cam = scene_camera(spec, 1);
        const ImageD a = render_hdr_gt(spec, cam, 0.4);
        const ImageD b = render_hdr_gt(spec, cam, 0.4);
        CHECK(a.data == b.data);
    }
    SUBCASE("dynamic range spans at least four orders of magnitude") {
        const CameraT<double> cam = scene_camera(spec, 0);
        const ImageD img = render_hdr_gt(spec, cam, 0.25);
        double brightest = 0.0;
        double dimmest = 1e30;
        for (double v : img.data) {
            brightest = std::max(brightest, v);
            if (v > 0.0)
                dimmest = std::min(dimmest, v);
        }
        CHECK(brightest / dimmest >= 1e4);
    }
}

TEST_CASE("capture simulation golden values") {
    ImageD one(1, 1);

    SUBCASE("clamp boundaries") {
        one.data = {1.0, 0.0, 2.0, 0, 0, 0};
        const ImageU8 out = apply_crf(one, 1.0);
        CHECK(out.data[0] == 255); // E*e = 1
        CHECK(out.data[1] == 0);   // E*e = 0
        CHECK(out.data[2] == 255); // clipped
    }
    SUBCASE("mid-exposure value") {
        one.data = {0.5, 0, 0, 0, 0, 0};
        const ImageU8 out = apply_crf(one, 1.0);
        CHECK(out.data[0] == 186); // round(255 * 0.5^(1/2.2))
    }
    SUBCASE("invalid exposure") {
        CHECK_THROWS_AS(apply_crf(one, 0.0), InvalidExposure);
    }
}

TEST_CASE("crf round-trip recovers radiance within quantization") {
    SceneSpec spec;
    spec.size = 32;
    const CameraT<double> cam = scene_camera(spec, 0);
    const ImageD hdr = render_hdr_gt(spec, cam, 0.3);
    const double e = 2.0;
    const ImageU8 ldr = apply_crf(hdr, e);

    for (std::size_t i = 0; i < hdr.data.size(); ++i) {
        const int code = ldr.data[i];
        if (code < 1 || code > 254)
            continue; // clipped or black
        const double linear = std::pow(code / 255.0, spec.crf_gamma) / e;
        // one quantization step around the stored code, linearized
        const double lo = std::pow((code - 1) / 255.0, spec.crf_gamma) / e;
        const double hi = std::pow((code + 1) / 255.0, spec.crf_gamma) / e;
        const double step = std::max(linear - lo, hi - linear);
        CHECK(std::abs(hdr.data[i] - linear) <= step);
    }
}

TEST_CASE("multi-exposure estimates agree for unclipped pixels") {
    SceneSpec spec;
    spec.size = 32;
    const CameraT<double> cam = scene_camera(spec, 2);
    const ImageD hdr = render_hdr_gt(spec, cam, 0.6);
    const double e1 = 2.0, e2 = 32.0;
    const ImageU8 a = apply_crf(hdr, e1);
    const ImageU8 b = apply_crf(hdr, e2);

    int tested = 0;
    for (std::size_t i = 0; i < hdr.data.size(); ++i) {
        if (a.data[i] < 1 || a.data[i] > 254 || b.data[i] < 1 || b.data[i] > 254)
            continue;
        auto linearize = [&](int code, double e) { return std::pow(code / 255.0, spec.crf_gamma) / e; };
        const double est1 = linearize(a.data[i], e1);
        const double est2 = linearize(b.data[i], e2);
        const double step1 = linearize(a.data[i] + 1, e1) - linearize(a.data[i], e1);
        const double step2 = linearize(b.data[i] + 1, e2) - linearize(b.data[i], e2);
        CHECK(std::abs(est1 - est2) <= step1 + step2);
        ++tested;
    }
    CHECK(tested > 0);
}

TEST_CASE("dataset writer counts and round-trips") {
    SceneSpec spec;
    spec.size = 16;
    spec.timesteps = 20;
    spec.cameras = 5;

    SUBCASE("stereo pattern with hdr") {
        const auto dir = temp_dir("stereo");
        const Manifest m = write_dataset(spec, dir);
        int ldr = 0, hdr = 0;
        for (const auto& f : m.frames) {
            ldr += f.is_ldr();
            hdr += f.is_hdr();
        }
        CHECK(ldr == 20 * 5 * 3);
        CHECK(hdr == 20 * 5);
        CHECK(m.frames.size() == 400);

        int test_count = 0;
        for (const auto& f : m.frames)
            test_count += f.split == "test";
        const double frac = static_cast<double>(test_count) / m.frames.size();
        CHECK(frac >= 0.1);
        CHECK(frac <= 0.2);

        // loading and re-serializing reproduces the bytes
        const Manifest loaded = Manifest::load(dir / "manifest.json");
        CHECK(loaded.canonical_json() == m.canonical_json());
    }
    SUBCASE("monocular pattern emits one exposure per view") {
        spec.timesteps = 6;
        spec.cameras = 2;
        spec.with_hdr = false;
        spec.pattern = "monocular";
        const auto dir = temp_dir("mono");
        const Manifest m = write_dataset(spec, dir);
        int ldr = 0, hdr = 0;
        for (const auto& f : m.frames) {
            ldr += f.is_ldr();
            hdr += f.is_hdr();
        }
        CHECK(ldr == 6 * 2);
        CHECK(hdr == 0);
    }
}
