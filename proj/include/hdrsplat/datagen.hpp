// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/camera.hpp"
#include "hdrsplat/image.hpp"
#include "hdrsplat/manifest.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hdrsplat {

/// Analytic dynamic scene: a bright emissive sphere orbiting a dim Lambertian
/// sphere over a black background. The radiance span between the emitter and
/// the dimmest lit surface covers at least four orders of magnitude.
struct SceneSpec {
    std::string name = "two-sphere";
    int timesteps = 20;                              // T
    int cameras = 5;                                 // Q
    std::vector<double> exposures = {0.125, 2, 32};  // E, seconds
    int size = 64;
    std::string pattern = "stereo"; // "stereo": all exposures per (camera, t); "monocular": one
    bool with_hdr = true;

    double emitter_radiance = 50.0;
    double diffuse_peak = 5e-3;
    double crf_gamma = 2.2;

    void validate() const {
        if (timesteps < 2)
            throw ContractViolation("timesteps must be at least 2");
        if (cameras < 1)
            throw ContractViolation("need at least one camera");
        if (size < 8)
            throw ContractViolation("image size too small");
        if (exposures.empty())
            throw ContractViolation("need at least one exposure");
        for (std::size_t i = 0; i < exposures.size(); ++i) {
            if (!(exposures[i] > 0.0))
                throw ContractViolation("exposures must be positive");
            for (std::size_t j = 0; j < i; ++j)
                if (exposures[i] == exposures[j])
                    throw ContractViolation("exposures must be distinct");
        }
        if (name != "two-sphere")
            throw ContractViolation("unknown scene: " + name);
        if (pattern != "stereo" && pattern != "monocular")
            throw ContractViolation("unknown capture pattern: " + pattern);
    }
};

/// Camera q of the ring used by the generator.
CameraT<double> scene_camera(const SceneSpec& spec, int q);

/// Deterministic analytic ray trace of the ground-truth radiance at time t.
ImageD render_hdr_gt(const SceneSpec& spec, const CameraT<double>& camera, double t);

/// Simulated capture: clamp((E * e)^(1/gamma)) quantized to 8 bits.
ImageU8 apply_crf(const ImageD& hdr, double exposure, double gamma = 2.2);

/// Render the full dataset to out_dir (PNG + optional PFM) and write its
/// manifest. Every 5th timestep is tagged test.
Manifest write_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir);

} // namespace hdrsplat
