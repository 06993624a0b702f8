// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace hdrsplat {

/// Every field is addressable from the config file (key = value lines) and by
/// a CLI flag of the same name; flags override file values.
struct TrainConfig {
    int iterations = 5000;
    int n_init = 2000;

    double lr_position = 1.6e-4;
    double lr_position_final = 1.6e-6; // exponential decay target at the last iteration
    double lr_sh = 2.5e-3;
    double lr_opacity = 5e-2;
    double lr_scaling = 5e-3;
    double lr_rotation = 1e-3;
    double lr_tone = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-15;

    double lambda = 0.2;
    double alpha = 0.6; // HDR loss weight; 0 disables HDR supervision entirely
    double mu = 5000.0;

    int window_k = 20;
    int context_dim = 2;
    int tone_hidden = 64;
    std::string cell = "gru";
    bool pixel_level = true;

    int sh_degree = 2;
    int fourier_degree = 2;
    double scene_extent = 1.5;

    std::uint64_t seed = 42;
    int log_every = 50;
    int checkpoint_every = 1000;

    std::string data_dir;
    std::string out_dir = "run";

    void validate() const;

    /// Canonical text form (fixed key order); also the hashing domain.
    std::string serialize() const;
    std::uint64_t hash() const { return fnv1a(serialize()); }

    /// Apply `key = value` pairs from a config file.
    void apply_file(const std::filesystem::path& path);
    /// Apply one key/value pair; unknown keys are errors.
    void apply(const std::string& key, const std::string& value);
};

} // namespace hdrsplat
