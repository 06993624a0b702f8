// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/adam.hpp"
#include "hdrsplat/scene.hpp"
#include "hdrsplat/tonemap.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hdrsplat {

/// Full training state: scene, tone mapper, optimizer moments and bookkeeping.
/// Serialized as a JSON header followed by little-endian float32 arrays in the
/// order the header declares; save -> load -> save is byte-identical.
struct Checkpoint {
    std::int64_t iteration = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string config_text;
    std::int64_t skip_count = 0; // optimizer steps dropped on non-finite gradients

    Cloud cloud;
    ToneMapperState tone;
    std::vector<double> timestamps; // discrete training times, ascending
    std::map<std::string, AdamState> adam; // keyed by parameter group/tensor name

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

} // namespace hdrsplat
