// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/camera.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hdrsplat {

/// One dataset observation. LDR rows carry ldr_path and an exposure; HDR
/// ground-truth rows carry hdr_path only.
struct FrameRecord {
    std::string ldr_path;
    std::string hdr_path;
    double time = 0.0;     // normalized to [0,1]
    double exposure = 0.0; // seconds, > 0 for LDR rows
    int camera_id = 0;
    Camera camera;
    std::string split = "train";

    bool is_ldr() const { return !ldr_path.empty(); }
    bool is_hdr() const { return !hdr_path.empty(); }
};

struct Manifest {
    std::vector<FrameRecord> frames;
    std::filesystem::path base_dir; // directory the paths are relative to

    static Manifest load(const std::filesystem::path& path, bool check_files = true);
    void save(const std::filesystem::path& path) const;

    /// Canonical JSON bytes; load + save round-trips byte-identically.
    std::string canonical_json() const;
    std::uint64_t dataset_hash() const { return fnv1a(canonical_json()); }

    std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }

    /// Distinct frame times in ascending order.
    std::vector<double> unique_times() const;
};

} // namespace hdrsplat
