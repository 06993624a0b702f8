// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/checkpoint.hpp"
#include "hdrsplat/config.hpp"
#include "hdrsplat/losses.hpp"
#include "hdrsplat/manifest.hpp"
#include "hdrsplat/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hdrsplat {

struct TrainResult {
    Checkpoint checkpoint;
    std::filesystem::path checkpoint_path;
    std::filesystem::path log_path;
    double seconds = 0.0;
    double final_loss = 0.0;
};

/// Full optimization run: warm-up epoch, per-iteration dual-path supervision,
/// per-group Adam, CSV logging and periodic checkpoints.
TrainResult train(const Manifest& manifest, const TrainConfig& cfg);

struct EvalRow {
    std::string frame;
    std::string domain; // "ldr" or "hdr_mu"
    double psnr = 0.0;
    double ssim = 0.0;
};

struct EvalResult {
    std::vector<EvalRow> rows;
    double mean_ldr_psnr = 0.0;
    double mean_ldr_ssim = 0.0;
    double mean_hdr_psnr = 0.0;
    double mean_hdr_ssim = 0.0;
    double fps = 0.0;
    int ldr_frames = 0;
    int hdr_frames = 0;

    void write_csv(const std::filesystem::path& path, const std::string& scene) const;
};

/// Render every frame of the split and report PSNR/SSIM in the LDR domain and
/// the mu-law HDR domain, plus wall-clock render throughput.
EvalResult evaluate(const Checkpoint& ck, const Manifest& manifest, const std::string& split = "test",
                    double mu = 5000.0);

struct AblateRow {
    std::string axis;
    std::string variant;
    std::uint64_t dataset_hash = 0;
    std::uint64_t seed = 0;
    double ldr_psnr = 0.0;
    double ldr_ssim = 0.0;
    double hdr_psnr = 0.0;
    double hdr_ssim = 0.0;
    double train_seconds = 0.0;
};

/// Train/evaluate a grid of variants along one axis with a shared seed and
/// dataset. Axes: cell_kind, k, pixel_level, supervision.
std::vector<AblateRow> ablate(const Manifest& manifest, const TrainConfig& base, const std::string& axis);

void write_ablate_csv(const std::vector<AblateRow>& rows, const std::filesystem::path& path);

/// Nearest discrete training timestamp, for novel-time queries.
int nearest_time_index(const std::vector<double>& timestamps, double t);

} // namespace hdrsplat
