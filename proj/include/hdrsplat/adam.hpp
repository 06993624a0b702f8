// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hdrsplat {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// Per-tensor first/second moment state.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t step = 0;

    void ensure(std::size_t n) {
        if (m.size() != n) {
            m.assign(n, 0.0f);
            v.assign(n, 0.0f);
            step = 0;
        }
    }
};

enum class StepStatus { kOk, kSkippedNonFinite };

/// Bias-corrected Adam update. A non-finite gradient anywhere in the tensor
/// skips the whole step and leaves parameters and moments untouched.
StepStatus adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr,
                     const AdamParams& ap = {});

} // namespace hdrsplat
