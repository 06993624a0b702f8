// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/adam.hpp"

#include "hdrsplat/common.hpp"

#include <cmath>

namespace hdrsplat {

StepStatus adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr,
                     const AdamParams& ap) {
    if (params.size() != grads.size())
        throw ContractViolation("parameter/gradient size mismatch");
    state.ensure(params.size());

    for (float g : grads)
        if (!std::isfinite(g))
            return StepStatus::kSkippedNonFinite;

    state.step += 1;
    const double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double m = ap.beta1 * state.m[i] + (1.0 - ap.beta1) * g;
        const double v = ap.beta2 * state.v[i] + (1.0 - ap.beta2) * g * g;
        state.m[i] = static_cast<float>(m);
        state.v[i] = static_cast<float>(v);
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        params[i] = static_cast<float>(params[i] - lr * m_hat / (std::sqrt(v_hat) + ap.eps));
    }
    return StepStatus::kOk;
}

} // namespace hdrsplat
