// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/image.hpp"

#include <optional>

namespace hdrsplat {

struct LossWeights {
    double lambda = 0.2; // D-SSIM mix
    double alpha = 0.6;  // HDR weight; forced to 0 when HDR ground truth is absent
    double mu = 5000.0;  // compression factor

    void validate() const {
        if (lambda < 0.0 || lambda > 1.0)
            throw ContractViolation("lambda must be in [0,1]");
        if (alpha < 0.0)
            throw ContractViolation("alpha must be non-negative");
        if (!(mu > 0.0))
            throw ContractViolation("mu must be positive");
    }
};

template <typename T>
T l1(const ImageT<T>& a, const ImageT<T>& b);

template <typename T>
void l1_grad(const ImageT<T>& a, const ImageT<T>& b, T weight, ImageT<T>& grad_a);

/// Mean local SSIM over valid window positions: 11x11 Gaussian window,
/// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1, per channel then averaged.
template <typename T>
T ssim(const ImageT<T>& a, const ImageT<T>& b);

/// d(ssim)/da scaled by `weight`, accumulated into grad_a.
template <typename T>
T ssim_with_grad(const ImageT<T>& a, const ImageT<T>& b, T weight, ImageT<T>& grad_a);

template <typename T>
T dssim(const ImageT<T>& a, const ImageT<T>& b) {
    return (T(1) - ssim(a, b)) / T(2);
}

/// log(1 + mu*norm(I)) / log(1 + mu) with per-image min-max normalization.
/// A constant image maps to all zeros.
template <typename T>
ImageT<T> mu_law(const ImageT<T>& img, T mu);

/// Pointwise d(mu_law)/d(pixel); the min-max bounds are treated as constants.
template <typename T>
ImageT<T> mu_law_grad_factor(const ImageT<T>& img, T mu);

/// (1 - lambda) * L1 + lambda * D-SSIM.
template <typename T>
T recon_loss(const ImageT<T>& a, const ImageT<T>& b, T lambda);

/// Same, accumulating dL/da into grad_a.
template <typename T>
T recon_loss_with_grad(const ImageT<T>& a, const ImageT<T>& b, T lambda, ImageT<T>& grad_a);

template <typename T>
struct TotalLossResult {
    T total = T(0);
    T ldr = T(0);
    T hdr = T(0);
    std::optional<ImageT<T>> grad_ldr_2d;
    ImageT<T> grad_ldr_3d;
    std::optional<ImageT<T>> grad_hdr_2d;
};

/// Full objective: LDR reconstruction on both rendering paths plus the
/// mu-law-compressed HDR term when ground truth is available. Gradients are
/// returned for every rendered input. Pass nullptr for absent inputs; the HDR
/// pair must be both present or both absent.
template <typename T>
TotalLossResult<T> total_loss(const ImageT<T>* ldr_2d, const ImageT<T>& ldr_3d, const ImageT<T>& ldr_gt,
                              const ImageT<T>* hdr_2d, const ImageT<T>* hdr_gt, const LossWeights& weights);

/// 10 log10(peak^2 / MSE); +inf for identical images.
template <typename T>
T psnr(const ImageT<T>& a, const ImageT<T>& b, T peak = T(1));

/// PSNR with the +inf sentinel capped for tables.
template <typename T>
T psnr_capped(const ImageT<T>& a, const ImageT<T>& b, T peak = T(1), T cap = T(100)) {
    return std::min(psnr(a, b, peak), cap);
}

} // namespace hdrsplat
