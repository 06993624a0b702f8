// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace hdrsplat {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

template <typename T>
std::array<T, kWindow> gaussian_kernel() {
    std::array<T, kWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double x = i - (kWindow - 1) / 2.0;
        const double v = std::exp(-x * x / (2.0 * kSigma * kSigma));
        k[i] = T(v);
        sum += v;
    }
    for (auto& v : k)
        v = T(static_cast<double>(v) / sum);
    return k;
}

template <typename T>
void check_shapes(const ImageT<T>& a, const ImageT<T>& b) {
    if (!a.same_shape(b))
        throw ContractViolation("image shape mismatch");
}

// Single-channel plane with separable valid correlation against the SSIM window.
template <typename T>
struct Plane {
    int w = 0, h = 0;
    std::vector<T> v;
    Plane() = default;
    Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, T(0)) {}
    T& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    T at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

template <typename T>
Plane<T> conv_valid(const Plane<T>& src, const std::array<T, kWindow>& k) {
    const int vw = src.w - kWindow + 1;
    const int vh = src.h - kWindow + 1;
    Plane<T> tmp(vw, src.h);
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < vw; ++x) {
            T s = T(0);
            for (int u = 0; u < kWindow; ++u)
                s += k[u] * src.at(x + u, y);
            tmp.at(x, y) = s;
        }
    Plane<T> out(vw, vh);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            T s = T(0);
            for (int u = 0; u < kWindow; ++u)
                s += k[u] * tmp.at(x, y + u);
            out.at(x, y) = s;
        }
    return out;
}

// Adjoint of conv_valid: scatter a valid-grid map back onto image positions.
template <typename T>
Plane<T> conv_valid_adjoint(const Plane<T>& map, int img_w, int img_h, const std::array<T, kWindow>& k) {
    Plane<T> tmp(map.w, img_h);
    for (int y = 0; y < map.h; ++y)
        for (int x = 0; x < map.w; ++x) {
            const T m = map.at(x, y);
            if (m == T(0))
                continue;
            for (int u = 0; u < kWindow; ++u)
                tmp.at(x, y + u) += k[u] * m;
        }
    Plane<T> out(img_w, img_h);
    for (int y = 0; y < img_h; ++y)
        for (int x = 0; x < map.w; ++x) {
            const T m = tmp.at(x, y);
            if (m == T(0))
                continue;
            for (int u = 0; u < kWindow; ++u)
                out.at(x + u, y) += k[u] * m;
        }
    return out;
}

template <typename T>
Plane<T> channel_plane(const ImageT<T>& img, int ch) {
    Plane<T> p(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            p.at(x, y) = img.pixel(x, y)[ch];
    return p;
}

template <typename T>
T ssim_impl(const ImageT<T>& a, const ImageT<T>& b, ImageT<T>* grad_a, T grad_weight) {
    check_shapes(a, b);
    if (a.width < kWindow || a.height < kWindow)
        throw ContractViolation("image smaller than the SSIM window");

    const auto k = gaussian_kernel<T>();
    const int vw = a.width - kWindow + 1;
    const int vh = a.height - kWindow + 1;
    const T m_count = T(vw) * T(vh) * T(3);

    T total = T(0);
    for (int ch = 0; ch < 3; ++ch) {
        Plane<T> pa = channel_plane(a, ch);
        Plane<T> pb = channel_plane(b, ch);
        Plane<T> paa(a.width, a.height), pbb(a.width, a.height), pab(a.width, a.height);
        for (std::size_t i = 0; i < pa.v.size(); ++i) {
            paa.v[i] = pa.v[i] * pa.v[i];
            pbb.v[i] = pb.v[i] * pb.v[i];
            pab.v[i] = pa.v[i] * pb.v[i];
        }
        Plane<T> mu1 = conv_valid(pa, k);
        Plane<T> mu2 = conv_valid(pb, k);
        Plane<T> raw11 = conv_valid(paa, k);
        Plane<T> raw22 = conv_valid(pbb, k);
        Plane<T> raw12 = conv_valid(pab, k);

        Plane<T> p_map(vw, vh), q_map(vw, vh), r_map(vw, vh);
        for (int y = 0; y < vh; ++y)
            for (int x = 0; x < vw; ++x) {
                const T m1 = mu1.at(x, y);
                const T m2 = mu2.at(x, y);
                const T s11 = raw11.at(x, y) - m1 * m1;
                const T s22 = raw22.at(x, y) - m2 * m2;
                const T s12 = raw12.at(x, y) - m1 * m2;
                const T a1 = T(2) * m1 * m2 + T(kC1);
                const T a2 = T(2) * s12 + T(kC2);
                const T b1 = m1 * m1 + m2 * m2 + T(kC1);
                const T b2 = s11 + s22 + T(kC2);
                const T denom = b1 * b2;
                const T s = (a1 * a2) / denom;
                total += s;
                if (grad_a) {
                    p_map.at(x, y) = T(2) * m2 * (a2 - a1) / denom + T(2) * m1 * s * (T(1) / b2 - T(1) / b1);
                    q_map.at(x, y) = T(2) * a1 / denom;
                    r_map.at(x, y) = -s / b2;
                }
            }

        if (grad_a) {
            Plane<T> gp = conv_valid_adjoint(p_map, a.width, a.height, k);
            Plane<T> gq = conv_valid_adjoint(q_map, a.width, a.height, k);
            Plane<T> gr = conv_valid_adjoint(r_map, a.width, a.height, k);
            const T scale = grad_weight / m_count;
            for (int y = 0; y < a.height; ++y)
                for (int x = 0; x < a.width; ++x) {
                    const T g = gp.at(x, y) + pb.at(x, y) * gq.at(x, y) + T(2) * pa.at(x, y) * gr.at(x, y);
                    grad_a->pixel(x, y)[ch] += scale * g;
                }
        }
    }
    return total / m_count;
}

} // namespace

template <typename T>
T l1(const ImageT<T>& a, const ImageT<T>& b) {
    check_shapes(a, b);
    T sum = T(0);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        sum += std::abs(a.data[i] - b.data[i]);
    return sum / T(a.data.size());
}

template <typename T>
void l1_grad(const ImageT<T>& a, const ImageT<T>& b, T weight, ImageT<T>& grad_a) {
    check_shapes(a, b);
    const T s = weight / T(a.data.size());
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const T d = a.data[i] - b.data[i];
        grad_a.data[i] += d > T(0) ? s : (d < T(0) ? -s : T(0));
    }
}

template <typename T>
T ssim(const ImageT<T>& a, const ImageT<T>& b) {
    return ssim_impl<T>(a, b, nullptr, T(0));
}

template <typename T>
T ssim_with_grad(const ImageT<T>& a, const ImageT<T>& b, T weight, ImageT<T>& grad_a) {
    return ssim_impl<T>(a, b, &grad_a, weight);
}

template <typename T>
ImageT<T> mu_law(const ImageT<T>& img, T mu) {
    const auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
    const T mn = *mn_it, mx = *mx_it;
    ImageT<T> out(img.width, img.height);
    if (!(mx - mn > T(1e-12)))
        return out;
    const T inv_range = T(1) / (mx - mn);
    const T denom = std::log1p(mu);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = std::log1p(mu * (img.data[i] - mn) * inv_range) / denom;
    return out;
}

template <typename T>
ImageT<T> mu_law_grad_factor(const ImageT<T>& img, T mu) {
    const auto [mn_it, mx_it] = std::minmax_element(img.data.begin(), img.data.end());
    const T mn = *mn_it, mx = *mx_it;
    ImageT<T> out(img.width, img.height);
    if (!(mx - mn > T(1e-12)))
        return out;
    const T inv_range = T(1) / (mx - mn);
    const T denom = std::log1p(mu);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const T x = (img.data[i] - mn) * inv_range;
        out.data[i] = mu / ((T(1) + mu * x) * denom) * inv_range;
    }
    return out;
}

template <typename T>
T recon_loss(const ImageT<T>& a, const ImageT<T>& b, T lambda) {
    T loss = (T(1) - lambda) * l1(a, b);
    if (lambda > T(0))
        loss += lambda * dssim(a, b);
    return loss;
}

template <typename T>
T recon_loss_with_grad(const ImageT<T>& a, const ImageT<T>& b, T lambda, ImageT<T>& grad_a) {
    T loss = (T(1) - lambda) * l1(a, b);
    l1_grad(a, b, T(1) - lambda, grad_a);
    if (lambda > T(0)) {
        // d(dssim)/da = -0.5 d(ssim)/da
        const T s = ssim_with_grad(a, b, -lambda / T(2), grad_a);
        loss += lambda * (T(1) - s) / T(2);
    }
    return loss;
}

template <typename T>
TotalLossResult<T> total_loss(const ImageT<T>* ldr_2d, const ImageT<T>& ldr_3d, const ImageT<T>& ldr_gt,
                              const ImageT<T>* hdr_2d, const ImageT<T>* hdr_gt, const LossWeights& weights) {
    weights.validate();
    if ((hdr_2d == nullptr) != (hdr_gt == nullptr))
        throw ContractViolation("HDR prediction and ground truth must both be present or both absent");

    TotalLossResult<T> res;
    const T lambda = T(weights.lambda);

    res.grad_ldr_3d = ImageT<T>(ldr_3d.width, ldr_3d.height);
    res.ldr = recon_loss_with_grad(ldr_3d, ldr_gt, lambda, res.grad_ldr_3d);
    if (ldr_2d) {
        res.grad_ldr_2d = ImageT<T>(ldr_2d->width, ldr_2d->height);
        res.ldr += recon_loss_with_grad(*ldr_2d, ldr_gt, lambda, *res.grad_ldr_2d);
    }

    const T alpha = hdr_gt ? T(weights.alpha) : T(0);
    if (hdr_2d) {
        const ImageT<T> pred = mu_law(*hdr_2d, T(weights.mu));
        const ImageT<T> target = mu_law(*hdr_gt, T(weights.mu));
        ImageT<T> grad_pred(pred.width, pred.height);
        res.hdr = recon_loss_with_grad(pred, target, lambda, grad_pred);
        const ImageT<T> factor = mu_law_grad_factor(*hdr_2d, T(weights.mu));
        res.grad_hdr_2d = ImageT<T>(pred.width, pred.height);
        for (std::size_t i = 0; i < grad_pred.data.size(); ++i)
            res.grad_hdr_2d->data[i] = alpha * grad_pred.data[i] * factor.data[i];
    }

    res.total = res.ldr + alpha * res.hdr;
    return res;
}

template <typename T>
T psnr(const ImageT<T>& a, const ImageT<T>& b, T peak) {
    check_shapes(a, b);
    T mse = T(0);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const T d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= T(a.data.size());
    if (mse == T(0))
        return std::numeric_limits<T>::infinity();
    return T(10) * std::log10(peak * peak / mse);
}

#define HDRSPLAT_INSTANTIATE_LOSSES(T)                                                                               \
    template T l1(const ImageT<T>&, const ImageT<T>&);                                                               \
    template void l1_grad(const ImageT<T>&, const ImageT<T>&, T, ImageT<T>&);                                        \
    template T ssim(const ImageT<T>&, const ImageT<T>&);                                                             \
    template T ssim_with_grad(const ImageT<T>&, const ImageT<T>&, T, ImageT<T>&);                                    \
    template ImageT<T> mu_law(const ImageT<T>&, T);                                                                  \
    template ImageT<T> mu_law_grad_factor(const ImageT<T>&, T);                                                      \
    template T recon_loss(const ImageT<T>&, const ImageT<T>&, T);                                                    \
    template T recon_loss_with_grad(const ImageT<T>&, const ImageT<T>&, T, ImageT<T>&);                              \
    template TotalLossResult<T> total_loss(const ImageT<T>*, const ImageT<T>&, const ImageT<T>&, const ImageT<T>*,   \
                                           const ImageT<T>*, const LossWeights&);                                    \
    template T psnr(const ImageT<T>&, const ImageT<T>&, T);

HDRSPLAT_INSTANTIATE_LOSSES(float)
HDRSPLAT_INSTANTIATE_LOSSES(double)

} // namespace hdrsplat
