// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/camera.hpp"
#include "hdrsplat/image.hpp"
#include "hdrsplat/scene.hpp"

#include <optional>
#include <vector>

namespace hdrsplat {

template <typename T>
struct RenderOptionsT {
    T near_plane = T(0.01);
    T temporal_cull = T(1e-4); // skip a Gaussian when its marginal time weight falls below this
    T early_stop = T(1e-4);    // stop compositing once transmittance falls below this
    T alpha_clamp = T(0.99);
    T dilation = T(0.3);       // added to both cov2 eigenvalues, pixels^2
    T spatial_tail = T(1e-8);  // per-splat contribution bound outside its bounding box
    Vec3T<T> background = Vec3T<T>::Zero();

    template <typename U>
    RenderOptionsT<U> cast() const {
        RenderOptionsT<U> o;
        o.near_plane = static_cast<U>(near_plane);
        o.temporal_cull = static_cast<U>(temporal_cull);
        o.early_stop = static_cast<U>(early_stop);
        o.alpha_clamp = static_cast<U>(alpha_clamp);
        o.dilation = static_cast<U>(dilation);
        o.spatial_tail = static_cast<U>(spatial_tail);
        o.background = background.template cast<U>();
        return o;
    }
};

using RenderOptions = RenderOptionsT<float>;

/// One projected Gaussian with every intermediate the backward pass reuses.
template <typename T>
struct SplatT {
    int gi = -1; // cloud row
    Vec4T<T> scale;
    Vec4T<T> ql, qr; // normalized
    T nl = 0, nr = 0;
    Mat4T<T> rot;
    Mat4T<T> cov4;
    T w_time = 0;
    T dt = 0; // t - mu_t
    Vec3T<T> mean3;
    Mat3T<T> cov3;
    Vec3T<T> p_cam;
    T depth = 0;
    Vec2T<T> mean2;
    Mat2T<T> cov2;
    Mat2T<T> cov2_inv;
    T alpha = 0;
    Vec3T<T> dir; // unit, camera center to conditional mean
    T dir_len = 0;
    Vec3T<T> color_raw; // before the zero clamp
    Vec3T<T> color;     // HDR
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1; // inclusive pixel bounds
};

/// Forward cache for one (cloud, camera, t) query. Splats are depth-sorted
/// front to back; `rows[y]` lists the splats whose bound covers row y, in the
/// same order.
template <typename T>
struct FrameCacheT {
    CameraT<T> camera;
    T t = 0;
    RenderOptionsT<T> opts;
    int n_gaussians = 0;
    std::vector<SplatT<T>> splats;
    std::vector<std::vector<int>> rows;

    /// Per-splat HDR colors as an M x 3 matrix (tone-mapping input).
    Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> hdr_colors() const {
        Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> c(splats.size(), 3);
        for (std::size_t i = 0; i < splats.size(); ++i)
            c.row(i) = splats[i].color.transpose();
        return c;
    }
};

using FrameCache = FrameCacheT<float>;

/// Per-splat gradients produced by the pixel loops of the backward pass.
template <typename T>
struct PixelGradsT {
    std::vector<T> w_time;
    std::vector<T> alpha;
    std::vector<Vec2T<T>> mean2;
    std::vector<Mat2T<T>> cov2;
    Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> color; // w.r.t. the composited colors
};

/// Project every live Gaussian for time t and build the compositing schedule.
template <typename T>
FrameCacheT<T> prepare_splats(const CloudT<T>& cloud, const CameraT<T>& camera, T t, const RenderOptionsT<T>& opts);

/// Alpha-composite front to back. `colors` overrides the cached HDR colors
/// (tone-mapped compositing); pass nullptr to composite the HDR colors.
template <typename T>
ImageT<T> composite(const FrameCacheT<T>& cache,
                    const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>* colors = nullptr);

/// Reverse of composite(): gradients w.r.t. per-splat compositing inputs.
/// Deterministic: per-row partials are merged in row order, so the result is
/// bit-identical for any thread count.
template <typename T>
PixelGradsT<T> composite_backward(const FrameCacheT<T>& cache,
                                  const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>* colors,
                                  const ImageT<T>& image_grad);

/// Chain per-splat gradients back to the raw cloud parameters. `color_grad`
/// must be w.r.t. the cached HDR colors (in tone-mapped mode, run the tone
/// backward first). Accumulates into `grads`.
template <typename T>
void param_backward(const FrameCacheT<T>& cache, const CloudT<T>& cloud, const PixelGradsT<T>& pix,
                    const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& color_grad, CloudGradsT<T>& grads);

/// Forward-only HDR render.
template <typename T>
ImageT<T> render_hdr(const CloudT<T>& cloud, const CameraT<T>& camera, T t, const RenderOptionsT<T>& opts = {});

/// HDR render plus gradients for all cloud parameters: convenience wrapper
/// used by gradient checks and HDR-loss training.
template <typename T>
void render_hdr_backward(const FrameCacheT<T>& cache, const CloudT<T>& cloud, const ImageT<T>& image_grad,
                         CloudGradsT<T>& grads);

} // namespace hdrsplat
