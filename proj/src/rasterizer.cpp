// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hdrsplat {

namespace {

template <typename T>
T max_eigenvalue_2x2(const Mat2T<T>& m) {
    const T half_trace = (m(0, 0) + m(1, 1)) / T(2);
    const T half_diff = (m(0, 0) - m(1, 1)) / T(2);
    return half_trace + std::sqrt(half_diff * half_diff + m(0, 1) * m(1, 0));
}

template <typename T>
using ArrayX = Eigen::Array<T, Eigen::Dynamic, 1>;

} // namespace

template <typename T>
FrameCacheT<T> prepare_splats(const CloudT<T>& cloud, const CameraT<T>& camera, T t, const RenderOptionsT<T>& opts) {
    FrameCacheT<T> cache;
    cache.camera = camera;
    cache.t = t;
    cache.opts = opts;
    cache.n_gaussians = cloud.count();
    cache.splats.reserve(cloud.count());

    const Vec3T<T> cam_center = camera.center();
    const Mat3T<T>& world_to_cam = camera.rotation;

    for (int i = 0; i < cloud.count(); ++i) {
        SplatT<T> s;
        s.gi = i;

        const Vec4T<T> mean4 = cloud.mean4.row(i).transpose();
        const Vec4T<T> log_scale = cloud.log_scale4.row(i).transpose();
        const Vec4T<T> raw_ql = cloud.quat_left.row(i).transpose();
        const Vec4T<T> raw_qr = cloud.quat_right.row(i).transpose();
        if (!mean4.allFinite() || !log_scale.allFinite() || !raw_ql.allFinite() || !raw_qr.allFinite() ||
            !std::isfinite(static_cast<double>(cloud.raw_opacity[i])))
            throw NonFiniteParameter("gaussian parameters must be finite");

        s.scale = log_scale.array().exp().matrix();
        s.nl = raw_ql.norm();
        s.nr = raw_qr.norm();
        if (!(s.nl > T(1e-9)) || !(s.nr > T(1e-9)))
            throw DegenerateRotation("zero-norm quaternion");
        s.ql = raw_ql / s.nl;
        s.qr = raw_qr / s.nr;
        s.rot = left_isoclinic(s.ql) * right_isoclinic(s.qr);
        const Vec4T<T> s2 = s.scale.array().square().matrix();
        s.cov4 = s.rot * s2.asDiagonal() * s.rot.transpose();

        const T var_t = s.cov4(3, 3);
        if (!(var_t > T(1e-12)))
            throw DegenerateTemporalVariance("temporal variance must be positive");
        s.dt = t - mean4[3];
        s.w_time = std::exp(-s.dt * s.dt / (T(2) * var_t));
        if (s.w_time < opts.temporal_cull)
            continue;

        const Vec3T<T> cov_xt = s.cov4.template block<3, 1>(0, 3);
        s.mean3 = mean4.template head<3>() + cov_xt * (s.dt / var_t);
        s.cov3 = s.cov4.template block<3, 3>(0, 0) - cov_xt * cov_xt.transpose() / var_t;

        s.p_cam = world_to_cam * s.mean3 + camera.translation;
        s.depth = s.p_cam[2];
        if (!(s.depth > opts.near_plane))
            continue;

        const T inv_z = T(1) / s.depth;
        s.mean2[0] = camera.fx * s.p_cam[0] * inv_z + camera.cx;
        s.mean2[1] = camera.fy * s.p_cam[1] * inv_z + camera.cy;

        Eigen::Matrix<T, 2, 3> J;
        J << camera.fx * inv_z, T(0), -camera.fx * s.p_cam[0] * inv_z * inv_z,
            T(0), camera.fy * inv_z, -camera.fy * s.p_cam[1] * inv_z * inv_z;
        const Mat3T<T> cov_cam = world_to_cam * s.cov3 * world_to_cam.transpose();
        s.cov2 = J * cov_cam * J.transpose();
        s.cov2(0, 0) += opts.dilation;
        s.cov2(1, 1) += opts.dilation;
        const T det = s.cov2(0, 0) * s.cov2(1, 1) - s.cov2(0, 1) * s.cov2(1, 0);
        if (det < T(1e-12))
            continue; // singular footprint
        const T inv_det = T(1) / det;
        s.cov2_inv << s.cov2(1, 1) * inv_det, -s.cov2(0, 1) * inv_det,
            -s.cov2(1, 0) * inv_det, s.cov2(0, 0) * inv_det;

        s.alpha = sigmoid(cloud.raw_opacity[i]);

        Vec3T<T> to_gauss = s.mean3 - cam_center;
        s.dir_len = to_gauss.norm();
        s.dir = s.dir_len > T(0) ? Vec3T<T>(to_gauss / s.dir_len) : Vec3T<T>(T(0), T(0), T(1));
        s.color = eval_color_sh4d(cloud, i, s.dir, t);
        // eval_color_sh4d clamps; recover the raw value for the backward mask
        {
            const int nb = cloud.sh_basis();
            const int nf = cloud.fourier_terms();
            T yb[9], ft[8];
            sh::basis(cloud.sh_degree, s.dir, yb);
            fourier_basis(nf, t, cloud.fourier_period, ft);
            const T* a = cloud.sh.data() + static_cast<std::size_t>(i) * cloud.sh_dim();
            s.color_raw = Vec3T<T>(T(0.5), T(0.5), T(0.5));
            for (int n = 0; n < nf; ++n)
                for (int b = 0; b < nb; ++b) {
                    const T w = ft[n] * yb[b];
                    const T* coeff = a + (static_cast<std::size_t>(n) * nb + b) * 3;
                    s.color_raw[0] += w * coeff[0];
                    s.color_raw[1] += w * coeff[1];
                    s.color_raw[2] += w * coeff[2];
                }
        }

        // Conservative bound: contribution outside radius r is below spatial_tail.
        const T peak = s.w_time * s.alpha;
        if (peak <= opts.spatial_tail)
            continue;
        const T lam_max = max_eigenvalue_2x2(s.cov2);
        const T r = std::sqrt(T(2) * lam_max * std::log(peak / opts.spatial_tail));
        s.x0 = std::max(0, static_cast<int>(std::ceil(s.mean2[0] - r)));
        s.x1 = std::min(camera.width - 1, static_cast<int>(std::floor(s.mean2[0] + r)));
        s.y0 = std::max(0, static_cast<int>(std::ceil(s.mean2[1] - r)));
        s.y1 = std::min(camera.height - 1, static_cast<int>(std::floor(s.mean2[1] + r)));
        if (s.x0 > s.x1 || s.y0 > s.y1)
            continue;

        cache.splats.push_back(std::move(s));
    }

    std::stable_sort(cache.splats.begin(), cache.splats.end(),
                     [](const SplatT<T>& a, const SplatT<T>& b) { return a.depth < b.depth; });

    cache.rows.resize(camera.height);
    for (int k = 0; k < static_cast<int>(cache.splats.size()); ++k) {
        const SplatT<T>& s = cache.splats[k];
        for (int y = s.y0; y <= s.y1; ++y)
            cache.rows[y].push_back(k);
    }
    return cache;
}

namespace {

// Splat weights across one row span, with the transmittance guard applied:
// pixels whose transmittance already fell below the stop threshold get zero.
template <typename T>
void row_weights(const SplatT<T>& s, int y, const ArrayX<T>& xs, const ArrayX<T>& trans, T early_stop, T alpha_clamp,
                 ArrayX<T>& gauss_out, ArrayX<T>& w_out) {
    const int n = s.x1 - s.x0 + 1;
    const T a = s.cov2_inv(0, 0), b = s.cov2_inv(0, 1), c = s.cov2_inv(1, 1);
    const T dy = T(y) - s.mean2[1];
    auto dx = xs.segment(s.x0, n) - s.mean2[0];
    gauss_out.head(n) = (T(-0.5) * (a * dx.square() + (T(2) * b * dy) * dx + (c * dy * dy))).exp();
    w_out.head(n) = (trans.segment(s.x0, n) >= early_stop)
                        .select((s.w_time * s.alpha * gauss_out.head(n)).min(alpha_clamp), T(0));
}

} // namespace

template <typename T>
ImageT<T> composite(const FrameCacheT<T>& cache, const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>* colors) {
    const int w = cache.camera.width;
    const int h = cache.camera.height;
    ImageT<T> img(w, h);
    const Vec3T<T> bg = cache.opts.background;
    if (colors && colors->rows() != static_cast<Eigen::Index>(cache.splats.size()))
        throw ContractViolation("color override count does not match the forward cache");

#pragma omp parallel
    {
        ArrayX<T> xs(w);
        for (int x = 0; x < w; ++x)
            xs[x] = T(x);
        ArrayX<T> trans(w), gauss(w), wgt(w);
        ArrayX<T> acc[3] = {ArrayX<T>(w), ArrayX<T>(w), ArrayX<T>(w)};

#pragma omp for schedule(static)
        for (int y = 0; y < h; ++y) {
            trans.setOnes();
            for (auto& a : acc)
                a.setZero();
            for (int k : cache.rows[y]) {
                const SplatT<T>& s = cache.splats[k];
                const int n = s.x1 - s.x0 + 1;
                row_weights(s, y, xs, trans, cache.opts.early_stop, cache.opts.alpha_clamp, gauss, wgt);
                const Vec3T<T> c = colors ? Vec3T<T>(colors->row(k).transpose()) : s.color;
                for (int ch = 0; ch < 3; ++ch)
                    acc[ch].segment(s.x0, n) += trans.segment(s.x0, n) * wgt.head(n) * c[ch];
                trans.segment(s.x0, n) *= T(1) - wgt.head(n);
            }
            T* px = img.pixel(0, y);
            for (int x = 0; x < w; ++x) {
                px[3 * x + 0] = acc[0][x] + trans[x] * bg[0];
                px[3 * x + 1] = acc[1][x] + trans[x] * bg[1];
                px[3 * x + 2] = acc[2][x] + trans[x] * bg[2];
            }
        }
    }
    return img;
}

template <typename T>
PixelGradsT<T> composite_backward(const FrameCacheT<T>& cache,
                                  const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>* colors,
                                  const ImageT<T>& image_grad) {
    const int w = cache.camera.width;
    const int h = cache.camera.height;
    if (image_grad.width != w || image_grad.height != h)
        throw ContractViolation("image gradient shape does not match the forward cache");
    if (colors && colors->rows() != static_cast<Eigen::Index>(cache.splats.size()))
        throw ContractViolation("color override count does not match the forward cache");

    const int m = static_cast<int>(cache.splats.size());
    PixelGradsT<T> out;
    out.w_time.assign(m, T(0));
    out.alpha.assign(m, T(0));
    out.mean2.assign(m, Vec2T<T>::Zero());
    out.cov2.assign(m, Mat2T<T>::Zero());
    out.color.setZero(m, 3);

    // 10 slots per splat: w_time, alpha, mean2 (2), cov2 (3 sym), color (3).
    std::vector<std::vector<std::pair<int, std::array<T, 10>>>> row_partials(h);

#pragma omp parallel
    {
        ArrayX<T> xs(w);
        for (int x = 0; x < w; ++x)
            xs[x] = T(x);
        ArrayX<T> trans(w), gauss(w), wgt(w), scratch(w), grad_w(w), grad_q(w);
        ArrayX<T> suffix[3] = {ArrayX<T>(w), ArrayX<T>(w), ArrayX<T>(w)};
        ArrayX<T> sprod(w);
        ArrayX<T> grow[3] = {ArrayX<T>(w), ArrayX<T>(w), ArrayX<T>(w)};
        std::vector<T> w_store, t_store, g_store;
        std::vector<int> offsets;

#pragma omp for schedule(static)
        for (int y = 0; y < h; ++y) {
            const std::vector<int>& row = cache.rows[y];
            const std::size_t count = row.size();

            // planar gradient rows
            const T* gpx = image_grad.pixel(0, y);
            for (int x = 0; x < w; ++x) {
                grow[0][x] = gpx[3 * x + 0];
                grow[1][x] = gpx[3 * x + 1];
                grow[2][x] = gpx[3 * x + 2];
            }

            // forward sweep: record weights, gaussians and pre-splat transmittance
            offsets.assign(count + 1, 0);
            for (std::size_t i = 0; i < count; ++i)
                offsets[i + 1] = offsets[i] + (cache.splats[row[i]].x1 - cache.splats[row[i]].x0 + 1);
            w_store.resize(offsets[count]);
            t_store.resize(offsets[count]);
            g_store.resize(offsets[count]);

            trans.setOnes();
            for (std::size_t i = 0; i < count; ++i) {
                const SplatT<T>& s = cache.splats[row[i]];
                const int n = s.x1 - s.x0 + 1;
                row_weights(s, y, xs, trans, cache.opts.early_stop, cache.opts.alpha_clamp, gauss, wgt);
                Eigen::Map<ArrayX<T>>(w_store.data() + offsets[i], n) = wgt.head(n);
                Eigen::Map<ArrayX<T>>(t_store.data() + offsets[i], n) = trans.segment(s.x0, n);
                Eigen::Map<ArrayX<T>>(g_store.data() + offsets[i], n) = gauss.head(n);
                trans.segment(s.x0, n) *= T(1) - wgt.head(n);
            }

            // reverse sweep with suffix accumulators
            for (auto& sfx : suffix)
                sfx.setZero();
            sprod.setOnes();
            auto& partial = row_partials[y];
            partial.reserve(count);
            for (std::size_t ri = count; ri-- > 0;) {
                const int k = row[ri];
                const SplatT<T>& s = cache.splats[k];
                const int n = s.x1 - s.x0 + 1;
                const int x0 = s.x0;
                Eigen::Map<const ArrayX<T>> wv(w_store.data() + offsets[ri], n);
                Eigen::Map<const ArrayX<T>> tb(t_store.data() + offsets[ri], n);
                Eigen::Map<const ArrayX<T>> gv(g_store.data() + offsets[ri], n);
                const Vec3T<T> c = colors ? Vec3T<T>(colors->row(k).transpose()) : s.color;

                std::array<T, 10> slot{};

                // dI/dw = t_before * (c - suffix - bg * sprod), per channel
                grad_w.head(n) = grow[0].segment(x0, n) *
                                 (tb * (c[0] - suffix[0].segment(x0, n) - cache.opts.background[0] * sprod.segment(x0, n)));
                grad_w.head(n) += grow[1].segment(x0, n) *
                                  (tb * (c[1] - suffix[1].segment(x0, n) - cache.opts.background[1] * sprod.segment(x0, n)));
                grad_w.head(n) += grow[2].segment(x0, n) *
                                  (tb * (c[2] - suffix[2].segment(x0, n) - cache.opts.background[2] * sprod.segment(x0, n)));

                // color gradient: t_before * w
                scratch.head(n) = tb * wv;
                slot[7] = (scratch.head(n) * grow[0].segment(x0, n)).sum();
                slot[8] = (scratch.head(n) * grow[1].segment(x0, n)).sum();
                slot[9] = (scratch.head(n) * grow[2].segment(x0, n)).sum();

                // geometry slots: only where the splat was actually composited
                // (w > 0) and its weight was below the clamp
                const T raw_peak = s.w_time * s.alpha;
                grad_w.head(n) = ((wv > T(0)) && (raw_peak * gv < cache.opts.alpha_clamp)).select(grad_w.head(n), T(0));
                slot[0] = (grad_w.head(n) * gv).sum() * s.alpha;
                slot[1] = (grad_w.head(n) * gv).sum() * s.w_time;
                grad_q.head(n) = grad_w.head(n) * gv * (T(-0.5) * raw_peak);

                const T a = s.cov2_inv(0, 0), b = s.cov2_inv(0, 1), cc = s.cov2_inv(1, 1);
                const T dy = T(y) - s.mean2[1];
                auto dx = xs.segment(x0, n) - s.mean2[0];
                // mean2 gradient: -2 * grad_q * cov2_inv * d
                slot[2] = T(-2) * (grad_q.head(n) * (a * dx + b * dy)).sum();
                slot[3] = T(-2) * (grad_q.head(n) * (b * dx + cc * dy)).sum();
                // cov2 gradient: -inv (sum grad_q d d^T) inv
                const T sxx = (grad_q.head(n) * dx.square()).sum();
                const T sxy = (grad_q.head(n) * dx).sum() * dy;
                const T syy = grad_q.head(n).sum() * dy * dy;
                Mat2T<T> g_lambda;
                g_lambda << sxx, sxy, sxy, syy;
                const Mat2T<T> g_cov2 = -(s.cov2_inv * g_lambda * s.cov2_inv);
                slot[4] = g_cov2(0, 0);
                slot[5] = g_cov2(0, 1);
                slot[6] = g_cov2(1, 1);

                // update suffix state
                for (int ch = 0; ch < 3; ++ch)
                    suffix[ch].segment(x0, n) = wv * c[ch] + (T(1) - wv) * suffix[ch].segment(x0, n);
                sprod.segment(x0, n) *= T(1) - wv;

                partial.emplace_back(k, slot);
            }
        }
    }

    for (int y = 0; y < h; ++y) {
        for (const auto& [k, v] : row_partials[y]) {
            out.w_time[k] += v[0];
            out.alpha[k] += v[1];
            out.mean2[k][0] += v[2];
            out.mean2[k][1] += v[3];
            out.cov2[k](0, 0) += v[4];
            out.cov2[k](0, 1) += v[5];
            out.cov2[k](1, 0) += v[5];
            out.cov2[k](1, 1) += v[6];
            out.color(k, 0) += v[7];
            out.color(k, 1) += v[8];
            out.color(k, 2) += v[9];
        }
    }
    return out;
}

namespace {

// dL/dq for the left-isoclinic factor given dL/dL(q).
template <typename T>
Vec4T<T> left_isoclinic_grad(const Mat4T<T>& g) {
    return Vec4T<T>(g(0, 0) + g(1, 1) + g(2, 2) + g(3, 3),
                    -g(0, 1) + g(1, 0) - g(2, 3) + g(3, 2),
                    -g(0, 2) + g(2, 0) + g(1, 3) - g(3, 1),
                    -g(0, 3) + g(3, 0) - g(1, 2) + g(2, 1));
}

template <typename T>
Vec4T<T> right_isoclinic_grad(const Mat4T<T>& g) {
    return Vec4T<T>(g(0, 0) + g(1, 1) + g(2, 2) + g(3, 3),
                    -g(0, 1) + g(1, 0) + g(2, 3) - g(3, 2),
                    -g(0, 2) + g(2, 0) - g(1, 3) + g(3, 1),
                    -g(0, 3) + g(3, 0) + g(1, 2) - g(2, 1));
}

} // namespace

template <typename T>
void param_backward(const FrameCacheT<T>& cache, const CloudT<T>& cloud, const PixelGradsT<T>& pix,
                    const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& color_grad, CloudGradsT<T>& grads) {
    const int m = static_cast<int>(cache.splats.size());
    if (color_grad.rows() != m)
        throw ContractViolation("color gradient count does not match the forward cache");

    const Mat3T<T>& world_to_cam = cache.camera.rotation;
    const int nb = cloud.sh_basis();
    const int nf = cloud.fourier_terms();

#pragma omp parallel for schedule(static)
    for (int k = 0; k < m; ++k) {
        const SplatT<T>& s = cache.splats[k];
        const int i = s.gi;

        // ---- color: SH coefficients and the view-direction chain ----
        T yb[9], ft[8];
        Vec3T<T> dyb[9];
        sh::basis_grad(cloud.sh_degree, s.dir, yb, dyb);
        fourier_basis(nf, cache.t, cloud.fourier_period, ft);

        Vec3T<T> gc;
        for (int ch = 0; ch < 3; ++ch)
            gc[ch] = s.color_raw[ch] > T(0) ? color_grad(k, ch) : T(0);

        Vec3T<T> g_dir = Vec3T<T>::Zero();
        {
            const T* a = cloud.sh.data() + static_cast<std::size_t>(i) * cloud.sh_dim();
            T* ga = grads.sh.data() + static_cast<std::size_t>(i) * cloud.sh_dim();
            for (int n = 0; n < nf; ++n)
                for (int b = 0; b < nb; ++b) {
                    const std::size_t off = (static_cast<std::size_t>(n) * nb + b) * 3;
                    const T w = ft[n] * yb[b];
                    T coeff_dot = T(0);
                    for (int ch = 0; ch < 3; ++ch) {
                        ga[off + ch] += gc[ch] * w;
                        coeff_dot += gc[ch] * a[off + ch];
                    }
                    g_dir += coeff_dot * ft[n] * dyb[b];
                }
        }
        // dir = (mean3 - cam_center) / |.|
        Vec3T<T> g_mean3 = Vec3T<T>::Zero();
        if (s.dir_len > T(0))
            g_mean3 += (g_dir - s.dir * s.dir.dot(g_dir)) / s.dir_len;

        // ---- projection: mean2 and cov2 back to p_cam and cov3 ----
        const T inv_z = T(1) / s.depth;
        const Vec2T<T>& gm2 = pix.mean2[k];
        Vec3T<T> g_pcam;
        g_pcam[0] = gm2[0] * cache.camera.fx * inv_z;
        g_pcam[1] = gm2[1] * cache.camera.fy * inv_z;
        g_pcam[2] = -gm2[0] * cache.camera.fx * s.p_cam[0] * inv_z * inv_z -
                    gm2[1] * cache.camera.fy * s.p_cam[1] * inv_z * inv_z;

        Eigen::Matrix<T, 2, 3> J;
        J << cache.camera.fx * inv_z, T(0), -cache.camera.fx * s.p_cam[0] * inv_z * inv_z,
            T(0), cache.camera.fy * inv_z, -cache.camera.fy * s.p_cam[1] * inv_z * inv_z;
        const Mat2T<T>& gc2 = pix.cov2[k];
        const Mat3T<T> cov_cam = world_to_cam * s.cov3 * world_to_cam.transpose();
        const Mat3T<T> g_cov_cam = J.transpose() * gc2 * J;
        const Mat3T<T> g_cov3 = world_to_cam.transpose() * g_cov_cam * world_to_cam;
        const Eigen::Matrix<T, 2, 3> gJ = gc2 * J * cov_cam.transpose() + gc2.transpose() * J * cov_cam;
        const T inv_z2 = inv_z * inv_z;
        g_pcam[0] += gJ(0, 2) * (-cache.camera.fx * inv_z2);
        g_pcam[1] += gJ(1, 2) * (-cache.camera.fy * inv_z2);
        g_pcam[2] += gJ(0, 0) * (-cache.camera.fx * inv_z2) + gJ(1, 1) * (-cache.camera.fy * inv_z2) +
                     gJ(0, 2) * (T(2) * cache.camera.fx * s.p_cam[0] * inv_z2 * inv_z) +
                     gJ(1, 2) * (T(2) * cache.camera.fy * s.p_cam[1] * inv_z2 * inv_z);

        g_mean3 += world_to_cam.transpose() * g_pcam;

        // ---- conditioning on t ----
        const T var_t = s.cov4(3, 3);
        const Vec3T<T> cov_xt = s.cov4.template block<3, 1>(0, 3);

        Vec3T<T> g_cov_xt = g_mean3 * (s.dt / var_t);
        g_cov_xt += -(g_cov3 + g_cov3.transpose()) * cov_xt / var_t;
        T g_var_t = -g_mean3.dot(cov_xt) * s.dt / (var_t * var_t);
        g_var_t += cov_xt.dot(g_cov3 * cov_xt) / (var_t * var_t);
        T g_mu_t = -g_mean3.dot(cov_xt) / var_t; // through dt in the mean shift

        // ---- temporal weight ----
        const T gwt = pix.w_time[k];
        g_mu_t += gwt * s.w_time * s.dt / var_t;
        g_var_t += gwt * s.w_time * s.dt * s.dt / (T(2) * var_t * var_t);

        // ---- covariance: cov4 = rot diag(scale^2) rot^T ----
        Mat4T<T> g_cov4 = Mat4T<T>::Zero();
        g_cov4.template block<3, 3>(0, 0) = g_cov3;
        g_cov4.template block<3, 1>(0, 3) = g_cov_xt;
        g_cov4(3, 3) = g_var_t;

        const Vec4T<T> s2 = s.scale.array().square().matrix();
        const Mat4T<T> g_rot = (g_cov4 + g_cov4.transpose()) * s.rot * s2.asDiagonal();
        const Vec4T<T> g_s2 = (s.rot.transpose() * g_cov4 * s.rot).diagonal();
        for (int d = 0; d < 4; ++d)
            grads.log_scale4(i, d) += g_s2[d] * T(2) * s2[d]; // d/d log_scale of exp(2*ls)

        // rot = L(ql) * R(qr)
        const Mat4T<T> g_left = g_rot * right_isoclinic(s.qr).transpose();
        const Mat4T<T> g_right = left_isoclinic(s.ql).transpose() * g_rot;
        const Vec4T<T> g_ql = left_isoclinic_grad(g_left);
        const Vec4T<T> g_qr = right_isoclinic_grad(g_right);
        const Vec4T<T> g_raw_ql = (g_ql - s.ql * s.ql.dot(g_ql)) / s.nl;
        const Vec4T<T> g_raw_qr = (g_qr - s.qr * s.qr.dot(g_qr)) / s.nr;
        grads.quat_left.row(i) += g_raw_ql.transpose();
        grads.quat_right.row(i) += g_raw_qr.transpose();

        // ---- means and opacity ----
        grads.mean4(i, 0) += g_mean3[0];
        grads.mean4(i, 1) += g_mean3[1];
        grads.mean4(i, 2) += g_mean3[2];
        grads.mean4(i, 3) += g_mu_t;
        grads.raw_opacity[i] += pix.alpha[k] * s.alpha * (T(1) - s.alpha);
    }
}

template <typename T>
ImageT<T> render_hdr(const CloudT<T>& cloud, const CameraT<T>& camera, T t, const RenderOptionsT<T>& opts) {
    const FrameCacheT<T> cache = prepare_splats(cloud, camera, t, opts);
    return composite<T>(cache, nullptr);
}

template <typename T>
void render_hdr_backward(const FrameCacheT<T>& cache, const CloudT<T>& cloud, const ImageT<T>& image_grad,
                         CloudGradsT<T>& grads) {
    const PixelGradsT<T> pix = composite_backward<T>(cache, nullptr, image_grad);
    param_backward<T>(cache, cloud, pix, pix.color, grads);
}

template FrameCacheT<float> prepare_splats(const CloudT<float>&, const CameraT<float>&, float,
                                           const RenderOptionsT<float>&);
template FrameCacheT<double> prepare_splats(const CloudT<double>&, const CameraT<double>&, double,
                                            const RenderOptionsT<double>&);
template ImageT<float> composite(const FrameCacheT<float>&,
                                 const Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>*);
template ImageT<double> composite(const FrameCacheT<double>&,
                                  const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>*);
template PixelGradsT<float> composite_backward(const FrameCacheT<float>&,
                                               const Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>*,
                                               const ImageT<float>&);
template PixelGradsT<double> composite_backward(const FrameCacheT<double>&,
                                                const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>*,
                                                const ImageT<double>&);
template void param_backward(const FrameCacheT<float>&, const CloudT<float>&, const PixelGradsT<float>&,
                             const Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>&, CloudGradsT<float>&);
template void param_backward(const FrameCacheT<double>&, const CloudT<double>&, const PixelGradsT<double>&,
                             const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>&, CloudGradsT<double>&);
template ImageT<float> render_hdr(const CloudT<float>&, const CameraT<float>&, float, const RenderOptionsT<float>&);
template ImageT<double> render_hdr(const CloudT<double>&, const CameraT<double>&, double,
                                   const RenderOptionsT<double>&);
template void render_hdr_backward(const FrameCacheT<float>&, const CloudT<float>&, const ImageT<float>&,
                                  CloudGradsT<float>&);
template void render_hdr_backward(const FrameCacheT<double>&, const CloudT<double>&, const ImageT<double>&,
                                  CloudGradsT<double>&);

} // namespace hdrsplat
