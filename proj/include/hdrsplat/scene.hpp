// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace hdrsplat {

template <typename T>
using Vec2T = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Vec4T = Eigen::Matrix<T, 4, 1>;
template <typename T>
using Mat2T = Eigen::Matrix<T, 2, 2>;
template <typename T>
using Mat3T = Eigen::Matrix<T, 3, 3>;
template <typename T>
using Mat4T = Eigen::Matrix<T, 4, 4>;

/// Learnable record of N spacetime Gaussians. All fields hold raw (pre-activation)
/// values; activations are exp for scales, normalization for quaternions and a
/// logistic sigmoid for opacity.
template <typename T>
struct CloudT {
    using MatX4 = Eigen::Matrix<T, Eigen::Dynamic, 4, Eigen::RowMajor>;
    using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    using MatXX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    MatX4 mean4;      // (x, y, z, t), world units, t normalized to [0,1]
    MatX4 log_scale4; // exp() > 0
    MatX4 quat_left;  // raw; normalized on use
    MatX4 quat_right;
    VecX raw_opacity; // sigmoid() in (0,1)
    MatXX sh;         // N x (fourier_terms * sh_basis * 3), layout (n, b, ch)

    int fourier_degree = 2; // highest cosine order
    int sh_degree = 2;      // highest SH band, supported 0..2
    T fourier_period = T(1);

    int count() const { return static_cast<int>(mean4.rows()); }
    int sh_basis() const { return (sh_degree + 1) * (sh_degree + 1); }
    int fourier_terms() const { return fourier_degree + 1; }
    int sh_dim() const { return fourier_terms() * sh_basis() * 3; }

    void resize(int n) {
        mean4.setZero(n, 4);
        log_scale4.setZero(n, 4);
        quat_left.setZero(n, 4);
        quat_right.setZero(n, 4);
        raw_opacity.setZero(n);
        sh.setZero(n, sh_dim());
        quat_left.col(0).setOnes();
        quat_right.col(0).setOnes();
    }

    template <typename U>
    CloudT<U> cast() const {
        CloudT<U> out;
        out.mean4 = mean4.template cast<U>();
        out.log_scale4 = log_scale4.template cast<U>();
        out.quat_left = quat_left.template cast<U>();
        out.quat_right = quat_right.template cast<U>();
        out.raw_opacity = raw_opacity.template cast<U>();
        out.sh = sh.template cast<U>();
        out.fourier_degree = fourier_degree;
        out.sh_degree = sh_degree;
        out.fourier_period = static_cast<U>(fourier_period);
        return out;
    }
};

using Cloud = CloudT<float>;

/// Gradients w.r.t. the raw parameters, same shapes as the cloud.
template <typename T>
struct CloudGradsT {
    typename CloudT<T>::MatX4 mean4, log_scale4, quat_left, quat_right;
    typename CloudT<T>::VecX raw_opacity;
    typename CloudT<T>::MatXX sh;

    static CloudGradsT zeros_like(const CloudT<T>& c) {
        CloudGradsT g;
        g.mean4.setZero(c.count(), 4);
        g.log_scale4.setZero(c.count(), 4);
        g.quat_left.setZero(c.count(), 4);
        g.quat_right.setZero(c.count(), 4);
        g.raw_opacity.setZero(c.count());
        g.sh.setZero(c.count(), c.sh_dim());
        return g;
    }
};

using CloudGrads = CloudGradsT<float>;

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
inline T inverse_sigmoid(T y) {
    return std::log(y / (T(1) - y));
}

// Left-isoclinic factor: multiplication by q from the left, as a 4x4 matrix.
template <typename T>
Mat4T<T> left_isoclinic(const Vec4T<T>& q) {
    const T a = q[0], b = q[1], c = q[2], d = q[3];
    Mat4T<T> m;
    m << a, -b, -c, -d,
         b,  a, -d,  c,
         c,  d,  a, -b,
         d, -c,  b,  a;
    return m;
}

// Right-isoclinic factor: multiplication by q from the right.
template <typename T>
Mat4T<T> right_isoclinic(const Vec4T<T>& q) {
    const T p = q[0], u = q[1], v = q[2], w = q[3];
    Mat4T<T> m;
    m << p, -u, -v, -w,
         u,  p,  w, -v,
         v, -w,  p,  u,
         w,  v, -u,  p;
    return m;
}

/// SO(4) rotation from a left/right unit-quaternion pair. Inputs must be unit
/// norm within 1e-3 (renormalized internally); zero norm is rejected.
template <typename T>
Mat4T<T> build_rotation4(Vec4T<T> left, Vec4T<T> right) {
    const T nl = left.norm();
    const T nr = right.norm();
    if (!(nl > T(1e-9)) || !(nr > T(1e-9)))
        throw DegenerateRotation("zero-norm quaternion");
    if (std::abs(nl - T(1)) > T(1e-3) || std::abs(nr - T(1)) > T(1e-3))
        throw DegenerateRotation("quaternion too far from unit norm");
    left /= nl;
    right /= nr;
    return left_isoclinic(left) * right_isoclinic(right);
}

/// Covariance from raw parameters: R diag(exp(ls)^2) R^T, symmetric PSD.
template <typename T>
Mat4T<T> build_covariance4(const Vec4T<T>& log_scale4, const Vec4T<T>& quat_left, const Vec4T<T>& quat_right) {
    if (!log_scale4.allFinite() || !quat_left.allFinite() || !quat_right.allFinite())
        throw NonFiniteParameter("covariance parameters must be finite");
    const T nl = quat_left.norm();
    const T nr = quat_right.norm();
    if (!(nl > T(1e-9)) || !(nr > T(1e-9)))
        throw DegenerateRotation("zero-norm quaternion");
    const Mat4T<T> rot = left_isoclinic<T>(quat_left / nl) * right_isoclinic<T>(quat_right / nr);
    const Vec4T<T> s2 = (T(2) * log_scale4.array()).exp().matrix();
    return rot * s2.asDiagonal() * rot.transpose();
}

/// Unnormalized temporal marginal, peak 1 at t = mu_t.
template <typename T>
T temporal_weight(const Mat4T<T>& cov4, T mu_t, T t) {
    const T var_t = cov4(3, 3);
    if (!(var_t > T(1e-12)))
        throw DegenerateTemporalVariance("temporal variance must be positive");
    const T dt = t - mu_t;
    return std::exp(-dt * dt / (T(2) * var_t));
}

/// Condition the 4D Gaussian on time t: returns the 3D slice mean and covariance.
template <typename T>
void conditional_spatial(const Mat4T<T>& cov4, const Vec4T<T>& mean4, T t, Vec3T<T>& mean3, Mat3T<T>& cov3) {
    const T var_t = cov4(3, 3);
    if (!(var_t > T(1e-12)))
        throw DegenerateTemporalVariance("temporal variance must be positive");
    const Vec3T<T> cov_xt = cov4.template block<3, 1>(0, 3);
    mean3 = mean4.template head<3>() + cov_xt * ((t - mean4[3]) / var_t);
    cov3 = cov4.template block<3, 3>(0, 0) - cov_xt * cov_xt.transpose() / var_t;
}

namespace sh {

inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                  -1.0925484305920792, 0.5462742152960396};

/// Real SH basis values for a unit direction, bands 0..degree (degree <= 2).
template <typename T>
void basis(int degree, const Vec3T<T>& d, T* out) {
    out[0] = T(kC0);
    if (degree < 1)
        return;
    const T x = d[0], y = d[1], z = d[2];
    out[1] = T(-kC1) * y;
    out[2] = T(kC1) * z;
    out[3] = T(-kC1) * x;
    if (degree < 2)
        return;
    out[4] = T(kC2[0]) * x * y;
    out[5] = T(kC2[1]) * y * z;
    out[6] = T(kC2[2]) * (T(2) * z * z - x * x - y * y);
    out[7] = T(kC2[3]) * x * z;
    out[8] = T(kC2[4]) * (x * x - y * y);
}

/// Basis values plus per-basis gradients w.r.t. the (ambient) direction.
template <typename T>
void basis_grad(int degree, const Vec3T<T>& d, T* out, Vec3T<T>* dout) {
    basis(degree, d, out);
    dout[0].setZero();
    if (degree < 1)
        return;
    const T x = d[0], y = d[1], z = d[2];
    dout[1] = Vec3T<T>(T(0), T(-kC1), T(0));
    dout[2] = Vec3T<T>(T(0), T(0), T(kC1));
    dout[3] = Vec3T<T>(T(-kC1), T(0), T(0));
    if (degree < 2)
        return;
    dout[4] = Vec3T<T>(T(kC2[0]) * y, T(kC2[0]) * x, T(0));
    dout[5] = Vec3T<T>(T(0), T(kC2[1]) * z, T(kC2[1]) * y);
    dout[6] = Vec3T<T>(T(-2) * T(kC2[2]) * x, T(-2) * T(kC2[2]) * y, T(4) * T(kC2[2]) * z);
    dout[7] = Vec3T<T>(T(kC2[3]) * z, T(0), T(kC2[3]) * x);
    dout[8] = Vec3T<T>(T(2) * T(kC2[4]) * x, T(-2) * T(kC2[4]) * y, T(0));
}

} // namespace sh

/// Cosine time basis, phase-reduced so that t and t + period evaluate identically.
template <typename T>
void fourier_basis(int terms, T t, T period, T* out) {
    const T tr = std::fmod(t, period);
    for (int n = 0; n < terms; ++n)
        out[n] = std::cos(T(2) * T(M_PI) * T(n) * tr / period);
}

/// Time- and view-dependent HDR color of one Gaussian: 0.5 offset plus the
/// Fourier-modulated SH expansion, clamped at zero per channel. No upper clamp.
template <typename T>
Vec3T<T> eval_color_sh4d(const CloudT<T>& cloud, int i, const Vec3T<T>& dir, T t) {
    const int nb = cloud.sh_basis();
    const int nf = cloud.fourier_terms();
    T yb[9];
    sh::basis(cloud.sh_degree, dir, yb);
    T ft[8];
    fourier_basis(nf, t, cloud.fourier_period, ft);

    const T* a = cloud.sh.data() + static_cast<std::size_t>(i) * cloud.sh_dim();
    Vec3T<T> c(T(0.5), T(0.5), T(0.5));
    for (int n = 0; n < nf; ++n)
        for (int b = 0; b < nb; ++b) {
            const T w = ft[n] * yb[b];
            const T* coeff = a + (static_cast<std::size_t>(n) * nb + b) * 3;
            c[0] += w * coeff[0];
            c[1] += w * coeff[1];
            c[2] += w * coeff[2];
        }
    return c.cwiseMax(T(0));
}

struct CloudInitOptions {
    float extent = 1.5f;        // positions uniform in [-extent, extent]^3
    float scale_min = 0.05f;    // spatial scale range (pre-log)
    float scale_max = 0.25f;
    float time_scale_min = 0.1f;
    float time_scale_max = 0.5f;
    float opacity = 0.1f;
    float quat_jitter = 0.1f;
    float sh_dc_std = 0.2f;     // DC coefficients only; higher orders start at zero
};

/// Seeded random initialization inside a box, identity-ish rotations.
template <typename T>
CloudT<T> make_random_cloud(int n, std::mt19937& rng, int sh_degree = 2, int fourier_degree = 2,
                            const CloudInitOptions& opt = {}) {
    CloudT<T> c;
    c.sh_degree = sh_degree;
    c.fourier_degree = fourier_degree;
    c.resize(n);
    std::uniform_real_distribution<double> upos(-opt.extent, opt.extent);
    std::uniform_real_distribution<double> utime(0.0, 1.0);
    std::uniform_real_distribution<double> uscale(opt.scale_min, opt.scale_max);
    std::uniform_real_distribution<double> utscale(opt.time_scale_min, opt.time_scale_max);
    std::normal_distribution<double> jitter(0.0, opt.quat_jitter);
    std::normal_distribution<double> dc(0.0, opt.sh_dc_std);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k)
            c.mean4(i, k) = T(upos(rng));
        c.mean4(i, 3) = T(utime(rng));
        for (int k = 0; k < 3; ++k)
            c.log_scale4(i, k) = T(std::log(uscale(rng)));
        c.log_scale4(i, 3) = T(std::log(utscale(rng)));
        Vec4T<T> ql(T(1), T(jitter(rng)), T(jitter(rng)), T(jitter(rng)));
        Vec4T<T> qr(T(1), T(jitter(rng)), T(jitter(rng)), T(jitter(rng)));
        c.quat_left.row(i) = (ql / ql.norm()).transpose();
        c.quat_right.row(i) = (qr / qr.norm()).transpose();
        c.raw_opacity[i] = T(inverse_sigmoid(static_cast<double>(opt.opacity)));
        for (int ch = 0; ch < 3; ++ch)
            c.sh(i, ch) = T(dc(rng)); // (n=0, b=0, ch)
    }
    return c;
}

} // namespace hdrsplat
