// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/common.hpp"
#include "hdrsplat/scene.hpp"

namespace hdrsplat {

/// Pinhole camera, world-to-camera convention: p_cam = rotation * p_world + translation.
template <typename T>
struct CameraT {
    Mat3T<T> rotation = Mat3T<T>::Identity();
    Vec3T<T> translation = Vec3T<T>::Zero();
    T fx = T(100), fy = T(100);
    T cx = T(50), cy = T(50);
    int width = 100, height = 100;

    Vec3T<T> center() const { return -(rotation.transpose() * translation); }

    void validate() const {
        if ((rotation * rotation.transpose() - Mat3T<T>::Identity()).template lpNorm<Eigen::Infinity>() > T(1e-5))
            throw ContractViolation("camera rotation not orthonormal");
        if (!(fx > T(0)) || !(fy > T(0)))
            throw ContractViolation("focal lengths must be positive");
        if (width < 1 || height < 1)
            throw ContractViolation("image dimensions must be at least 1");
    }

    template <typename U>
    CameraT<U> cast() const {
        CameraT<U> out;
        out.rotation = rotation.template cast<U>();
        out.translation = translation.template cast<U>();
        out.fx = static_cast<U>(fx);
        out.fy = static_cast<U>(fy);
        out.cx = static_cast<U>(cx);
        out.cy = static_cast<U>(cy);
        out.width = width;
        out.height = height;
        return out;
    }

    /// Camera on a ring of given radius in the y = `height_y` plane, looking at a target point.
    static CameraT look_at(const Vec3T<T>& eye, const Vec3T<T>& target, const Vec3T<T>& up, T fx_, T fy_, int w,
                           int h) {
        Vec3T<T> forward = (target - eye).normalized();
        Vec3T<T> right = forward.cross(up).normalized();
        Vec3T<T> down = forward.cross(right).normalized();
        CameraT cam;
        cam.rotation.row(0) = right.transpose();
        cam.rotation.row(1) = down.transpose();
        cam.rotation.row(2) = forward.transpose();
        cam.translation = -(cam.rotation * eye);
        cam.fx = fx_;
        cam.fy = fy_;
        cam.width = w;
        cam.height = h;
        cam.cx = T(w) / T(2);
        cam.cy = T(h) / T(2);
        return cam;
    }
};

using Camera = CameraT<float>;

} // namespace hdrsplat
