// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/camera.hpp"
#include "hdrsplat/image.hpp"
#include "hdrsplat/scene.hpp"

namespace hdrsplat {

/// Serial reference renderer: per-pixel evaluation of the compositing sum over
/// all Gaussians in depth order, with no temporal cull, no bounding boxes and
/// no early stop. Kept independent of the optimized path; used by tests and
/// the renderer benchmark.
ImageD reference_render(const CloudT<double>& cloud, const CameraT<double>& camera, double t,
                        const Vec3T<double>& background = Vec3T<double>::Zero(), double dilation = 0.3,
                        double alpha_clamp = 0.99, double near_plane = 0.01);

} // namespace hdrsplat
