// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/rasterizer.hpp"
#include "hdrsplat/tonemap.hpp"

namespace hdrsplat {

/// One differentiable training step's forward state: splat cache, tone tape,
/// both rendering paths. The same code drives float training and the
/// double-precision gradient checks.
template <typename T>
struct PipelineForwardT {
    FrameCacheT<T> cache;
    TapeT<T> tape;
    ToneLeavesT<T> leaves;
    typename TapeT<T>::ValueId context;
    ToneMapTapeResult<T> tone3d;
    ImageT<T> ldr3d;
    ImageT<T> hdr;
    ToneMapTapeResult<T> tone2d;
    ImageT<T> ldr2d;
    bool has_hdr = false;
    bool has_2d = false;
};

template <typename T>
struct PipelineGradsT {
    CloudGradsT<T> cloud;
    ToneMapperStateT<T> tone; // same shapes as the parameters
};

template <typename T>
PipelineForwardT<T> pipeline_forward(const CloudT<T>& cloud, const ToneMapperStateT<T>& tone,
                                     const CameraT<T>& camera, T time, int t_index, T exposure,
                                     const RenderOptionsT<T>& opts, bool pixel_level, bool need_hdr);

/// Gradients for every scene and tone parameter given image-space gradients of
/// the rendered outputs. g_ldr2d / g_hdr may be null when the corresponding
/// path was not built (or carries no loss).
template <typename T>
void pipeline_backward(PipelineForwardT<T>& fwd, const CloudT<T>& cloud, const ToneMapperStateT<T>& tone,
                       const ImageT<T>& g_ldr3d, const ImageT<T>* g_ldr2d, const ImageT<T>* g_hdr,
                       PipelineGradsT<T>& grads);

/// Forward-only tone-mapped render for inference.
template <typename T>
ImageT<T> render_ldr3d(const CloudT<T>& cloud, const ToneMapperStateT<T>& tone, const CameraT<T>& camera, T time,
                       int t_index, T exposure, const RenderOptionsT<T>& opts = {});

} // namespace hdrsplat
