// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/pipeline.hpp"

namespace hdrsplat {

namespace {

template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> image_as_rows(const ImageT<T>& img) {
    return Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>>(img.data.data(),
                                                                                  img.data.size() / 3, 3);
}

template <typename T>
ImageT<T> rows_as_image(const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& rows, int w, int h) {
    ImageT<T> img(w, h);
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        for (int c = 0; c < 3; ++c)
            img.data[static_cast<std::size_t>(i) * 3 + c] = rows(i, c);
    return img;
}

} // namespace

template <typename T>
PipelineForwardT<T> pipeline_forward(const CloudT<T>& cloud, const ToneMapperStateT<T>& tone,
                                     const CameraT<T>& camera, T time, int t_index, T exposure,
                                     const RenderOptionsT<T>& opts, bool pixel_level, bool need_hdr) {
    if (!tone.bank.warm(t_index, tone.window_k))
        throw ColdBank("bank window is not fully initialized");

    PipelineForwardT<T> fwd;
    fwd.cache = prepare_splats(cloud, camera, time, opts);
    fwd.leaves = make_tone_leaves(fwd.tape, tone, true);
    fwd.context = drcl_forward_tape(fwd.tape, fwd.leaves, tone.drcl.kind,
                                    tone.bank.window(t_index, tone.window_k));

    const auto hdr_colors = fwd.cache.hdr_colors();
    fwd.tone3d = tone_map_tape(fwd.tape, fwd.leaves, hdr_colors, exposure, fwd.context, true);
    fwd.ldr3d = composite<T>(fwd.cache, &fwd.tone3d.values);

    if (need_hdr || pixel_level) {
        fwd.hdr = composite<T>(fwd.cache, nullptr);
        fwd.has_hdr = true;
    }
    if (pixel_level) {
        fwd.tone2d = tone_map_tape(fwd.tape, fwd.leaves, image_as_rows(fwd.hdr), exposure, fwd.context, true);
        fwd.ldr2d = rows_as_image<T>(fwd.tone2d.values, fwd.hdr.width, fwd.hdr.height);
        fwd.has_2d = true;
    }
    return fwd;
}

template <typename T>
void pipeline_backward(PipelineForwardT<T>& fwd, const CloudT<T>& cloud, const ToneMapperStateT<T>& tone,
                       const ImageT<T>& g_ldr3d, const ImageT<T>* g_ldr2d, const ImageT<T>* g_hdr,
                       PipelineGradsT<T>& grads) {
    using Mat = typename TapeT<T>::Mat;

    grads.cloud = CloudGradsT<T>::zeros_like(cloud);
    grads.tone = tone; // shapes and cell kind; matrices are overwritten below

    const PixelGradsT<T> pix3d = composite_backward<T>(fwd.cache, &fwd.tone3d.values, g_ldr3d);
    for (int c = 0; c < 3; ++c)
        fwd.tape.seed(fwd.tone3d.out[c], Mat(pix3d.color.col(c)));

    if (fwd.has_2d && g_ldr2d) {
        const auto rows = image_as_rows(*g_ldr2d);
        for (int c = 0; c < 3; ++c)
            fwd.tape.seed(fwd.tone2d.out[c], Mat(rows.col(c)));
    }

    fwd.tape.backward();
    harvest_tone_grads(fwd.tape, fwd.leaves, grads.tone);

    // 3D path: compositing color gradients arrive through the tone network
    Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> color_grad_hdr = fwd.tape.grad(fwd.tone3d.input);
    param_backward<T>(fwd.cache, cloud, pix3d, color_grad_hdr, grads.cloud);

    // HDR image: direct loss gradient plus the 2D tone path's input gradient
    const bool any_hdr_grad = (g_hdr != nullptr) || (fwd.has_2d && g_ldr2d != nullptr);
    if (fwd.has_hdr && any_hdr_grad) {
        ImageT<T> g_hdr_total(fwd.hdr.width, fwd.hdr.height);
        if (g_hdr) {
            if (!g_hdr->same_shape(g_hdr_total))
                throw ContractViolation("HDR gradient shape mismatch");
            g_hdr_total = *g_hdr;
        }
        if (fwd.has_2d && g_ldr2d) {
            const Mat& gin = fwd.tape.grad(fwd.tone2d.input);
            for (Eigen::Index i = 0; i < gin.rows(); ++i)
                for (int c = 0; c < 3; ++c)
                    g_hdr_total.data[static_cast<std::size_t>(i) * 3 + c] += gin(i, c);
        }
        const PixelGradsT<T> pix_hdr = composite_backward<T>(fwd.cache, nullptr, g_hdr_total);
        param_backward<T>(fwd.cache, cloud, pix_hdr, pix_hdr.color, grads.cloud);
    }
}

template <typename T>
ImageT<T> render_ldr3d(const CloudT<T>& cloud, const ToneMapperStateT<T>& tone, const CameraT<T>& camera, T time,
                       int t_index, T exposure, const RenderOptionsT<T>& opts) {
    const FrameCacheT<T> cache = prepare_splats(cloud, camera, time, opts);
    const auto [ldr, context] = dtm_apply(tone, cache.hdr_colors(), t_index, exposure);
    return composite<T>(cache, &ldr);
}

template PipelineForwardT<float> pipeline_forward(const CloudT<float>&, const ToneMapperStateT<float>&,
                                                  const CameraT<float>&, float, int, float,
                                                  const RenderOptionsT<float>&, bool, bool);
template PipelineForwardT<double> pipeline_forward(const CloudT<double>&, const ToneMapperStateT<double>&,
                                                   const CameraT<double>&, double, int, double,
                                                   const RenderOptionsT<double>&, bool, bool);
template void pipeline_backward(PipelineForwardT<float>&, const CloudT<float>&, const ToneMapperStateT<float>&,
                                const ImageT<float>&, const ImageT<float>*, const ImageT<float>*,
                                PipelineGradsT<float>&);
template void pipeline_backward(PipelineForwardT<double>&, const CloudT<double>&, const ToneMapperStateT<double>&,
                                const ImageT<double>&, const ImageT<double>*, const ImageT<double>*,
                                PipelineGradsT<double>&);
template ImageT<float> render_ldr3d(const CloudT<float>&, const ToneMapperStateT<float>&, const CameraT<float>&,
                                    float, int, float, const RenderOptionsT<float>&);
template ImageT<double> render_ldr3d(const CloudT<double>&, const ToneMapperStateT<double>&, const CameraT<double>&,
                                     double, int, double, const RenderOptionsT<double>&);

} // namespace hdrsplat
