// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/image.hpp"
#include "hdrsplat/scene.hpp"
#include "hdrsplat/tape.hpp"

#include <array>
#include <random>
#include <string>

namespace hdrsplat {

enum class CellKind { kGru, kRnn };

std::string to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& s);

/// Three independent per-channel tone curves: (1 + d) -> hidden -> hidden -> 1,
/// rectified-linear interior, logistic-sigmoid output.
template <typename T>
struct ToneCurvesT {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    struct Channel {
        Mat w1, b1, w2, b2, w3, b3;
    };
    std::array<Channel, 3> channels;
    int context_dim = 2;
    int hidden = 64;

    int input_dim() const { return 1 + context_dim; }
    void init(std::mt19937& rng);

    template <typename F>
    void for_each(F&& f) {
        const char* names[3] = {"r", "g", "b"};
        for (int c = 0; c < 3; ++c) {
            Channel& ch = channels[c];
            f(std::string("curve_") + names[c] + "_w1", ch.w1);
            f(std::string("curve_") + names[c] + "_b1", ch.b1);
            f(std::string("curve_") + names[c] + "_w2", ch.w2);
            f(std::string("curve_") + names[c] + "_b2", ch.b2);
            f(std::string("curve_") + names[c] + "_w3", ch.w3);
            f(std::string("curve_") + names[c] + "_b3", ch.b3);
        }
    }
};

/// Recurrent cell over radiance signatures; input size 3, hidden size d.
/// The RNN variant uses only wh/uh/bh.
template <typename T>
struct DrclWeightsT {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    CellKind kind = CellKind::kGru;
    int context_dim = 2;
    Mat wz, uz, bz, wr, ur, br, wh, uh, bh;

    void init(std::mt19937& rng);

    template <typename F>
    void for_each(F&& f) {
        if (kind == CellKind::kGru) {
            f("drcl_wz", wz);
            f("drcl_uz", uz);
            f("drcl_bz", bz);
            f("drcl_wr", wr);
            f("drcl_ur", ur);
            f("drcl_br", br);
        }
        f("drcl_wh", wh);
        f("drcl_uh", uh);
        f("drcl_bh", bh);
    }
};

/// Per-timestamp mean HDR color statistics, EMA-updated and detached from
/// gradients. Indexed by discrete training-frame timestamp.
template <typename T>
struct RadianceBankT {
    Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> entries;
    std::vector<std::uint8_t> initialized;
    T momentum = T(0.9);

    void resize(int n) {
        entries.setZero(n, 3);
        initialized.assign(n, 0);
    }

    int size() const { return static_cast<int>(entries.rows()); }

    void update(int idx, const Vec3T<T>& signature);

    /// Window r_{t-k..t}, (k+1) x 3, pre-clip indices repeat the earliest entry.
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> window(int t_index, int k) const;

    bool warm(int t_index, int k) const;
};

template <typename T>
struct ToneMapperStateT {
    ToneCurvesT<T> curves;
    DrclWeightsT<T> drcl;
    RadianceBankT<T> bank;
    int window_k = 20;

    template <typename F>
    void for_each_param(F&& f) {
        curves.for_each(f);
        drcl.for_each(f);
    }
};

using ToneMapperState = ToneMapperStateT<float>;

/// Mean HDR color over all Gaussians at time t, canonical +z view direction.
template <typename T>
Vec3T<T> radiance_signature(const CloudT<T>& cloud, T t);

/// Forward-only recurrent pass over a window of signatures (rows, oldest first).
template <typename T>
Eigen::Matrix<T, 1, Eigen::Dynamic> drcl_forward(const DrclWeightsT<T>& drcl,
                                                 const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& window);

/// Forward-only per-channel tone mapping of N HDR colors under exposure e.
template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>
tone_map_colors(const ToneCurvesT<T>& curves, const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& hdr,
                T exposure, const Eigen::Matrix<T, 1, Eigen::Dynamic>& context);

/// Pixel-level application of the same curves to an HDR image.
template <typename T>
ImageT<T> tone_map_image(const ToneCurvesT<T>& curves, const ImageT<T>& hdr, T exposure,
                         const Eigen::Matrix<T, 1, Eigen::Dynamic>& context);

/// Forward-only tone mapping with the full state: window from the bank,
/// recurrent context, per-channel curves. Returns LDR colors and the context.
template <typename T>
std::pair<Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>, Eigen::Matrix<T, 1, Eigen::Dynamic>>
dtm_apply(const ToneMapperStateT<T>& state, const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& hdr_colors,
          int t_index, T exposure);

// ---- tape-based pieces for training ----

template <typename T>
struct ToneLeavesT {
    struct ChannelLeaves {
        typename TapeT<T>::ValueId w1, b1, w2, b2, w3, b3;
    };
    std::array<ChannelLeaves, 3> channels;
    typename TapeT<T>::ValueId wz, uz, bz, wr, ur, br, wh, uh, bh;
};

template <typename T>
ToneLeavesT<T> make_tone_leaves(TapeT<T>& tape, const ToneMapperStateT<T>& state, bool needs_grad = true);

/// Copy harvested leaf gradients into a mirror parameter struct.
template <typename T>
void harvest_tone_grads(const TapeT<T>& tape, const ToneLeavesT<T>& leaves, ToneMapperStateT<T>& grads);

template <typename T>
typename TapeT<T>::ValueId drcl_forward_tape(TapeT<T>& tape, const ToneLeavesT<T>& leaves, CellKind kind,
                                             const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& window);

/// Tone-map a matrix of HDR values on the tape. Returns per-channel output
/// columns; `input_id` is the HDR leaf (seedable for input gradients).
template <typename T>
struct ToneMapTapeResult {
    typename TapeT<T>::ValueId input;
    std::array<typename TapeT<T>::ValueId, 3> out;
    Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> values;
};

template <typename T>
ToneMapTapeResult<T> tone_map_tape(TapeT<T>& tape, const ToneLeavesT<T>& leaves,
                                   const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& hdr, T exposure,
                                   typename TapeT<T>::ValueId context, bool input_needs_grad);

constexpr double kToneLogEps = 1e-6;

} // namespace hdrsplat
