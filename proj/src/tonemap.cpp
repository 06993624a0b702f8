// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/tonemap.hpp"

#include <cmath>

namespace hdrsplat {

std::string to_string(CellKind kind) {
    return kind == CellKind::kGru ? "gru" : "rnn";
}

CellKind cell_kind_from_string(const std::string& s) {
    if (s == "gru")
        return CellKind::kGru;
    if (s == "rnn")
        return CellKind::kRnn;
    throw ContractViolation("unknown cell kind: " + s);
}

template <typename T>
void ToneCurvesT<T>::init(std::mt19937& rng) {
    auto fill = [&rng](Mat& m, int rows, int cols, double std) {
        std::normal_distribution<double> dist(0.0, std);
        m.resize(rows, cols);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = T(dist(rng));
    };
    for (Channel& ch : channels) {
        fill(ch.w1, input_dim(), hidden, std::sqrt(2.0 / input_dim()));
        ch.b1 = Mat::Zero(1, hidden);
        fill(ch.w2, hidden, hidden, std::sqrt(2.0 / hidden));
        ch.b2 = Mat::Zero(1, hidden);
        fill(ch.w3, hidden, 1, std::sqrt(1.0 / hidden));
        ch.b3 = Mat::Zero(1, 1);
    }
}

template <typename T>
void DrclWeightsT<T>::init(std::mt19937& rng) {
    auto fill = [&rng](Mat& m, int rows, int cols) {
        std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / rows));
        m.resize(rows, cols);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = T(dist(rng));
    };
    const int d = context_dim;
    if (kind == CellKind::kGru) {
        fill(wz, 3, d);
        fill(uz, d, d);
        bz = Mat::Zero(1, d);
        fill(wr, 3, d);
        fill(ur, d, d);
        br = Mat::Zero(1, d);
    } else {
        wz = uz = bz = wr = ur = br = Mat();
    }
    fill(wh, 3, d);
    fill(uh, d, d);
    bh = Mat::Zero(1, d);
}

template <typename T>
void RadianceBankT<T>::update(int idx, const Vec3T<T>& signature) {
    if (idx < 0 || idx >= size())
        throw ContractViolation("bank index out of range");
    if (!initialized[idx]) {
        entries.row(idx) = signature.transpose();
        initialized[idx] = 1;
    } else {
        entries.row(idx) = momentum * entries.row(idx) + (T(1) - momentum) * signature.transpose();
    }
}

template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> RadianceBankT<T>::window(int t_index, int k) const {
    if (t_index < 0 || t_index >= size())
        throw ContractViolation("bank index out of range");
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> win(k + 1, 3);
    for (int j = 0; j <= k; ++j) {
        const int src = std::max(t_index - k + j, 0);
        win.row(j) = entries.row(src);
    }
    return win;
}

template <typename T>
bool RadianceBankT<T>::warm(int t_index, int k) const {
    if (t_index < 0 || t_index >= size())
        return false;
    for (int j = 0; j <= k; ++j) {
        const int src = std::max(t_index - k + j, 0);
        if (!initialized[src])
            return false;
    }
    return true;
}

template <typename T>
Vec3T<T> radiance_signature(const CloudT<T>& cloud, T t) {
    if (cloud.count() == 0)
        throw EmptyScene("radiance signature of an empty cloud");
    const Vec3T<T> axis(T(0), T(0), T(1)); // canonical direction; the DC term dominates the mean
    Vec3T<T> sum = Vec3T<T>::Zero();
    for (int i = 0; i < cloud.count(); ++i)
        sum += eval_color_sh4d(cloud, i, axis, t);
    return sum / T(cloud.count());
}

template <typename T>
ToneLeavesT<T> make_tone_leaves(TapeT<T>& tape, const ToneMapperStateT<T>& state, bool needs_grad) {
    ToneLeavesT<T> leaves;
    for (int c = 0; c < 3; ++c) {
        const auto& ch = state.curves.channels[c];
        auto& l = leaves.channels[c];
        l.w1 = tape.leaf(ch.w1, needs_grad);
        l.b1 = tape.leaf(ch.b1, needs_grad);
        l.w2 = tape.leaf(ch.w2, needs_grad);
        l.b2 = tape.leaf(ch.b2, needs_grad);
        l.w3 = tape.leaf(ch.w3, needs_grad);
        l.b3 = tape.leaf(ch.b3, needs_grad);
    }
    const auto& d = state.drcl;
    if (d.kind == CellKind::kGru) {
        leaves.wz = tape.leaf(d.wz, needs_grad);
        leaves.uz = tape.leaf(d.uz, needs_grad);
        leaves.bz = tape.leaf(d.bz, needs_grad);
        leaves.wr = tape.leaf(d.wr, needs_grad);
        leaves.ur = tape.leaf(d.ur, needs_grad);
        leaves.br = tape.leaf(d.br, needs_grad);
    }
    leaves.wh = tape.leaf(d.wh, needs_grad);
    leaves.uh = tape.leaf(d.uh, needs_grad);
    leaves.bh = tape.leaf(d.bh, needs_grad);
    return leaves;
}

template <typename T>
void harvest_tone_grads(const TapeT<T>& tape, const ToneLeavesT<T>& leaves, ToneMapperStateT<T>& grads) {
    for (int c = 0; c < 3; ++c) {
        auto& g = grads.curves.channels[c];
        const auto& l = leaves.channels[c];
        g.w1 = tape.grad(l.w1);
        g.b1 = tape.grad(l.b1);
        g.w2 = tape.grad(l.w2);
        g.b2 = tape.grad(l.b2);
        g.w3 = tape.grad(l.w3);
        g.b3 = tape.grad(l.b3);
    }
    if (grads.drcl.kind == CellKind::kGru) {
        grads.drcl.wz = tape.grad(leaves.wz);
        grads.drcl.uz = tape.grad(leaves.uz);
        grads.drcl.bz = tape.grad(leaves.bz);
        grads.drcl.wr = tape.grad(leaves.wr);
        grads.drcl.ur = tape.grad(leaves.ur);
        grads.drcl.br = tape.grad(leaves.br);
    }
    grads.drcl.wh = tape.grad(leaves.wh);
    grads.drcl.uh = tape.grad(leaves.uh);
    grads.drcl.bh = tape.grad(leaves.bh);
}

template <typename T>
typename TapeT<T>::ValueId drcl_forward_tape(TapeT<T>& tape, const ToneLeavesT<T>& leaves, CellKind kind,
                                             const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& window) {
    if (window.rows() < 1 || window.cols() != 3)
        throw ContractViolation("signature window must be (k+1) x 3");
    using Mat = typename TapeT<T>::Mat;
    const int d = static_cast<int>(tape.val(leaves.wh).cols());
    auto h = tape.leaf(Mat::Zero(1, d), false);
    for (Eigen::Index step = 0; step < window.rows(); ++step) {
        auto x = tape.leaf(window.row(step), false); // detached statistics
        if (kind == CellKind::kGru) {
            auto z = tape.sigmoid(tape.add_rowvec(tape.add(tape.matmul(x, leaves.wz), tape.matmul(h, leaves.uz)),
                                                  leaves.bz));
            auto r = tape.sigmoid(tape.add_rowvec(tape.add(tape.matmul(x, leaves.wr), tape.matmul(h, leaves.ur)),
                                                  leaves.br));
            auto rh = tape.cwise_mul(r, h);
            auto cand = tape.tanh(tape.add_rowvec(tape.add(tape.matmul(x, leaves.wh), tape.matmul(rh, leaves.uh)),
                                                  leaves.bh));
            h = tape.add(tape.cwise_mul(tape.one_minus(z), h), tape.cwise_mul(z, cand));
        } else {
            h = tape.tanh(tape.add_rowvec(tape.add(tape.matmul(x, leaves.wh), tape.matmul(h, leaves.uh)), leaves.bh));
        }
    }
    return h;
}

template <typename T>
ToneMapTapeResult<T> tone_map_tape(TapeT<T>& tape, const ToneLeavesT<T>& leaves,
                                   const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& hdr, T exposure,
                                   typename TapeT<T>::ValueId context, bool input_needs_grad) {
    if (!(exposure > T(0)))
        throw InvalidExposure("exposure time must be positive");
    using Mat = typename TapeT<T>::Mat;
    const int m = static_cast<int>(hdr.rows());

    ToneMapTapeResult<T> res;
    res.input = tape.leaf(Mat(hdr), input_needs_grad);
    res.values.resize(m, 3);
    auto f_rep = tape.replicate_row(context, m);
    for (int c = 0; c < 3; ++c) {
        auto x = tape.log_scaled(tape.slice_col(res.input, c), T(kToneLogEps), exposure);
        auto in = tape.concat_cols(x, f_rep);
        const auto& l = leaves.channels[c];
        auto h1 = tape.affine_relu(in, l.w1, l.b1);
        auto h2 = tape.affine_relu(h1, l.w2, l.b2);
        auto out = tape.affine_sigmoid(h2, l.w3, l.b3);
        res.out[c] = out;
        res.values.col(c) = tape.val(out).col(0);
    }
    return res;
}

template <typename T>
Eigen::Matrix<T, 1, Eigen::Dynamic> drcl_forward(const DrclWeightsT<T>& drcl,
                                                 const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& window) {
    TapeT<T> tape;
    ToneMapperStateT<T> state;
    state.drcl = drcl;
    auto leaves = make_tone_leaves(tape, state, false);
    auto h = drcl_forward_tape(tape, leaves, drcl.kind, window);
    return tape.val(h).row(0);
}

template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>
tone_map_colors(const ToneCurvesT<T>& curves, const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& hdr,
                T exposure, const Eigen::Matrix<T, 1, Eigen::Dynamic>& context) {
    TapeT<T> tape;
    ToneMapperStateT<T> state;
    state.curves = curves;
    auto leaves = make_tone_leaves(tape, state, false);
    auto ctx = tape.leaf(context, false);
    auto res = tone_map_tape(tape, leaves, hdr, exposure, ctx, false);
    return res.values;
}

template <typename T>
ImageT<T> tone_map_image(const ToneCurvesT<T>& curves, const ImageT<T>& hdr, T exposure,
                         const Eigen::Matrix<T, 1, Eigen::Dynamic>& context) {
    Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor> flat =
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>>(hdr.data.data(),
                                                                               hdr.data.size() / 3, 3);
    auto mapped = tone_map_colors(curves, flat, exposure, context);
    ImageT<T> out(hdr.width, hdr.height);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>>(out.data.data(), out.data.size() / 3, 3) =
        mapped;
    return out;
}

template <typename T>
std::pair<Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>, Eigen::Matrix<T, 1, Eigen::Dynamic>>
dtm_apply(const ToneMapperStateT<T>& state, const Eigen::Matrix<T, Eigen::Dynamic, 3, Eigen::RowMajor>& hdr_colors,
          int t_index, T exposure) {
    if (!state.bank.warm(t_index, state.window_k))
        throw ColdBank("bank window is not fully initialized");
    const auto window = state.bank.window(t_index, state.window_k);
    const auto context = drcl_forward(state.drcl, window);
    return {tone_map_colors(state.curves, hdr_colors, exposure, context), context};
}

// explicit instantiations
template struct ToneCurvesT<float>;
template struct ToneCurvesT<double>;
template struct DrclWeightsT<float>;
template struct DrclWeightsT<double>;
template struct RadianceBankT<float>;
template struct RadianceBankT<double>;

template Vec3T<float> radiance_signature(const CloudT<float>&, float);
template Vec3T<double> radiance_signature(const CloudT<double>&, double);
template ToneLeavesT<float> make_tone_leaves(TapeT<float>&, const ToneMapperStateT<float>&, bool);
template ToneLeavesT<double> make_tone_leaves(TapeT<double>&, const ToneMapperStateT<double>&, bool);
template void harvest_tone_grads(const TapeT<float>&, const ToneLeavesT<float>&, ToneMapperStateT<float>&);
template void harvest_tone_grads(const TapeT<double>&, const ToneLeavesT<double>&, ToneMapperStateT<double>&);
template TapeT<float>::ValueId drcl_forward_tape(TapeT<float>&, const ToneLeavesT<float>&, CellKind,
                                                 const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&);
template TapeT<double>::ValueId drcl_forward_tape(TapeT<double>&, const ToneLeavesT<double>&, CellKind,
                                                  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&);
template ToneMapTapeResult<float> tone_map_tape(TapeT<float>&, const ToneLeavesT<float>&,
                                                const Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>&,
                                                float, TapeT<float>::ValueId, bool);
template ToneMapTapeResult<double> tone_map_tape(TapeT<double>&, const ToneLeavesT<double>&,
                                                 const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>&,
                                                 double, TapeT<double>::ValueId, bool);
template Eigen::Matrix<float, 1, Eigen::Dynamic> drcl_forward(const DrclWeightsT<float>&,
                                                              const Eigen::Matrix<float, Eigen::Dynamic,
                                                                                  Eigen::Dynamic>&);
template Eigen::Matrix<double, 1, Eigen::Dynamic> drcl_forward(const DrclWeightsT<double>&,
                                                               const Eigen::Matrix<double, Eigen::Dynamic,
                                                                                   Eigen::Dynamic>&);
template Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>
tone_map_colors(const ToneCurvesT<float>&, const Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>&, float,
                const Eigen::Matrix<float, 1, Eigen::Dynamic>&);
template Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>
tone_map_colors(const ToneCurvesT<double>&, const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>&, double,
                const Eigen::Matrix<double, 1, Eigen::Dynamic>&);
template ImageT<float> tone_map_image(const ToneCurvesT<float>&, const ImageT<float>&, float,
                                      const Eigen::Matrix<float, 1, Eigen::Dynamic>&);
template ImageT<double> tone_map_image(const ToneCurvesT<double>&, const ImageT<double>&, double,
                                       const Eigen::Matrix<double, 1, Eigen::Dynamic>&);
template std::pair<Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>, Eigen::Matrix<float, 1, Eigen::Dynamic>>
dtm_apply(const ToneMapperStateT<float>&, const Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>&, int,
          float);
template std::pair<Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>,
                   Eigen::Matrix<double, 1, Eigen::Dynamic>>
dtm_apply(const ToneMapperStateT<double>&, const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>&, int,
          double);

} // namespace hdrsplat
