// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hdrsplat/common.hpp"

#include <Eigen/Dense>

#include <cassert>
#include <vector>

namespace hdrsplat {

/// Record-and-replay reverse-mode tape over dense matrices. Covers exactly the
/// operations the tone-mapping networks need; scene gradients stay analytic in
/// the rasterizer.
template <typename T>
class TapeT {
public:
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

    struct ValueId {
        int idx = -1;
        bool valid() const { return idx >= 0; }
    };

    ValueId leaf(Mat value, bool needs_grad) {
        return push(Op::kLeaf, {}, {}, std::move(value), needs_grad);
    }

    ValueId matmul(ValueId a, ValueId b) {
        Mat v = val(a) * val(b);
        return push(Op::kMatMul, a, b, std::move(v));
    }

    ValueId add(ValueId a, ValueId b) {
        Mat v = val(a) + val(b);
        return push(Op::kAdd, a, b, std::move(v));
    }

    /// a (m x n) + bias (1 x n), broadcast over rows.
    ValueId add_rowvec(ValueId a, ValueId bias) {
        Mat v = val(a).rowwise() + val(bias).row(0);
        return push(Op::kAddRowVec, a, bias, std::move(v));
    }

    ValueId cwise_mul(ValueId a, ValueId b) {
        Mat v = val(a).cwiseProduct(val(b));
        return push(Op::kCwiseMul, a, b, std::move(v));
    }

    ValueId one_minus(ValueId a) {
        Mat v = (T(1) - val(a).array()).matrix();
        return push(Op::kOneMinus, a, {}, std::move(v));
    }

    ValueId relu(ValueId a) {
        Mat v = val(a).cwiseMax(T(0));
        return push(Op::kRelu, a, {}, std::move(v));
    }

    /// relu(x * w + bias), fused into one node.
    ValueId affine_relu(ValueId x, ValueId w, ValueId bias) {
        Mat v(val(x).rows(), val(w).cols());
        v.noalias() = val(x) * val(w);
        v.rowwise() += val(bias).row(0);
        v = v.cwiseMax(T(0));
        auto id = push(Op::kAffineRelu, x, w, std::move(v));
        nodes_.back().c = bias;
        nodes_.back().needs_grad = nodes_.back().needs_grad || nodes_[bias.idx].needs_grad;
        return id;
    }

    /// sigmoid(x * w + bias), fused into one node.
    ValueId affine_sigmoid(ValueId x, ValueId w, ValueId bias) {
        Mat v(val(x).rows(), val(w).cols());
        v.noalias() = val(x) * val(w);
        v.rowwise() += val(bias).row(0);
        v = (T(1) / (T(1) + (-v.array()).exp())).matrix();
        auto id = push(Op::kAffineSigmoid, x, w, std::move(v));
        nodes_.back().c = bias;
        nodes_.back().needs_grad = nodes_.back().needs_grad || nodes_[bias.idx].needs_grad;
        return id;
    }

    ValueId sigmoid(ValueId a) {
        Mat v = (T(1) / (T(1) + (-val(a).array()).exp())).matrix();
        return push(Op::kSigmoid, a, {}, std::move(v));
    }

    ValueId tanh(ValueId a) {
        Mat v = val(a).array().tanh().matrix();
        return push(Op::kTanh, a, {}, std::move(v));
    }

    /// 1 x n row replicated to m x n.
    ValueId replicate_row(ValueId a, int m) {
        Mat v = val(a).row(0).colwise().replicate(m);
        auto id = push(Op::kReplicateRow, a, {}, std::move(v));
        return id;
    }

    ValueId concat_cols(ValueId a, ValueId b) {
        const Mat& va = val(a);
        const Mat& vb = val(b);
        assert(va.rows() == vb.rows());
        Mat v(va.rows(), va.cols() + vb.cols());
        v << va, vb;
        return push(Op::kConcatCols, a, b, std::move(v));
    }

    ValueId slice_col(ValueId a, int col) {
        Mat v = val(a).col(col);
        auto id = push(Op::kSliceCol, a, {}, std::move(v));
        nodes_.back().aux_int = col;
        return id;
    }

    /// Elementwise log(max(x, eps) * scale). Gradient is 1/x above eps, zero below.
    ValueId log_scaled(ValueId a, T eps, T scale) {
        Mat v = (val(a).array().max(eps) * scale).log().matrix();
        auto id = push(Op::kLogScaled, a, {}, std::move(v));
        nodes_.back().aux = eps;
        return id;
    }

    const Mat& val(ValueId id) const { return nodes_[id.idx].value; }

    const Mat& grad(ValueId id) const {
        Node& n = const_cast<Node&>(nodes_[id.idx]);
        if (!n.needs_grad)
            throw ContractViolation("gradient requested for a detached tape value");
        if (!n.has_grad) {
            n.grad = Mat::Zero(n.value.rows(), n.value.cols());
            n.has_grad = true;
        }
        return n.grad;
    }

    void seed(ValueId id, const Mat& g) {
        assert(g.rows() == nodes_[id.idx].value.rows() && g.cols() == nodes_[id.idx].value.cols());
        add_grad(id, g);
    }

    /// Reverse sweep over every recorded node; seeds must be set beforehand.
    void backward() {
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.needs_grad || n.op == Op::kLeaf || !n.has_grad)
                continue;
            const Mat& g = n.grad;
            switch (n.op) {
            case Op::kMatMul:
                add_grad(n.a, g * nodes_[n.b.idx].value.transpose());
                add_grad(n.b, nodes_[n.a.idx].value.transpose() * g);
                break;
            case Op::kAdd:
                add_grad(n.a, g);
                add_grad(n.b, g);
                break;
            case Op::kAddRowVec:
                add_grad(n.a, g);
                add_grad(n.b, g.colwise().sum());
                break;
            case Op::kCwiseMul:
                add_grad(n.a, g.cwiseProduct(nodes_[n.b.idx].value));
                add_grad(n.b, g.cwiseProduct(nodes_[n.a.idx].value));
                break;
            case Op::kOneMinus:
                add_grad(n.a, -g);
                break;
            case Op::kRelu:
                add_grad(n.a, (nodes_[n.a.idx].value.array() > T(0)).template cast<T>().matrix().cwiseProduct(g));
                break;
            case Op::kAffineRelu:
            case Op::kAffineSigmoid: {
                Mat gpre;
                if (n.op == Op::kAffineRelu)
                    gpre = (n.value.array() > T(0)).select(g, Mat::Zero(g.rows(), g.cols()));
                else
                    gpre = g.cwiseProduct((n.value.array() * (T(1) - n.value.array())).matrix());
                add_grad(n.a, gpre * nodes_[n.b.idx].value.transpose());
                add_grad(n.b, nodes_[n.a.idx].value.transpose() * gpre);
                add_grad(n.c, gpre.colwise().sum());
                break;
            }
            case Op::kSigmoid:
                add_grad(n.a, g.cwiseProduct((n.value.array() * (T(1) - n.value.array())).matrix()));
                break;
            case Op::kTanh:
                add_grad(n.a, g.cwiseProduct((T(1) - n.value.array().square()).matrix()));
                break;
            case Op::kReplicateRow:
                add_grad(n.a, g.colwise().sum());
                break;
            case Op::kConcatCols: {
                const auto ca = nodes_[n.a.idx].value.cols();
                add_grad(n.a, g.leftCols(ca));
                add_grad(n.b, g.rightCols(g.cols() - ca));
                break;
            }
            case Op::kSliceCol: {
                if (!nodes_[n.a.idx].needs_grad)
                    break;
                Mat ga = Mat::Zero(nodes_[n.a.idx].value.rows(), nodes_[n.a.idx].value.cols());
                ga.col(n.aux_int) = g;
                add_grad(n.a, ga);
                break;
            }
            case Op::kLogScaled: {
                const Mat& x = nodes_[n.a.idx].value;
                Mat dg = (x.array() > n.aux).select(g.array() / x.array(), Mat::Zero(x.rows(), x.cols()).array());
                add_grad(n.a, dg);
                break;
            }
            case Op::kLeaf:
                break;
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        kLeaf,
        kMatMul,
        kAdd,
        kAddRowVec,
        kCwiseMul,
        kOneMinus,
        kRelu,
        kAffineRelu,
        kAffineSigmoid,
        kSigmoid,
        kTanh,
        kReplicateRow,
        kConcatCols,
        kSliceCol,
        kLogScaled,
    };

    struct Node {
        Op op;
        ValueId a, b, c;
        Mat value;
        Mat grad;
        bool needs_grad = false;
        bool has_grad = false;
        T aux = T(0);
        int aux_int = 0;
    };

    ValueId push(Op op, ValueId a, ValueId b, Mat value, bool leaf_needs_grad = false) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.needs_grad = op == Op::kLeaf
                           ? leaf_needs_grad
                           : ((a.valid() && nodes_[a.idx].needs_grad) || (b.valid() && nodes_[b.idx].needs_grad));
        n.value = std::move(value);
        nodes_.push_back(std::move(n));
        return ValueId{static_cast<int>(nodes_.size()) - 1};
    }

    template <typename Expr>
    void add_grad(ValueId id, const Expr& g) {
        if (!id.valid())
            return;
        Node& n = nodes_[id.idx];
        if (!n.needs_grad)
            return;
        if (!n.has_grad) {
            n.grad = g;
            n.has_grad = true;
        } else {
            n.grad += g;
        }
    }

    std::vector<Node> nodes_;
};

using Tape = TapeT<float>;

} // namespace hdrsplat
