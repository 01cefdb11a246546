// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flashvid/tensor.hpp"

namespace flashvid {

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so every operand
/// precedes its consumers and backward() is a single reverse sweep.
///
/// In inference mode no backward closures are kept and no gradients are
/// allocated; the same op functions then serve as a plain forward evaluator.
template <class T>
class Tape {
public:
    enum class Mode { record, inference };

    using Backward = std::function<void(Tape&, std::size_t self)>;

    explicit Tape(Mode mode = Mode::record) : mode_(mode) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    bool recording() const { return mode_ == Mode::record; }

    /// Trainable leaf backed by an external tensor; backward() accumulates
    /// into param.grad. The tensor must outlive the tape.
    Var leaf(Tensor<T>& param)
    {
        Node n;
        n.external = &param;
        n.param = &param;
        n.requires_grad = recording();
        return append(std::move(n));
    }

    /// Read-only leaf backed by an external tensor.
    Var constant_ref(const Tensor<T>& value)
    {
        Node n;
        n.external = &value;
        return append(std::move(n));
    }

    Var constant(Tensor<T> value)
    {
        Node n;
        n.owned = std::move(value);
        return append(std::move(n));
    }

    /// Records the result of an op. `backward` is dropped when no input needs
    /// a gradient or the tape is in inference mode.
    Var push(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward)
    {
        return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                    std::move(backward));
    }

    Var push(Tensor<T> value, std::span<const Var> inputs, Backward backward)
    {
        Node n;
        n.owned = std::move(value);
        for (Var in : inputs) {
            n.requires_grad = n.requires_grad || nodes_.at(in.id).requires_grad;
        }
        if (n.requires_grad && recording()) {
            n.backward = std::move(backward);
        }
        return append(std::move(n));
    }

    const Tensor<T>& value(Var v) const { return node_value(nodes_.at(v.id)); }
    const Tensor<T>& value_at(std::size_t id) const { return node_value(nodes_[id]); }

    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient buffer of an intermediate node; empty unless requires_grad.
    std::span<T> grad(Var v) { return node_grad(v.id); }
    std::span<T> grad_at(std::size_t id) { return node_grad(id); }

    std::size_t size() const { return nodes_.size(); }

    /// Populates d(loss)/d(leaf) into every trainable leaf's grad buffer
    /// (accumulating into whatever the buffer already holds).
    void backward(Var loss)
    {
        if (!recording()) {
            throw ContractError("backward() called on an inference-mode tape");
        }
        const Tensor<T>& lv = value(loss);
        if (lv.size() != 1) {
            throw ContractError("loss must be a scalar, got shape " + shape_string(lv.shape()));
        }
        if (!nodes_[loss.id].requires_grad) {
            return;
        }
        node_grad(loss.id)[0] = T(1);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.grad.empty()) {
                continue;
            }
            if (n.backward) {
                n.backward(*this, i);
            } else if (n.param != nullptr) {
                auto dst = n.param->ensure_grad();
                for (std::size_t k = 0; k < dst.size(); ++k) {
                    dst[k] += n.grad[k];
                }
            }
        }
    }

private:
    struct Node {
        Tensor<T> owned;
        const Tensor<T>* external = nullptr;
        Tensor<T>* param = nullptr;
        std::vector<T> grad;
        Backward backward;
        bool requires_grad = false;
    };

    static const Tensor<T>& node_value(const Node& n) { return n.external ? *n.external : n.owned; }

    std::span<T> node_grad(std::size_t id)
    {
        Node& n = nodes_[id];
        if (!n.requires_grad) {
            return {};
        }
        if (n.grad.empty()) {
            n.grad.assign(node_value(n).size(), T(0));
        }
        return n.grad;
    }

    Var append(Node n)
    {
        nodes_.push_back(std::move(n));
        return Var{nodes_.size() - 1};
    }

    Mode mode_;
    std::vector<Node> nodes_;
};

namespace ops {

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw ShapeError(what);
    }
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op)
{
    require(a.shape() == b.shape(), std::string(op) + ": shapes " + shape_string(a.shape()) +
                                        " and " + shape_string(b.shape()) + " differ");
}

template <class T>
void require_matrix(const Tensor<T>& a, const char* op)
{
    require(a.rank() == 2, std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

} // namespace detail

/// a[M x K] * b[K x N]
template <class T>
Var matmul(Tape<T>& tape, Var a, Var b)
{
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    detail::require_matrix(av, "matmul");
    detail::require_matrix(bv, "matmul");
    detail::require(av.dim(1) == bv.dim(0), "matmul: inner dimensions differ for " +
                                                shape_string(av.shape()) + " and " +
                                                shape_string(bv.shape()));
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor<T> out({m, n});
    kernel::gemm<T>(av.data(), bv.data(), out.data(), m, k, n);
    return tape.push(std::move(out), {a, b}, [a, b, m, k, n](Tape<T>& t, std::size_t self) {
        auto g = std::span<const T>(t.grad_at(self));
        if (auto ga = t.grad(a); !ga.empty()) {
            kernel::gemm_nt<T>(g, t.value(b).data(), ga, m, n, k, true);
        }
        if (auto gb = t.grad(b); !gb.empty()) {
            kernel::gemm_tn<T>(t.value(a).data(), g, gb, k, m, n, true);
        }
    });
}

/// a[M x K] * b[N x K]^T
template <class T>
Var matmul_nt(Tape<T>& tape, Var a, Var b)
{
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    detail::require_matrix(av, "matmul_nt");
    detail::require_matrix(bv, "matmul_nt");
    detail::require(av.dim(1) == bv.dim(1), "matmul_nt: inner dimensions differ for " +
                                                shape_string(av.shape()) + " and " +
                                                shape_string(bv.shape()) + "^T");
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
    Tensor<T> out({m, n});
    kernel::gemm_nt<T>(av.data(), bv.data(), out.data(), m, k, n);
    return tape.push(std::move(out), {a, b}, [a, b, m, k, n](Tape<T>& t, std::size_t self) {
        auto g = std::span<const T>(t.grad_at(self));
        if (auto ga = t.grad(a); !ga.empty()) {
            kernel::gemm<T>(g, t.value(b).data(), ga, m, n, k, true);
        }
        if (auto gb = t.grad(b); !gb.empty()) {
            kernel::gemm_tn<T>(g, t.value(a).data(), gb, n, m, k, true);
        }
    });
}

template <class T>
Var add(Tape<T>& tape, Var a, Var b)
{
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    detail::require_same_shape(av, bv, "add");
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += bv[i];
    }
    return tape.push(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
        auto g = t.grad_at(self);
        for (Var in : {a, b}) {
            if (auto gi = t.grad(in); !gi.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gi[i] += g[i];
                }
            }
        }
    });
}

/// Elementwise product.
template <class T>
Var mul(Tape<T>& tape, Var a, Var b)
{
    const Tensor<T>& av = tape.value(a);
    const Tensor<T>& bv = tape.value(b);
    detail::require_same_shape(av, bv, "mul");
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= bv[i];
    }
    return tape.push(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
        auto g = t.grad_at(self);
        if (auto ga = t.grad(a); !ga.empty()) {
            const auto& bv = t.value(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bv[i];
            }
        }
        if (auto gb = t.grad(b); !gb.empty()) {
            const auto& av = t.value(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += g[i] * av[i];
            }
        }
    });
}

template <class T>
Var sigmoid(Tape<T>& tape, Var a)
{
    Tensor<T> out = tape.value(a);
    for (auto& v : out.storage()) {
        v = kernel::sigmoid(v);
    }
    return tape.push(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
        auto g = t.grad_at(self);
        auto ga = t.grad(a);
        const auto& y = t.value_at(self);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * y[i] * (T(1) - y[i]);
        }
    });
}

/// Sum of all elements, as a 1-element tensor.
template <class T>
Var sum(Tape<T>& tape, Var a)
{
    const auto& av = tape.value(a);
    T s = T(0);
    for (T v : av.data()) {
        s += v;
    }
    return tape.push(Tensor<T>({1}, s), {a}, [a](Tape<T>& t, std::size_t self) {
        const T g = t.grad_at(self)[0];
        for (T& v : t.grad(a)) {
            v += g;
        }
    });
}

/// Each length-d row scaled by 1/sqrt(mean(x^2) + eps), then by gain.
template <class T>
Var rms_norm(Tape<T>& tape, Var x, Var gain, T eps = T(1e-6))
{
    const auto& xv = tape.value(x);
    const auto& gv = tape.value(gain);
    detail::require(xv.rank() >= 1 && xv.cols() >= 1, "rms_norm: empty feature dimension");
    detail::require(gv.size() == xv.cols(), "rms_norm: gain " + shape_string(gv.shape()) +
                                                " does not match rows of " +
                                                shape_string(xv.shape()));
    if (!(eps >= T(0))) {
        throw ConfigError("rms_norm: eps must be non-negative");
    }
    const std::size_t rows = xv.rows(), d = xv.cols();
    Tensor<T> out(xv.shape());
    std::vector<T> inv(rows);
    kernel::rms_norm_rows<T>(xv.data(), gv.data(), out.data(), rows, d, eps, inv);
    return tape.push(std::move(out), {x, gain},
                     [x, gain, rows, d, inv = std::move(inv)](Tape<T>& t, std::size_t self) {
                         auto g = t.grad_at(self);
                         const auto& xv = t.value(x);
                         const auto& gv = t.value(gain);
                         auto gx = t.grad(x);
                         auto gg = t.grad(gain);
                         for (std::size_t r = 0; r < rows; ++r) {
                             const T* xr = xv.data().data() + r * d;
                             const T* gr = g.data() + r * d;
                             // dot = sum_c g_c * gain_c * x_c
                             T dot = T(0);
                             for (std::size_t c = 0; c < d; ++c) {
                                 dot += gr[c] * gv[c] * xr[c];
                             }
                             const T s = inv[r];
                             const T coeff = s * s * s * dot / static_cast<T>(d);
                             for (std::size_t c = 0; c < d; ++c) {
                                 if (!gx.empty()) {
                                     gx[r * d + c] += gr[c] * gv[c] * s - xr[c] * coeff;
                                 }
                                 if (!gg.empty()) {
                                     gg[c] += gr[c] * xr[c] * s;
                                 }
                             }
                         }
                     });
}

/// Row-wise softmax over the last dimension.
template <class T>
Var softmax(Tape<T>& tape, Var logits)
{
    const auto& lv = tape.value(logits);
    detail::require(lv.cols() >= 1, "softmax: empty last dimension");
    const std::size_t rows = lv.rows(), v = lv.cols();
    Tensor<T> out(lv.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        kernel::softmax_row<T>(lv.data().subspan(r * v, v), out.data().subspan(r * v, v));
    }
    return tape.push(std::move(out), {logits}, [logits, rows, v](Tape<T>& t, std::size_t self) {
        auto g = t.grad_at(self);
        auto gl = t.grad(logits);
        const auto& y = t.value_at(self);
        for (std::size_t r = 0; r < rows; ++r) {
            T dot = T(0);
            for (std::size_t c = 0; c < v; ++c) {
                dot += g[r * v + c] * y[r * v + c];
            }
            for (std::size_t c = 0; c < v; ++c) {
                gl[r * v + c] += y[r * v + c] * (g[r * v + c] - dot);
            }
        }
    });
}

/// (x * w_value) elementwise sigmoid(x * w_gate).
template <class T>
Var glu(Tape<T>& tape, Var x, Var w_value, Var w_gate)
{
    return mul(tape, matmul(tape, x, w_value), sigmoid(tape, matmul(tape, x, w_gate)));
}

/// Rows of table selected by token id.
template <class T>
Var embedding(Tape<T>& tape, Var table, std::span<const std::int32_t> tokens)
{
    const auto& tv = tape.value(table);
    detail::require_matrix(tv, "embedding");
    const std::size_t vocab = tv.dim(0), d = tv.dim(1);
    Tensor<T> out({tokens.size(), d});
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= vocab) {
            throw InputError("token " + std::to_string(tokens[i]) + " at position " +
                             std::to_string(i) + " is outside the vocabulary of " +
                             std::to_string(vocab));
        }
        std::ranges::copy(tv.row(static_cast<std::size_t>(tokens[i])), out.row(i).begin());
    }
    std::vector<std::int32_t> ids(tokens.begin(), tokens.end());
    return tape.push(std::move(out), {table},
                     [table, d, ids = std::move(ids)](Tape<T>& t, std::size_t self) {
                         auto g = t.grad_at(self);
                         auto gt = t.grad(table);
                         for (std::size_t i = 0; i < ids.size(); ++i) {
                             T* dst = gt.data() + static_cast<std::size_t>(ids[i]) * d;
                             for (std::size_t c = 0; c < d; ++c) {
                                 dst[c] += g[i * d + c];
                             }
                         }
                     });
}

/// Row r of x rotated pairwise at position (first_position + r).
template <class T>
Var rotate_rows(Tape<T>& tape, Var x, std::size_t first_position, std::span<const double> thetas,
                bool conjugate)
{
    const auto& xv = tape.value(x);
    detail::require(xv.cols() == 2 * thetas.size(),
                    "rotate_rows: row width " + std::to_string(xv.cols()) +
                        " does not match 2 x " + std::to_string(thetas.size()) + " angles");
    Tensor<T> out = xv;
    const std::size_t rows = xv.rows();
    for (std::size_t r = 0; r < rows; ++r) {
        kernel::rotate_pairs<T>(out.row(r), static_cast<double>(first_position + r), thetas,
                                conjugate);
    }
    std::vector<double> th(thetas.begin(), thetas.end());
    return tape.push(std::move(out), {x},
                     [x, first_position, rows, conjugate, th = std::move(th)](Tape<T>& t,
                                                                              std::size_t self) {
                         const auto g = t.grad_at(self);
                         auto gx = t.grad(x);
                         const std::size_t d = g.size() / rows;
                         std::vector<T> tmp(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                             std::copy_n(g.data() + r * d, d, tmp.begin());
                             // A rotation's adjoint is its inverse.
                             kernel::rotate_pairs<T>(tmp, static_cast<double>(first_position + r),
                                                     th, !conjugate);
                             for (std::size_t c = 0; c < d; ++c) {
                                 gx[r * d + c] += tmp[c];
                             }
                         }
                     });
}

/// Column-wise concatenation of equal-height matrices.
template <class T>
Var concat_cols(Tape<T>& tape, std::span<const Var> parts)
{
    detail::require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t rows = tape.value(parts[0]).rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (Var p : parts) {
        const auto& pv = tape.value(p);
        detail::require(pv.rank() == 2 && pv.rows() == rows,
                        "concat_cols: mismatched part " + shape_string(pv.shape()));
        widths.push_back(pv.cols());
        total += pv.cols();
    }
    Tensor<T> out({rows, total});
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& pv = tape.value(parts[i]);
        for (std::size_t r = 0; r < rows; ++r) {
            std::ranges::copy(pv.row(r), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
        }
        offset += widths[i];
    }
    std::vector<Var> ins(parts.begin(), parts.end());
    return tape.push(std::move(out), std::span<const Var>(ins),
                     [ins, widths, rows, total](Tape<T>& t, std::size_t self) {
                         auto g = t.grad_at(self);
                         std::size_t offset = 0;
                         for (std::size_t i = 0; i < ins.size(); ++i) {
                             if (auto gi = t.grad(ins[i]); !gi.empty()) {
                                 for (std::size_t r = 0; r < rows; ++r) {
                                     for (std::size_t c = 0; c < widths[i]; ++c) {
                                         gi[r * widths[i] + c] += g[r * total + offset + c];
                                     }
                                 }
                             }
                             offset += widths[i];
                         }
                     });
}

/// Mean negative log-softmax probability of labels[i] over rows with
/// mask[i] set. Returns a 1-element tensor.
template <class T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const std::int32_t> labels,
                  std::span<const std::uint8_t> mask)
{
    const auto& lv = tape.value(logits);
    detail::require_matrix(lv, "cross_entropy");
    const std::size_t rows = lv.dim(0), v = lv.dim(1);
    detail::require(labels.size() == rows && mask.size() == rows,
                    "cross_entropy: " + std::to_string(rows) + " logit rows but " +
                        std::to_string(labels.size()) + " labels and " +
                        std::to_string(mask.size()) + " mask flags");
    std::size_t count = 0;
    for (auto m : mask) {
        count += m ? 1 : 0;
    }
    if (count == 0) {
        throw ContractError("cross_entropy: every position is masked out");
    }
    Tensor<T> probs({rows, v});
    T total = T(0);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!mask[r]) {
            continue;
        }
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= v) {
            throw InputError("cross_entropy: label " + std::to_string(labels[r]) +
                             " outside vocabulary of " + std::to_string(v));
        }
        auto p = probs.row(r);
        kernel::softmax_row<T>(lv.row(r), p);
        // log-sum-exp form keeps the loss finite for saturated rows.
        T mx = lv(r, 0);
        for (std::size_t c = 1; c < v; ++c) {
            mx = std::max(mx, lv(r, c));
        }
        T se = T(0);
        for (std::size_t c = 0; c < v; ++c) {
            se += std::exp(lv(r, c) - mx);
        }
        total += mx + std::log(se) - lv(r, static_cast<std::size_t>(labels[r]));
    }
    const T scale = T(1) / static_cast<T>(count);
    std::vector<std::int32_t> lab(labels.begin(), labels.end());
    std::vector<std::uint8_t> msk(mask.begin(), mask.end());
    return tape.push(Tensor<T>({1}, total * scale), {logits},
                     [logits, v, scale, probs = std::move(probs), lab = std::move(lab),
                      msk = std::move(msk)](Tape<T>& t, std::size_t self) {
                         const T g = t.grad_at(self)[0] * scale;
                         auto gl = t.grad(logits);
                         for (std::size_t r = 0; r < lab.size(); ++r) {
                             if (!msk[r]) {
                                 continue;
                             }
                             for (std::size_t c = 0; c < v; ++c) {
                                 gl[r * v + c] += g * probs(r, c);
                             }
                             gl[r * v + static_cast<std::size_t>(lab[r])] -= g;
                         }
                     });
}

} // namespace ops

} // namespace flashvid
