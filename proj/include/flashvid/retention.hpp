// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flashvid/autodiff.hpp"
#include "flashvid/rng.hpp"
#include "flashvid/tensor.hpp"

namespace flashvid {

/// Multi-head retention geometry plus per-head decay and rotation angles.
struct RetentionConfig {
    std::size_t d_model = 0;
    std::size_t heads = 1;
    std::vector<double> gammas;  // one per head, each in (0, 1)
    std::vector<double> thetas;  // head_dim / 2 angles shared by all heads
    /// Per-position magnitude scaling of queries/keys (xpos). 0 disables it.
    double xpos_scale_base = 0.0;

    std::size_t head_dim() const { return heads == 0 ? 0 : d_model / heads; }

    /// Default schedule: gamma_h = 1 - 2^(-5-h), theta_j = 10000^(-2j/head_dim).
    /// A single_gamma overrides every head's decay.
    static RetentionConfig make(std::size_t d_model, std::size_t heads,
                                std::optional<double> single_gamma = std::nullopt)
    {
        RetentionConfig cfg;
        cfg.d_model = d_model;
        cfg.heads = heads;
        if (heads == 0 || d_model % heads != 0) {
            throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                              std::to_string(heads) + " heads");
        }
        const std::size_t hd = d_model / heads;
        if (hd % 2 != 0) {
            throw ConfigError("head_dim " + std::to_string(hd) + " must be even");
        }
        for (std::size_t h = 0; h < heads; ++h) {
            cfg.gammas.push_back(single_gamma ? *single_gamma
                                              : 1.0 - std::ldexp(1.0, -5 - static_cast<int>(h)));
        }
        for (std::size_t j = 0; j < hd / 2; ++j) {
            cfg.thetas.push_back(
                std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(hd)));
        }
        cfg.validate();
        return cfg;
    }

    void validate() const
    {
        if (heads == 0 || d_model == 0 || d_model % heads != 0) {
            throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                              std::to_string(heads) + " heads");
        }
        if (head_dim() % 2 != 0) {
            throw ConfigError("head_dim " + std::to_string(head_dim()) + " must be even");
        }
        if (gammas.size() != heads) {
            throw ConfigError("expected " + std::to_string(heads) + " decay values, got " +
                              std::to_string(gammas.size()));
        }
        for (double g : gammas) {
            if (!(g > 0.0 && g < 1.0)) {
                throw ConfigError("decay gamma " + std::to_string(g) + " is outside (0, 1)");
            }
        }
        if (thetas.size() != head_dim() / 2) {
            throw ConfigError("expected " + std::to_string(head_dim() / 2) +
                              " rotation angles, got " + std::to_string(thetas.size()));
        }
        if (xpos_scale_base < 0.0) {
            throw ConfigError("xpos scale base must be non-negative");
        }
    }

    bool operator==(const RetentionConfig&) const = default;
};

/// Lower-triangular decay: entries(n, m) = gamma^(n - m) for n >= m, else 0.
template <class T>
struct DecayMatrix {
    std::size_t length = 0;
    double gamma = 0.0;
    Tensor<T> entries;
};

template <class T>
DecayMatrix<T> decay_matrix(std::size_t length, double gamma)
{
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw ConfigError("decay gamma " + std::to_string(gamma) + " is outside (0, 1)");
    }
    if (length == 0) {
        throw ConfigError("decay matrix length must be at least 1");
    }
    std::vector<T> powers(length);
    for (std::size_t k = 0; k < length; ++k) {
        powers[k] = static_cast<T>(std::pow(gamma, static_cast<double>(k)));
    }
    DecayMatrix<T> d{length, gamma, Tensor<T>({length, length})};
    for (std::size_t n = 0; n < length; ++n) {
        for (std::size_t m = 0; m <= n; ++m) {
            d.entries(n, m) = powers[n - m];
        }
    }
    return d;
}

/// Pairwise rotation of x by position * theta (negated for the conjugate).
template <class T>
std::vector<T> rotate(std::span<const T> x, std::size_t position, std::span<const double> thetas,
                      bool conjugate)
{
    if (x.size() % 2 != 0) {
        throw ConfigError("cannot rotate an odd-length vector of size " + std::to_string(x.size()));
    }
    if (x.size() != 2 * thetas.size()) {
        throw ShapeError("vector of size " + std::to_string(x.size()) + " needs " +
                         std::to_string(x.size() / 2) + " angles, got " +
                         std::to_string(thetas.size()));
    }
    std::vector<T> out(x.begin(), x.end());
    kernel::rotate_pairs<T>(std::span<T>(out), static_cast<double>(position), thetas, conjugate);
    return out;
}

namespace detail {

/// xpos magnitude of pair j at a position: zeta_j^(position / base), with
/// zeta_j = (2j / head_dim + 0.4) / 1.4. Queries take the factor, keys its inverse.
inline double xpos_factor(std::size_t j, std::size_t head_dim, double position, double base,
                          bool inverse)
{
    const double zeta =
        (2.0 * static_cast<double>(j) / static_cast<double>(head_dim) + 0.4) / 1.4;
    const double e = position / base;
    return std::pow(zeta, inverse ? -e : e);
}

template <class T>
void xpos_scale(std::span<T> x, std::size_t position, double base, bool inverse)
{
    const std::size_t hd = x.size();
    for (std::size_t j = 0; j < hd / 2; ++j) {
        const T f =
            static_cast<T>(xpos_factor(j, hd, static_cast<double>(position), base, inverse));
        x[2 * j] *= f;
        x[2 * j + 1] *= f;
    }
}

template <class T>
Var xpos_rows(Tape<T>& tape, Var x, std::size_t first_position, double base, bool inverse)
{
    Tensor<T> out = tape.value(x);
    const std::size_t rows = out.rows();
    for (std::size_t r = 0; r < rows; ++r) {
        xpos_scale<T>(out.row(r), first_position + r, base, inverse);
    }
    return tape.push(std::move(out), {x},
                     [x, rows, first_position, base, inverse](Tape<T>& t, std::size_t self) {
                         auto g = t.grad_at(self);
                         auto gx = t.grad(x);
                         const std::size_t d = g.size() / rows;
                         std::vector<T> tmp(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                             std::copy_n(g.data() + r * d, d, tmp.begin());
                             xpos_scale<T>(std::span<T>(tmp), first_position + r, base, inverse);
                             for (std::size_t c = 0; c < d; ++c) {
                                 gx[r * d + c] += tmp[c];
                             }
                         }
                     });
}

} // namespace detail

/// Per-head projections plus the shared output projection.
template <class T>
struct RetentionWeights {
    std::vector<Tensor<T>> wq;  // heads x [d_model x head_dim]
    std::vector<Tensor<T>> wk;
    std::vector<Tensor<T>> wv;
    Tensor<T> wo;               // [d_model x d_model]

    static RetentionWeights zeros(const RetentionConfig& cfg)
    {
        RetentionWeights w;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            w.wq.emplace_back(Shape{cfg.d_model, cfg.head_dim()});
            w.wk.emplace_back(Shape{cfg.d_model, cfg.head_dim()});
            w.wv.emplace_back(Shape{cfg.d_model, cfg.head_dim()});
        }
        w.wo = Tensor<T>({cfg.d_model, cfg.d_model});
        return w;
    }

    static RetentionWeights random(const RetentionConfig& cfg, SplitMix64& rng, double stddev)
    {
        RetentionWeights w = zeros(cfg);
        w.for_each([&](Tensor<T>& t) {
            for (auto& v : t.storage()) {
                v = static_cast<T>(stddev * rng.normal());
            }
        });
        return w;
    }

    template <class F>
    void for_each(F&& f)
    {
        for (std::size_t h = 0; h < wq.size(); ++h) {
            f(wq[h]);
            f(wk[h]);
            f(wv[h]);
        }
        f(wo);
    }

    template <class F>
    void for_each(F&& f) const
    {
        for (std::size_t h = 0; h < wq.size(); ++h) {
            f(wq[h]);
            f(wk[h]);
            f(wv[h]);
        }
        f(wo);
    }

    void check(const RetentionConfig& cfg) const
    {
        const Shape proj{cfg.d_model, cfg.head_dim()};
        bool ok = wq.size() == cfg.heads && wk.size() == cfg.heads && wv.size() == cfg.heads &&
                  wo.shape() == Shape{cfg.d_model, cfg.d_model};
        for (std::size_t h = 0; ok && h < cfg.heads; ++h) {
            ok = wq[h].shape() == proj && wk[h].shape() == proj && wv[h].shape() == proj;
        }
        if (!ok) {
            throw ShapeError("retention weights do not conform to d_model " +
                             std::to_string(cfg.d_model) + " with " + std::to_string(cfg.heads) +
                             " heads");
        }
    }
};

/// Tape handles for a RetentionWeights instance.
struct RetentionVars {
    std::vector<Var> wq, wk, wv;
    Var wo;
};

/// Trainable binding: gradients flow into the weights' grad buffers.
template <class T>
RetentionVars bind(Tape<T>& tape, RetentionWeights<T>& w)
{
    RetentionVars v;
    for (std::size_t h = 0; h < w.wq.size(); ++h) {
        v.wq.push_back(tape.leaf(w.wq[h]));
        v.wk.push_back(tape.leaf(w.wk[h]));
        v.wv.push_back(tape.leaf(w.wv[h]));
    }
    v.wo = tape.leaf(w.wo);
    return v;
}

template <class T>
RetentionVars bind(Tape<T>& tape, const RetentionWeights<T>& w)
{
    RetentionVars v;
    for (std::size_t h = 0; h < w.wq.size(); ++h) {
        v.wq.push_back(tape.constant_ref(w.wq[h]));
        v.wk.push_back(tape.constant_ref(w.wk[h]));
        v.wv.push_back(tape.constant_ref(w.wv[h]));
    }
    v.wo = tape.constant_ref(w.wo);
    return v;
}

/// Parallel form over an [L x d_model] block: per head (Q K^T .* D) V, heads
/// concatenated and projected by W_o. Row n only sees rows <= n.
///
/// Queries and keys are rotated in the same direction. On real pairs the dot
/// product q . k is Re(q conj(k)) of the complex encoding, so the conjugate on
/// the key side of the complex formulation is carried by that product and the
/// score depends only on n - m.
template <class T>
Var retention_parallel(Tape<T>& tape, Var x, const RetentionVars& w, const RetentionConfig& cfg)
{
    const auto& xv = tape.value(x);
    if (xv.rank() != 2 || xv.cols() != cfg.d_model || xv.rows() == 0) {
        throw ShapeError("retention input " + shape_string(xv.shape()) + " is not [L x " +
                         std::to_string(cfg.d_model) + "]");
    }
    const std::size_t length = xv.rows();
    std::vector<Var> heads;
    heads.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        Var q = ops::rotate_rows(tape, ops::matmul(tape, x, w.wq[h]), 0, cfg.thetas, false);
        Var k = ops::rotate_rows(tape, ops::matmul(tape, x, w.wk[h]), 0, cfg.thetas, false);
        if (cfg.xpos_scale_base > 0.0) {
            q = detail::xpos_rows(tape, q, 0, cfg.xpos_scale_base, false);
            k = detail::xpos_rows(tape, k, 0, cfg.xpos_scale_base, true);
        }
        Var v = ops::matmul(tape, x, w.wv[h]);
        Var d = tape.constant(decay_matrix<T>(length, cfg.gammas[h]).entries);
        Var scores = ops::mul(tape, ops::matmul_nt(tape, q, k), d);
        heads.push_back(ops::matmul(tape, scores, v));
    }
    Var cat = cfg.heads == 1 ? heads[0] : ops::concat_cols(tape, std::span<const Var>(heads));
    return ops::matmul(tape, cat, w.wo);
}

/// Convenience evaluation without gradients.
template <class T>
Tensor<T> retention_parallel(const Tensor<T>& x, const RetentionWeights<T>& w,
                             const RetentionConfig& cfg)
{
    w.check(cfg);
    Tape<T> tape(Tape<T>::Mode::inference);
    Var xv = tape.constant_ref(x);
    return tape.value(retention_parallel(tape, xv, bind(tape, w), cfg));
}

/// Recurrent carrier: one head_dim x head_dim matrix per head and the index of
/// the next position to consume. Its size never depends on the position.
template <class T>
struct RetentionState {
    std::vector<Tensor<T>> s;
    std::size_t position = 0;

    static RetentionState fresh(const RetentionConfig& cfg)
    {
        RetentionState st;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            st.s.emplace_back(Shape{cfg.head_dim(), cfg.head_dim()});
        }
        return st;
    }

    std::size_t bytes() const
    {
        std::size_t b = sizeof(*this);
        for (const auto& m : s) {
            b += m.size() * sizeof(T);
        }
        return b;
    }

    bool operator==(const RetentionState&) const = default;
};

/// Consumes x_n at state.position: S <- gamma S + k_n^T v_n, y_n = q_n S,
/// heads concatenated through W_o. Advances the position; cost is
/// independent of it.
template <class T>
std::vector<T> retention_recurrent_step(std::span<const T> x, RetentionState<T>& state,
                                        const RetentionWeights<T>& w, const RetentionConfig& cfg)
{
    if (x.size() != cfg.d_model) {
        throw ShapeError("retention step input of size " + std::to_string(x.size()) +
                         " does not match d_model " + std::to_string(cfg.d_model));
    }
    if (state.s.size() != cfg.heads) {
        throw ShapeError("retention state has " + std::to_string(state.s.size()) +
                         " heads, config has " + std::to_string(cfg.heads));
    }
    const std::size_t d = cfg.d_model, hd = cfg.head_dim();
    const std::size_t n = state.position;
    std::vector<T> q(hd), k(hd), v(hd), cat(d), y(d);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        kernel::gemm<T>(x, w.wq[h].data(), q, 1, d, hd);
        kernel::gemm<T>(x, w.wk[h].data(), k, 1, d, hd);
        kernel::gemm<T>(x, w.wv[h].data(), v, 1, d, hd);
        kernel::rotate_pairs<T>(std::span<T>(q), static_cast<double>(n), cfg.thetas, false);
        kernel::rotate_pairs<T>(std::span<T>(k), static_cast<double>(n), cfg.thetas, false);
        if (cfg.xpos_scale_base > 0.0) {
            detail::xpos_scale<T>(std::span<T>(q), n, cfg.xpos_scale_base, false);
            detail::xpos_scale<T>(std::span<T>(k), n, cfg.xpos_scale_base, true);
        }
        auto s = kernel::view(state.s[h].data(), hd, hd);
        s *= static_cast<T>(cfg.gammas[h]);
        s.noalias() += kernel::view(std::span<const T>(k), hd, 1) *
                       kernel::view(std::span<const T>(v), 1, hd);
        kernel::gemm<T>(std::span<const T>(q), state.s[h].data(),
                        std::span<T>(cat).subspan(h * hd, hd), 1, hd, hd);
    }
    kernel::gemm<T>(std::span<const T>(cat), w.wo.data(), std::span<T>(y), 1, d, d);
    ++state.position;
    return y;
}

} // namespace flashvid
