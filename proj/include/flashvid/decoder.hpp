// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flashvid/autodiff.hpp"
#include "flashvid/retention.hpp"
#include "flashvid/rng.hpp"

namespace flashvid {

using Token = std::int32_t;

struct DecoderConfig {
    std::size_t layers = 4;
    std::size_t vocab_size = 128;
    std::size_t d_model = 128;
    std::size_t ffn_hidden = 512;
    RetentionConfig retention = RetentionConfig::make(128, 4);
    std::size_t max_sequence_length = 4096;
    double rms_eps = 1e-6;

    void validate() const
    {
        if (layers == 0 || vocab_size == 0 || d_model == 0 || ffn_hidden == 0 ||
            max_sequence_length == 0) {
            throw ConfigError("decoder sizes must all be positive");
        }
        if (retention.d_model != d_model) {
            throw ConfigError("retention d_model " + std::to_string(retention.d_model) +
                              " differs from decoder d_model " + std::to_string(d_model));
        }
        if (!(rms_eps > 0.0)) {
            throw ConfigError("rms eps must be positive");
        }
        retention.validate();
    }

    bool operator==(const DecoderConfig&) const = default;
};

template <class T>
struct LayerWeights {
    RetentionWeights<T> retention;
    Tensor<T> retention_norm;  // [d_model]
    Tensor<T> ffn_norm;        // [d_model]
    Tensor<T> ffn_value;       // [d_model x ffn_hidden]
    Tensor<T> ffn_gate;        // [d_model x ffn_hidden]
    Tensor<T> ffn_down;        // [ffn_hidden x d_model]
};

template <class T>
struct ModelWeights {
    Tensor<T> embedding;  // [vocab x d_model]
    std::vector<LayerWeights<T>> layers;
    Tensor<T> final_norm;  // [d_model]
    Tensor<T> head;        // [d_model x vocab]

    /// Projections and embeddings ~ N(0, stddev^2); RMS gains = 1.
    static ModelWeights init(const DecoderConfig& cfg, std::uint64_t seed, double stddev = 0.02)
    {
        cfg.validate();
        SplitMix64 rng(seed);
        auto normal = [&](Shape s) {
            Tensor<T> t(std::move(s));
            for (auto& v : t.storage()) {
                v = static_cast<T>(stddev * rng.normal());
            }
            return t;
        };
        const std::size_t d = cfg.d_model, f = cfg.ffn_hidden, v = cfg.vocab_size;
        ModelWeights w;
        w.embedding = normal({v, d});
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            LayerWeights<T> lw;
            lw.retention = RetentionWeights<T>::random(cfg.retention, rng, stddev);
            lw.retention_norm = Tensor<T>::ones({d});
            lw.ffn_norm = Tensor<T>::ones({d});
            lw.ffn_value = normal({d, f});
            lw.ffn_gate = normal({d, f});
            lw.ffn_down = normal({f, d});
            w.layers.push_back(std::move(lw));
        }
        w.final_norm = Tensor<T>::ones({d});
        w.head = normal({d, v});
        return w;
    }

    /// Visits every parameter in a fixed canonical order (also the
    /// checkpoint order).
    template <class F>
    void for_each(F&& f)
    {
        f(embedding);
        for (auto& l : layers) {
            l.retention.for_each(f);
            f(l.retention_norm);
            f(l.ffn_norm);
            f(l.ffn_value);
            f(l.ffn_gate);
            f(l.ffn_down);
        }
        f(final_norm);
        f(head);
    }

    template <class F>
    void for_each(F&& f) const
    {
        const_cast<ModelWeights*>(this)->for_each(
            [&](Tensor<T>& t) { f(static_cast<const Tensor<T>&>(t)); });
    }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for_each([&](const Tensor<T>& t) { n += t.size(); });
        return n;
    }

    void zero_grad()
    {
        for_each([](Tensor<T>& t) { t.zero_grad(); });
    }

    void check(const DecoderConfig& cfg) const
    {
        const std::size_t d = cfg.d_model, f = cfg.ffn_hidden, v = cfg.vocab_size;
        auto expect = [](const Tensor<T>& t, const Shape& s, const char* name) {
            if (t.shape() != s) {
                throw ShapeError(std::string(name) + " has shape " + shape_string(t.shape()) +
                                 ", expected " + shape_string(s));
            }
        };
        expect(embedding, {v, d}, "embedding");
        if (layers.size() != cfg.layers) {
            throw ShapeError("weights hold " + std::to_string(layers.size()) +
                             " layers, config expects " + std::to_string(cfg.layers));
        }
        for (const auto& l : layers) {
            l.retention.check(cfg.retention);
            expect(l.retention_norm, {d}, "retention_norm");
            expect(l.ffn_norm, {d}, "ffn_norm");
            expect(l.ffn_value, {d, f}, "ffn_value");
            expect(l.ffn_gate, {d, f}, "ffn_gate");
            expect(l.ffn_down, {f, d}, "ffn_down");
        }
        expect(final_norm, {d}, "final_norm");
        expect(head, {d, v}, "head");
    }

    bool operator==(const ModelWeights& o) const
    {
        bool same = true;
        std::vector<const Tensor<T>*> mine, theirs;
        for_each([&](const Tensor<T>& t) { mine.push_back(&t); });
        o.for_each([&](const Tensor<T>& t) { theirs.push_back(&t); });
        if (mine.size() != theirs.size()) {
            return false;
        }
        for (std::size_t i = 0; i < mine.size() && same; ++i) {
            same = *mine[i] == *theirs[i];
        }
        return same;
    }
};

namespace detail {

struct LayerVars {
    RetentionVars retention;
    Var retention_norm, ffn_norm, ffn_value, ffn_gate, ffn_down;
};

struct ModelVars {
    Var embedding;
    std::vector<LayerVars> layers;
    Var final_norm, head;
};

template <class T, class W>
ModelVars bind_model(Tape<T>& tape, W& w)
{
    auto b = [&](auto& t) {
        if constexpr (std::is_const_v<std::remove_reference_t<decltype(t)>>) {
            return tape.constant_ref(t);
        } else {
            return tape.recording() ? tape.leaf(t) : tape.constant_ref(t);
        }
    };
    ModelVars v;
    v.embedding = b(w.embedding);
    for (auto& l : w.layers) {
        LayerVars lv;
        lv.retention = bind(tape, l.retention);
        lv.retention_norm = b(l.retention_norm);
        lv.ffn_norm = b(l.ffn_norm);
        lv.ffn_value = b(l.ffn_value);
        lv.ffn_gate = b(l.ffn_gate);
        lv.ffn_down = b(l.ffn_down);
        v.layers.push_back(lv);
    }
    v.final_norm = b(w.final_norm);
    v.head = b(w.head);
    return v;
}

inline void check_tokens(std::span<const Token> tokens, const DecoderConfig& cfg)
{
    if (tokens.empty()) {
        throw InputError("token sequence is empty");
    }
    if (tokens.size() > cfg.max_sequence_length) {
        throw InputError("sequence of " + std::to_string(tokens.size()) +
                         " tokens exceeds max_sequence_length " +
                         std::to_string(cfg.max_sequence_length));
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= cfg.vocab_size) {
            throw InputError("token " + std::to_string(tokens[i]) + " at position " +
                             std::to_string(i) + " is outside the vocabulary of " +
                             std::to_string(cfg.vocab_size));
        }
    }
}

} // namespace detail

/// Parallel (training) mode. Per layer, pre-normalized:
///   h <- h + Retention(RMS(h));  h <- h + GLU-FFN(RMS(h))
/// then a final RMS and the output head. Returns [L x vocab] logits.
///
/// Binds weights as trainable leaves when the tape records and `weights` is
/// mutable; otherwise as read-only constants.
template <class T, class W>
    requires std::is_same_v<std::remove_const_t<W>, ModelWeights<T>>
Var decoder_forward_parallel(Tape<T>& tape, std::span<const Token> tokens, W& weights,
                             const DecoderConfig& cfg)
{
    detail::check_tokens(tokens, cfg);
    const T eps = static_cast<T>(cfg.rms_eps);
    auto v = detail::bind_model(tape, weights);
    Var h = ops::embedding(tape, v.embedding, tokens);
    for (const auto& l : v.layers) {
        Var r = retention_parallel(tape, ops::rms_norm(tape, h, l.retention_norm, eps),
                                   l.retention, cfg.retention);
        h = ops::add(tape, h, r);
        Var x = ops::rms_norm(tape, h, l.ffn_norm, eps);
        Var f = ops::matmul(tape, ops::glu(tape, x, l.ffn_value, l.ffn_gate), l.ffn_down);
        h = ops::add(tape, h, f);
    }
    return ops::matmul(tape, ops::rms_norm(tape, h, v.final_norm, eps), v.head);
}

template <class T>
Tensor<T> decoder_forward_parallel(std::span<const Token> tokens, const ModelWeights<T>& weights,
                                   const DecoderConfig& cfg)
{
    Tape<T> tape(Tape<T>::Mode::inference);
    return tape.value(decoder_forward_parallel(tape, tokens, weights, cfg));
}

/// One RetentionState per layer.
template <class T>
struct LayerStates {
    std::vector<RetentionState<T>> layers;

    static LayerStates fresh(const DecoderConfig& cfg)
    {
        LayerStates s;
        s.layers.assign(cfg.layers, RetentionState<T>::fresh(cfg.retention));
        return s;
    }

    std::size_t position() const { return layers.empty() ? 0 : layers.front().position; }

    bool operator==(const LayerStates&) const = default;
};

/// Config plus weights, as loaded from a checkpoint.
template <class T>
struct Model {
    DecoderConfig config;
    ModelWeights<T> weights;
};

/// Recurrent (inference) mode: consumes one token and advances every layer's
/// state. With want_logits unset the final RMS and output head are skipped
/// and nothing is returned.
template <class T>
std::optional<std::vector<T>> decoder_step_recurrent(Token token, LayerStates<T>& states,
                                                     const ModelWeights<T>& w,
                                                     const DecoderConfig& cfg, bool want_logits)
{
    if (token < 0 || static_cast<std::size_t>(token) >= cfg.vocab_size) {
        throw InputError("token " + std::to_string(token) + " is outside the vocabulary of " +
                         std::to_string(cfg.vocab_size));
    }
    if (states.layers.size() != cfg.layers) {
        throw ShapeError("state holds " + std::to_string(states.layers.size()) +
                         " layers, config expects " + std::to_string(cfg.layers));
    }
    const std::size_t position = states.position();
    for (const auto& s : states.layers) {
        if (s.position != position) {
            throw ContractError("layer states are at inconsistent positions");
        }
    }
    const std::size_t d = cfg.d_model, f = cfg.ffn_hidden;
    const T eps = static_cast<T>(cfg.rms_eps);
    auto row = w.embedding.row(static_cast<std::size_t>(token));
    std::vector<T> h(row.begin(), row.end());
    std::vector<T> x(d), value(f), gate(f), ffn(d);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const auto& lw = w.layers[l];
        kernel::rms_norm_rows<T>(h, lw.retention_norm.data(), x, 1, d, eps);
        const auto r = retention_recurrent_step<T>(x, states.layers[l], lw.retention,
                                                   cfg.retention);
        for (std::size_t i = 0; i < d; ++i) {
            h[i] += r[i];
        }
        kernel::rms_norm_rows<T>(h, lw.ffn_norm.data(), x, 1, d, eps);
        kernel::gemm<T>(std::span<const T>(x), lw.ffn_value.data(), value, 1, d, f);
        kernel::gemm<T>(std::span<const T>(x), lw.ffn_gate.data(), gate, 1, d, f);
        for (std::size_t i = 0; i < f; ++i) {
            value[i] *= kernel::sigmoid(gate[i]);
        }
        kernel::gemm<T>(std::span<const T>(value), lw.ffn_down.data(), ffn, 1, f, d);
        for (std::size_t i = 0; i < d; ++i) {
            h[i] += ffn[i];
        }
    }
    if (!want_logits) {
        return std::nullopt;
    }
    std::vector<T> logits(cfg.vocab_size);
    kernel::rms_norm_rows<T>(h, w.final_norm.data(), x, 1, d, eps);
    kernel::gemm<T>(std::span<const T>(x), w.head.data(), logits, 1, d, cfg.vocab_size);
    return logits;
}

} // namespace flashvid
