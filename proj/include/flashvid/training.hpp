// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "flashvid/autodiff.hpp"
#include "flashvid/decoder.hpp"
#include "flashvid/rng.hpp"
#include "flashvid/sequencer.hpp"

namespace flashvid {

struct MotionClass {
    std::string name;
    int dr = 0;  // rows per frame
    int dc = 0;  // columns per frame
};

inline std::vector<MotionClass> default_motion_classes()
{
    return {{"right", 0, 1}, {"left", 0, -1}, {"down", 1, 0}, {"up", -1, 0}, {"diagonal", 1, 1}};
}

struct SyntheticDatasetSpec {
    std::size_t rows = 8;
    std::size_t cols = 8;
    std::vector<MotionClass> classes = default_motion_classes();
    std::size_t frames_per_clip = 4;
    std::size_t clips_per_class = 8;
    std::size_t sprite_size = 2;                  // square, in tokens
    Token background = 0;                         // codebook-local
    std::vector<Token> sprite = {63, 48, 12, 51}; // sprite_size^2 distinct tokens
    std::uint64_t seed = 1;

    void validate() const
    {
        if (sprite_size == 0 || sprite_size > rows || sprite_size > cols) {
            throw ConfigError("sprite of " + std::to_string(sprite_size) + " tokens does not fit a " +
                              std::to_string(rows) + "x" + std::to_string(cols) + " grid");
        }
        if (frames_per_clip < 2) {
            throw ConfigError("clips need at least 2 frames");
        }
        if (classes.empty()) {
            throw ConfigError("at least one motion class is required");
        }
        if (sprite.size() != sprite_size * sprite_size) {
            throw ConfigError("sprite needs " + std::to_string(sprite_size * sprite_size) +
                              " tokens, got " + std::to_string(sprite.size()));
        }
        for (std::size_t i = 0; i < sprite.size(); ++i) {
            if (sprite[i] == background) {
                throw ConfigError("sprite token equals the background token");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (sprite[i] == sprite[j]) {
                    throw ConfigError("sprite tokens must be distinct");
                }
            }
        }
    }
};

struct SpriteMotion {
    int row = 0, col = 0;  // top-left origin
    int dr = 0, dc = 0;

    bool operator==(const SpriteMotion&) const = default;
};

/// One frame of motion with reflective bounds: a velocity component that would
/// carry the sprite out of [0, max] is negated before moving.
inline SpriteMotion step_sprite(SpriteMotion m, int max_row, int max_col)
{
    if (m.row + m.dr < 0 || m.row + m.dr > max_row) {
        m.dr = -m.dr;
    }
    if (m.col + m.dc < 0 || m.col + m.dc > max_col) {
        m.dc = -m.dc;
    }
    m.row += m.dr;
    m.col += m.dc;
    return m;
}

inline FrameGrid render_sprite(const SyntheticDatasetSpec& spec, int row, int col)
{
    FrameGrid g(spec.rows, spec.cols, spec.background);
    for (std::size_t r = 0; r < spec.sprite_size; ++r) {
        for (std::size_t c = 0; c < spec.sprite_size; ++c) {
            g.at(static_cast<std::size_t>(row) + r, static_cast<std::size_t>(col) + c) =
                spec.sprite[r * spec.sprite_size + c];
        }
    }
    return g;
}

struct Clip {
    std::size_t label = 0;
    std::vector<Token> text;
    std::vector<FrameGrid> frames;
    std::vector<SpriteMotion> motion;  // per frame
};

/// Deterministic moving-sprite clips, clips_per_class per class, class-major
/// order. Start origins are uniform over valid positions.
inline std::vector<Clip> generate_dataset(const SyntheticDatasetSpec& spec,
                                          const VocabLayout& layout)
{
    spec.validate();
    if (spec.classes.size() > layout.text_count) {
        throw ConfigError(std::to_string(spec.classes.size()) + " classes exceed the " +
                          std::to_string(layout.text_count) + " text labels");
    }
    SplitMix64 rng(spec.seed);
    const int max_row = static_cast<int>(spec.rows - spec.sprite_size);
    const int max_col = static_cast<int>(spec.cols - spec.sprite_size);
    std::vector<Clip> clips;
    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
        for (std::size_t i = 0; i < spec.clips_per_class; ++i) {
            Clip clip;
            clip.label = k;
            clip.text = {layout.text(k)};
            SpriteMotion m;
            m.row = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_row) + 1));
            m.col = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_col) + 1));
            m.dr = spec.classes[k].dr;
            m.dc = spec.classes[k].dc;
            for (std::size_t f = 0; f < spec.frames_per_clip; ++f) {
                if (f > 0) {
                    m = step_sprite(m, max_row, max_col);
                }
                clip.frames.push_back(render_sprite(spec, m.row, m.col));
                clip.motion.push_back(m);
            }
            clips.push_back(std::move(clip));
        }
    }
    return clips;
}

/// Key-frame sequence for every clip, plus an interpolation-task sequence
/// when requested and the clip has at least 3 frames.
inline std::vector<TrainingSequence> training_sequences(std::span<const Clip> clips,
                                                        const Sequencer& sequencer,
                                                        bool interpolation_tasks)
{
    std::vector<TrainingSequence> out;
    for (const auto& c : clips) {
        out.push_back(sequencer.build_training_sequence(c.text, c.frames));
        if (interpolation_tasks && c.frames.size() >= 3) {
            out.push_back(sequencer.build_interpolation_training_sequence(c.text, c.frames));
        }
    }
    return out;
}

/// Centroid of the non-background cells, or nullopt when there are none.
inline std::optional<std::pair<double, double>> sprite_centroid(const FrameGrid& g,
                                                                Token background)
{
    double r = 0, c = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.rows; ++i) {
        for (std::size_t j = 0; j < g.cols; ++j) {
            if (g.at(i, j) != background) {
                r += static_cast<double>(i);
                c += static_cast<double>(j);
                ++n;
            }
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return std::pair{r / static_cast<double>(n), c / static_cast<double>(n)};
}

template <class T>
T cross_entropy(const Tensor<T>& logits, std::span<const Token> labels,
                std::span<const std::uint8_t> mask)
{
    Tape<T> tape(Tape<T>::Mode::inference);
    return tape.value(ops::cross_entropy(tape, tape.constant_ref(logits), labels, mask))[0];
}

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 8;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    std::uint64_t seed = 1;

    void validate() const
    {
        if (epochs == 0 || batch_size == 0 || !(learning_rate > 0) || !(adam_eps > 0) ||
            !(clip_norm > 0)) {
            throw ConfigError("training epochs, batch size, learning rate, eps and clip norm "
                              "must be positive");
        }
        if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) {
            throw ConfigError("Adam betas must lie in (0, 1)");
        }
    }
};

/// Adam with bias correction.
template <class T>
class Adam {
public:
    Adam(const TrainConfig& cfg, const ModelWeights<T>& w) : cfg_(cfg)
    {
        w.for_each([&](const Tensor<T>& t) {
            m_.emplace_back(t.size(), 0.0);
            v_.emplace_back(t.size(), 0.0);
        });
    }

    void step(ModelWeights<T>& w)
    {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        std::size_t i = 0;
        w.for_each([&](Tensor<T>& p) {
            auto& m = m_[i];
            auto& v = v_[i];
            ++i;
            if (!p.has_grad()) {
                return;
            }
            auto g = p.grad();
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double gk = static_cast<double>(g[k]);
                m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
                v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
                const double update =
                    cfg_.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.adam_eps);
                p[k] = static_cast<T>(static_cast<double>(p[k]) - update);
            }
        });
    }

    std::uint64_t steps() const { return t_; }

private:
    TrainConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <class T>
double clip_gradients(ModelWeights<T>& w, double max_norm)
{
    double sq = 0.0;
    w.for_each([&](const Tensor<T>& t) {
        for (T g : t.grad()) {
            sq += static_cast<double>(g) * static_cast<double>(g);
        }
    });
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const T scale = static_cast<T>(max_norm / norm);
        w.for_each([&](Tensor<T>& t) {
            for (T& g : t.grad()) {
                g *= scale;
            }
        });
    }
    return norm;
}

/// Masked teacher-forcing loss of one sequence; accumulates d(loss * weight)
/// into the model's grad buffers.
template <class T>
T sequence_loss_and_grad(ModelWeights<T>& w, const DecoderConfig& cfg,
                         const TrainingSequence& seq, T weight)
{
    Tape<T> tape;
    Var logits = decoder_forward_parallel(tape, std::span<const Token>(seq.input), w, cfg);
    Var loss = ops::cross_entropy(tape, logits, seq.labels, seq.mask);
    const T value = tape.value(loss)[0];
    if (weight != T(1)) {
        loss = ops::mul(tape, loss, tape.constant(Tensor<T>({1}, weight)));
    }
    tape.backward(loss);
    return value;
}

template <class T>
T sequence_loss(const ModelWeights<T>& w, const DecoderConfig& cfg, const TrainingSequence& seq)
{
    const auto logits = decoder_forward_parallel(std::span<const Token>(seq.input), w, cfg);
    return cross_entropy(logits, seq.labels, seq.mask);
}

struct TrainResult {
    std::vector<double> loss_history;  // mean masked loss per epoch
    std::uint64_t steps = 0;
};

/// Epoch callback: (epoch, mean loss). Returning false stops training early.
using EpochCallback = std::function<bool(std::size_t, double)>;

/// Teacher-forced training in parallel mode. Sequences are visited in a
/// seeded shuffle each epoch; each batch takes one clipped Adam step on the
/// batch-mean loss. The epoch loss is the mean of the per-sequence losses
/// observed during that epoch.
template <class T>
TrainResult train(ModelWeights<T>& w, const DecoderConfig& cfg,
                  std::span<const TrainingSequence> data, const TrainConfig& tc,
                  const EpochCallback& on_epoch = {})
{
    tc.validate();
    cfg.validate();
    w.check(cfg);
    if (data.empty()) {
        throw InputError("training set is empty");
    }
    for (const auto& s : data) {
        if (s.input.size() > cfg.max_sequence_length) {
            throw InputError("training sequence of " + std::to_string(s.input.size()) +
                             " tokens exceeds max_sequence_length " +
                             std::to_string(cfg.max_sequence_length));
        }
    }
    w.for_each([](Tensor<T>& t) { t.ensure_grad(); });
    Adam<T> adam(tc, w);
    SplitMix64 rng(tc.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t end = std::min(order.size(), start + tc.batch_size);
            const T weight = T(1) / static_cast<T>(end - start);
            w.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                T loss;
                try {
                    loss = sequence_loss_and_grad(w, cfg, data[order[b]], weight);
                } catch (const NumericError& e) {
                    throw TrainingError("diverged in epoch " + std::to_string(epoch) + " (" +
                                        e.what() + ")");
                }
                if (!std::isfinite(static_cast<double>(loss))) {
                    throw TrainingError("non-finite loss in epoch " + std::to_string(epoch));
                }
                epoch_loss += static_cast<double>(loss);
            }
            clip_gradients(w, tc.clip_norm);
            adam.step(w);
        }
        epoch_loss /= static_cast<double>(order.size());
        result.loss_history.push_back(epoch_loss);
        if (on_epoch && !on_epoch(epoch, epoch_loss)) {
            break;
        }
    }
    result.steps = adam.steps();
    w.for_each([](Tensor<T>& t) { t.drop_grad(); });
    return result;
}

} // namespace flashvid
