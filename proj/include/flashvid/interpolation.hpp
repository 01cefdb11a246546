// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "flashvid/decoder.hpp"
#include "flashvid/rng.hpp"
#include "flashvid/sequencer.hpp"

namespace flashvid {

enum class TokenClass : std::uint8_t { different, unstable, stable, inheritable };

inline char class_char(TokenClass c)
{
    switch (c) {
    case TokenClass::different:
        return 'D';
    case TokenClass::unstable:
        return 'U';
    case TokenClass::stable:
        return 'S';
    case TokenClass::inheritable:
        return 'I';
    }
    return '?';
}

/// Per-position classification of an intermediate frame. Inheritable
/// positions are a subset of the stable ones and carry the value to copy.
struct TokenClassMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<TokenClass> classes;
    std::map<std::size_t, Token> inherited;  // row-major position -> token

    TokenClass at(std::size_t r, std::size_t c) const { return classes[r * cols + c]; }

    std::size_t count(TokenClass c) const
    {
        return static_cast<std::size_t>(std::ranges::count(classes, c));
    }

    /// Stable in the wide sense: stable or inheritable.
    std::size_t stable_count() const
    {
        return count(TokenClass::stable) + count(TokenClass::inheritable);
    }

    bool is_inheritable(std::size_t pos) const
    {
        return classes[pos] == TokenClass::inheritable;
    }

    /// One row per line using D/U/S/I.
    std::string dump() const
    {
        std::string out;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                out.push_back(class_char(at(r, c)));
            }
            out.push_back('\n');
        }
        return out;
    }
};

struct InterpolationPolicy {
    double inherit_fraction = 0.2;
    std::size_t dilation_radius = 1;
    std::uint64_t rng_seed = 0;

    void validate() const
    {
        if (!(inherit_fraction >= 0.0 && inherit_fraction <= 1.0)) {
            throw ConfigError("inherit fraction " + std::to_string(inherit_fraction) +
                              " is outside [0, 1]");
        }
    }
};

/// Different: tokens that differ between the key frames. Unstable: the
/// Chebyshev-radius dilation of Different, minus Different. Stable: the rest.
/// floor(rho * |Stable|) stable positions, drawn uniformly with the policy
/// seed, become Inheritable with key_a's value.
inline TokenClassMap classify_tokens(const FrameGrid& key_a, const FrameGrid& key_b,
                                     const InterpolationPolicy& policy)
{
    policy.validate();
    if (!key_a.same_shape(key_b)) {
        throw ShapeError("key frames " + std::to_string(key_a.rows) + "x" +
                         std::to_string(key_a.cols) + " and " + std::to_string(key_b.rows) + "x" +
                         std::to_string(key_b.cols) + " differ in shape");
    }
    TokenClassMap map;
    map.rows = key_a.rows;
    map.cols = key_a.cols;
    map.classes.assign(key_a.size(), TokenClass::stable);

    const auto rows = static_cast<std::ptrdiff_t>(map.rows);
    const auto cols = static_cast<std::ptrdiff_t>(map.cols);
    const auto radius = static_cast<std::ptrdiff_t>(policy.dilation_radius);
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        for (std::ptrdiff_t c = 0; c < cols; ++c) {
            const auto pos = static_cast<std::size_t>(r * cols + c);
            if (key_a.tokens[pos] == key_b.tokens[pos]) {
                continue;
            }
            map.classes[pos] = TokenClass::different;
            for (std::ptrdiff_t dr = -radius; dr <= radius; ++dr) {
                for (std::ptrdiff_t dc = -radius; dc <= radius; ++dc) {
                    const auto rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) {
                        continue;
                    }
                    auto& cls = map.classes[static_cast<std::size_t>(rr * cols + cc)];
                    if (cls == TokenClass::stable) {
                        cls = TokenClass::unstable;
                    }
                }
            }
        }
    }

    std::vector<std::size_t> stable;
    for (std::size_t pos = 0; pos < map.classes.size(); ++pos) {
        if (map.classes[pos] == TokenClass::stable) {
            stable.push_back(pos);
        }
    }
    const auto picks = static_cast<std::size_t>(
        std::floor(policy.inherit_fraction * static_cast<double>(stable.size())));
    SplitMix64 rng(policy.rng_seed);
    for (std::size_t i = 0; i < picks; ++i) {
        const std::size_t j = i + rng.below(stable.size() - i);
        std::swap(stable[i], stable[j]);
        map.classes[stable[i]] = TokenClass::inheritable;
        map.inherited.emplace(stable[i], key_a.tokens[stable[i]]);
    }
    return map;
}

/// Picks the next vision token from logits restricted to the vision range.
/// temperature 0 means greedy (ties to the lowest index).
class Sampler {
public:
    explicit Sampler(double temperature = 1.0, std::uint64_t seed = 0)
        : temperature_(temperature), seed_(seed), rng_(seed)
    {
        if (temperature < 0.0) {
            throw ConfigError("sampling temperature must be non-negative");
        }
    }

    static Sampler greedy() { return Sampler(0.0, 0); }

    template <class T>
    Token sample_vision(std::span<const T> logits, const VocabLayout& layout)
    {
        const auto lo = layout.vision_base();
        const auto n = layout.vision_count;
        if (logits.size() < lo + n) {
            throw ConfigError("logits of size " + std::to_string(logits.size()) +
                              " do not cover the vision range");
        }
        const auto vision = logits.subspan(lo, n);
        if (temperature_ == 0.0) {
            return static_cast<Token>(std::ranges::max_element(vision) - vision.begin());
        }
        std::vector<double> p(n);
        const double mx = static_cast<double>(*std::ranges::max_element(vision));
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = std::exp((static_cast<double>(vision[i]) - mx) / temperature_);
            total += p[i];
        }
        double u = rng_.uniform() * total;
        for (std::size_t i = 0; i < n; ++i) {
            u -= p[i];
            if (u < 0.0) {
                return static_cast<Token>(i);
            }
        }
        return static_cast<Token>(n - 1);
    }

    double temperature() const { return temperature_; }
    std::uint64_t seed() const { return seed_; }

private:
    double temperature_;
    std::uint64_t seed_;
    SplitMix64 rng_;
};

struct InterpolationStats {
    std::vector<std::size_t> generated_per_frame;  // sampled tokens, in generation order
    std::vector<std::size_t> inherited_per_frame;
    TokenClassMap classes;
};

namespace detail {

inline void check_vocab(const DecoderConfig& cfg, const VocabLayout& layout)
{
    if (cfg.vocab_size != layout.vocab_size()) {
        throw ConfigError("model vocabulary " + std::to_string(cfg.vocab_size) +
                          " does not match the sequencer layout of " +
                          std::to_string(layout.vocab_size()));
    }
}

template <class T>
void feed(std::span<const Token> tokens, LayerStates<T>& states, const Model<T>& model)
{
    for (Token t : tokens) {
        decoder_step_recurrent(t, states, model.weights, model.config, false);
    }
}

} // namespace detail

/// Generates K intermediate frames between two key frames in recurrent mode.
/// Inheritable positions are injected without computing logits or sampling;
/// the state still consumes them so the sequence stays contiguous.
/// Returns the K frames in temporal order.
template <class T>
std::vector<FrameGrid> interpolate_between(const FrameGrid& key_a, const FrameGrid& key_b,
                                           std::size_t k, const Model<T>& model,
                                           const InterpolationPolicy& policy,
                                           const Sequencer& sequencer,
                                           std::span<const Token> text, Sampler& sampler,
                                           InterpolationStats* stats = nullptr)
{
    detail::check_vocab(model.config, sequencer.layout());
    const auto& layout = sequencer.layout();
    SequencePlan plan = sequencer.build_interpolation_prompt(text, key_a, key_b, k);
    const TokenClassMap classes = classify_tokens(key_a, key_b, policy);
    const std::size_t cells = key_a.size();

    auto states = LayerStates<T>::fresh(model.config);
    detail::feed<T>(plan.tokens, states, model);
    if (stats) {
        stats->classes = classes;
    }

    for (std::size_t j = 1; j <= k; ++j) {
        const std::size_t header_start = plan.tokens.size();
        sequencer.append_header(plan, text, j + 1);
        const std::span<const Token> header(plan.tokens.data() + header_start,
                                            plan.tokens.size() - header_start);
        detail::feed<T>(header.first(header.size() - 1), states, model);

        FrameGrid frame(key_a.rows, key_a.cols);
        std::size_t generated = 0;
        Token previous = header.back();
        for (std::size_t p = 0; p < cells; ++p) {
            const bool inherit = classes.is_inheritable(p);
            auto logits = decoder_step_recurrent(previous, states, model.weights, model.config,
                                                 !inherit);
            if (inherit) {
                frame.tokens[p] = classes.inherited.at(p);
            } else {
                frame.tokens[p] = sampler.sample_vision<T>(*logits, layout);
                ++generated;
            }
            previous = layout.vision(frame.tokens[p]);
        }
        // The frame's last token is consumed along with the next header.
        if (j < k) {
            decoder_step_recurrent(previous, states, model.weights, model.config, false);
        }
        sequencer.append_frame_tokens(plan, j + 1, frame);
        if (stats) {
            stats->generated_per_frame.push_back(generated);
            stats->inherited_per_frame.push_back(cells - generated);
        }
    }

    auto ordered = sequencer.reorganize_frames(plan, key_a.rows, key_a.cols);
    return {ordered.begin() + 1, ordered.end() - 1};
}

/// Frame count after `rounds` rounds inserting `per_gap` frames into each gap.
inline std::size_t recursive_frame_count(std::size_t keyframes, std::size_t rounds,
                                         std::size_t per_gap)
{
    std::size_t n = keyframes;
    for (std::size_t r = 0; r < rounds; ++r) {
        n = (n - 1) * (per_gap + 1) + 1;
    }
    return n;
}

/// Each round inserts per_gap frames into every adjacent gap of the current
/// sequence. Gap g of round r uses policy seed and sampler stream derived
/// from (r, g), so results do not depend on evaluation order.
template <class T>
std::vector<FrameGrid> recursive_interpolate(std::vector<FrameGrid> frames, std::size_t rounds,
                                             std::size_t per_gap, const Model<T>& model,
                                             const InterpolationPolicy& policy,
                                             const Sequencer& sequencer,
                                             std::span<const Token> text, const Sampler& sampler)
{
    if (frames.size() < 2) {
        throw InputError("recursive interpolation needs at least 2 key frames");
    }
    if (rounds < 1) {
        throw InputError("recursive interpolation needs at least 1 round");
    }
    if (per_gap + 2 > sequencer.layout().max_serial()) {
        throw CapacityError("inserting " + std::to_string(per_gap) +
                            " frames per gap needs serial number " + std::to_string(per_gap + 2) +
                            ", maximum is " + std::to_string(sequencer.layout().max_serial()));
    }
    for (std::size_t r = 0; r < rounds; ++r) {
        std::vector<FrameGrid> next{frames.front()};
        for (std::size_t g = 0; g + 1 < frames.size(); ++g) {
            InterpolationPolicy gap_policy = policy;
            const std::uint64_t stream = (static_cast<std::uint64_t>(r) << 32) | g;
            gap_policy.rng_seed = SplitMix64(policy.rng_seed ^ stream)();
            Sampler gap_sampler(sampler.temperature(), SplitMix64(sampler.seed() ^ stream)());
            auto mid = interpolate_between(frames[g], frames[g + 1], per_gap, model, gap_policy,
                                           sequencer, text, gap_sampler);
            next.insert(next.end(), std::make_move_iterator(mid.begin()),
                        std::make_move_iterator(mid.end()));
            next.push_back(frames[g + 1]);
        }
        frames = std::move(next);
    }
    return frames;
}

} // namespace flashvid
