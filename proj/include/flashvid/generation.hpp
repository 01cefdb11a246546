// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "flashvid/interpolation.hpp"

namespace flashvid {

/// Key-frame generation in recurrent mode. Frames in `given` are teacher-fed
/// as SN(1..given.size()); the remaining frames up to `count` are sampled,
/// each preceded by [text, SN(k)]. Returns all `count` frames.
template <class T>
std::vector<FrameGrid> generate_keyframes(const Model<T>& model, const Sequencer& sequencer,
                                          std::span<const Token> text, std::size_t count,
                                          std::size_t rows, std::size_t cols, Sampler& sampler,
                                          std::span<const FrameGrid> given = {})
{
    detail::check_vocab(model.config, sequencer.layout());
    const auto& layout = sequencer.layout();
    if (count > layout.max_serial()) {
        throw CapacityError(std::to_string(count) + " frames exceed the " +
                            std::to_string(layout.max_serial()) + " serial numbers");
    }
    if (given.size() > count) {
        throw InputError("more given frames than requested frames");
    }
    const std::size_t needed = count * (text.size() + (sequencer.start_of_image() ? 2 : 1) +
                                        rows * cols);
    if (needed > model.config.max_sequence_length) {
        throw CapacityError("generating " + std::to_string(count) + " frames needs " +
                            std::to_string(needed) + " positions, model allows " +
                            std::to_string(model.config.max_sequence_length));
    }

    auto states = LayerStates<T>::fresh(model.config);
    std::vector<FrameGrid> frames;
    for (std::size_t k = 1; k <= count; ++k) {
        const auto prompt = sequencer.keyframe_prompt(text, k);
        detail::feed<T>(std::span<const Token>(prompt).first(prompt.size() - 1), states, model);
        Token previous = prompt.back();
        if (k <= given.size()) {
            const FrameGrid& g = given[k - 1];
            if (g.rows != rows || g.cols != cols) {
                throw ShapeError("given frame " + std::to_string(k) + " has the wrong shape");
            }
            decoder_step_recurrent(previous, states, model.weights, model.config, false);
            for (Token t : g.tokens) {
                decoder_step_recurrent(layout.vision(t), states, model.weights, model.config,
                                       false);
            }
            frames.push_back(g);
            continue;
        }
        FrameGrid frame(rows, cols);
        for (std::size_t p = 0; p < frame.size(); ++p) {
            auto logits =
                decoder_step_recurrent(previous, states, model.weights, model.config, true);
            frame.tokens[p] = sampler.sample_vision<T>(*logits, layout);
            previous = layout.vision(frame.tokens[p]);
        }
        if (k < count) {
            decoder_step_recurrent(previous, states, model.weights, model.config, false);
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

} // namespace flashvid
