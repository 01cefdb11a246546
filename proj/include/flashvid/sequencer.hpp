// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flashvid/tokenizer.hpp"

namespace flashvid {

/// Contiguous vocabulary regions: text labels, vision tokens, serial numbers
/// SN(1..sn_count), then start-of-image and pad.
struct VocabLayout {
    std::size_t text_count = 14;
    std::size_t vision_count = 64;
    std::size_t sn_count = 48;

    std::size_t text_base() const { return 0; }
    std::size_t vision_base() const { return text_base() + text_count; }
    std::size_t sn_base() const { return vision_base() + vision_count; }
    Token start_of_image() const { return static_cast<Token>(sn_base() + sn_count); }
    Token pad() const { return start_of_image() + 1; }
    std::size_t vocab_size() const { return static_cast<std::size_t>(pad()) + 1; }
    std::size_t max_serial() const { return sn_count; }

    Token text(std::size_t label) const
    {
        if (label >= text_count) {
            throw InputError("text label " + std::to_string(label) + " outside the " +
                             std::to_string(text_count) + "-entry label set");
        }
        return static_cast<Token>(text_base() + label);
    }

    Token vision(Token local) const
    {
        if (local < 0 || static_cast<std::size_t>(local) >= vision_count) {
            throw InputError("vision token " + std::to_string(local) + " outside codebook of " +
                             std::to_string(vision_count));
        }
        return static_cast<Token>(vision_base()) + local;
    }

    Token serial(std::size_t k) const
    {
        if (k < 1 || k > sn_count) {
            throw CapacityError("serial number " + std::to_string(k) + " outside 1.." +
                                std::to_string(sn_count));
        }
        return static_cast<Token>(sn_base() + k - 1);
    }

    bool is_text(Token t) const { return t >= 0 && static_cast<std::size_t>(t) < vision_base(); }
    bool is_vision(Token t) const
    {
        return t >= 0 && static_cast<std::size_t>(t) >= vision_base() &&
               static_cast<std::size_t>(t) < sn_base();
    }
    bool is_serial(Token t) const
    {
        return t >= 0 && static_cast<std::size_t>(t) >= sn_base() && t < start_of_image();
    }
    std::size_t serial_value(Token t) const { return static_cast<std::size_t>(t) - sn_base() + 1; }
    Token local_vision(Token t) const { return t - static_cast<Token>(vision_base()); }

    bool operator==(const VocabLayout&) const = default;
};

enum class SegmentKind { text, sn, frame };

inline const char* to_string(SegmentKind k)
{
    switch (k) {
    case SegmentKind::text:
        return "text";
    case SegmentKind::sn:
        return "sn";
    case SegmentKind::frame:
        return "frame";
    }
    return "?";
}

struct Segment {
    SegmentKind kind;
    std::size_t start;
    std::size_t length;
    std::size_t frame_index;  // serial number of the frame (sn and frame segments), else 0

    bool operator==(const Segment&) const = default;
};

/// Token stream plus the segment tiling that explains it.
struct SequencePlan {
    std::vector<Token> tokens;
    std::vector<Segment> segments;

    void append(SegmentKind kind, std::span<const Token> toks, std::size_t frame_index)
    {
        segments.push_back({kind, tokens.size(), toks.size(), frame_index});
        tokens.insert(tokens.end(), toks.begin(), toks.end());
    }

    /// Tiling invariant: segments cover the token list exactly and in order.
    bool tiles() const
    {
        std::size_t pos = 0;
        for (const auto& s : segments) {
            if (s.start != pos || s.length == 0) {
                return false;
            }
            pos += s.length;
        }
        return pos == tokens.size();
    }

    /// One segment per line: "<kind> <start> <length> <index> : <tokens...>".
    std::string serialize() const
    {
        std::ostringstream os;
        for (const auto& s : segments) {
            os << to_string(s.kind) << ' ' << s.start << ' ' << s.length << ' ' << s.frame_index
               << " :";
            for (std::size_t i = 0; i < s.length; ++i) {
                os << ' ' << tokens[s.start + i];
            }
            os << '\n';
        }
        return os.str();
    }

    bool operator==(const SequencePlan&) const = default;
};

/// Teacher-forcing pair. labels[k] = input[k+1] (pad at the end); mask[k] is
/// set only where labels[k] is a vision token of a frame segment.
struct TrainingSequence {
    std::vector<Token> input;
    std::vector<Token> labels;
    std::vector<std::uint8_t> mask;
    SequencePlan plan;
};

class Sequencer {
public:
    explicit Sequencer(VocabLayout layout = {}, bool start_of_image = false)
        : layout_(layout), start_of_image_(start_of_image)
    {
    }

    const VocabLayout& layout() const { return layout_; }
    bool start_of_image() const { return start_of_image_; }

    /// Tokens placed before a frame carrying serial number k: [text, SN(k)]
    /// (followed by start-of-image when enabled).
    std::vector<Token> keyframe_prompt(std::span<const Token> text, std::size_t k) const
    {
        check_text(text);
        std::vector<Token> out(text.begin(), text.end());
        for (Token t : header_tail(k)) {
            out.push_back(t);
        }
        return out;
    }

    /// input = concat_i [text, SN(i+1), frame_i].
    TrainingSequence build_training_sequence(std::span<const Token> text,
                                             std::span<const FrameGrid> frames) const
    {
        std::vector<std::size_t> order(frames.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i + 1;
        }
        return build_with_serials(text, frames, order);
    }

    /// Interpolation-task training sequence over a clip of K+2 frames: first
    /// frame as SN(1), last as SN(K+2), then frames 1..K as SN(2..K+1).
    TrainingSequence build_interpolation_training_sequence(std::span<const Token> text,
                                                           std::span<const FrameGrid> clip) const
    {
        if (clip.size() < 3) {
            throw InputError("interpolation training needs at least 3 frames, got " +
                             std::to_string(clip.size()));
        }
        const std::size_t n = clip.size();
        std::vector<FrameGrid> ordered{clip[0], clip[n - 1]};
        std::vector<std::size_t> serials{1, n};
        for (std::size_t i = 1; i + 1 < n; ++i) {
            ordered.push_back(clip[i]);
            serials.push_back(i + 1);
        }
        return build_with_serials(text, ordered, serials);
    }

    /// [text, SN(1), keyA, text, SN(K+2), keyB]. Generated frame j (1..K) is
    /// appended afterwards with append_frame(plan, text, j + 1, frame).
    SequencePlan build_interpolation_prompt(std::span<const Token> text, const FrameGrid& key_a,
                                            const FrameGrid& key_b, std::size_t k) const
    {
        if (k < 1) {
            throw InputError("number of frames to insert must be at least 1");
        }
        if (k + 2 > layout_.max_serial()) {
            throw CapacityError("inserting " + std::to_string(k) + " frames needs serial number " +
                                std::to_string(k + 2) + ", maximum is " +
                                std::to_string(layout_.max_serial()));
        }
        if (!key_a.same_shape(key_b)) {
            throw ShapeError("key frames have different grid shapes");
        }
        check_text(text);
        SequencePlan plan;
        append_frame(plan, text, 1, key_a);
        append_frame(plan, text, k + 2, key_b);
        return plan;
    }

    void append_header(SequencePlan& plan, std::span<const Token> text, std::size_t serial) const
    {
        plan.append(SegmentKind::text, text, 0);
        const auto tail = header_tail(serial);
        plan.append(SegmentKind::sn, tail, serial);
    }

    void append_frame_tokens(SequencePlan& plan, std::size_t serial, const FrameGrid& frame) const
    {
        std::vector<Token> toks;
        toks.reserve(frame.size());
        for (Token t : frame.tokens) {
            toks.push_back(layout_.vision(t));
        }
        plan.append(SegmentKind::frame, toks, serial);
    }

    void append_frame(SequencePlan& plan, std::span<const Token> text, std::size_t serial,
                      const FrameGrid& frame) const
    {
        append_header(plan, text, serial);
        append_frame_tokens(plan, serial, frame);
    }

    /// Frames of a completed plan sorted by serial number.
    std::vector<FrameGrid> reorganize_frames(const SequencePlan& plan, std::size_t rows,
                                             std::size_t cols) const
    {
        std::map<std::size_t, FrameGrid> by_serial;
        for (const auto& s : plan.segments) {
            if (s.kind != SegmentKind::frame) {
                continue;
            }
            if (s.length != rows * cols) {
                throw ConsistencyError("frame segment with serial " +
                                       std::to_string(s.frame_index) + " holds " +
                                       std::to_string(s.length) + " tokens, expected " +
                                       std::to_string(rows * cols));
            }
            FrameGrid g(rows, cols);
            for (std::size_t i = 0; i < s.length; ++i) {
                g.tokens[i] = layout_.local_vision(plan.tokens[s.start + i]);
            }
            if (!by_serial.emplace(s.frame_index, std::move(g)).second) {
                throw ConsistencyError("serial number " + std::to_string(s.frame_index) +
                                       " appears on more than one frame");
            }
        }
        std::vector<FrameGrid> out;
        for (auto& [serial, g] : by_serial) {
            out.push_back(std::move(g));
        }
        return out;
    }

private:
    std::vector<Token> header_tail(std::size_t serial) const
    {
        std::vector<Token> out{layout_.serial(serial)};
        if (start_of_image_) {
            out.push_back(layout_.start_of_image());
        }
        return out;
    }

    void check_text(std::span<const Token> text) const
    {
        if (text.empty()) {
            throw InputError("text prefix is empty");
        }
        for (Token t : text) {
            if (!layout_.is_text(t)) {
                throw InputError("token " + std::to_string(t) + " is not a text token");
            }
        }
    }

    TrainingSequence build_with_serials(std::span<const Token> text,
                                        std::span<const FrameGrid> frames,
                                        std::span<const std::size_t> serials) const
    {
        if (frames.empty()) {
            throw InputError("no frames to sequence");
        }
        if (frames.size() > layout_.max_serial()) {
            throw CapacityError(std::to_string(frames.size()) + " frames exceed the " +
                                std::to_string(layout_.max_serial()) + " serial numbers");
        }
        check_text(text);
        TrainingSequence seq;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (!frames[i].same_shape(frames[0])) {
                throw ShapeError("frame " + std::to_string(i) + " has a different grid shape");
            }
            append_frame(seq.plan, text, serials[i], frames[i]);
        }
        seq.input = seq.plan.tokens;
        const std::size_t n = seq.input.size();
        seq.labels.assign(n, layout_.pad());
        seq.mask.assign(n, 0);
        std::vector<std::uint8_t> in_frame(n, 0);
        for (const auto& s : seq.plan.segments) {
            if (s.kind == SegmentKind::frame) {
                std::fill_n(in_frame.begin() + static_cast<std::ptrdiff_t>(s.start), s.length, 1);
            }
        }
        for (std::size_t k = 0; k + 1 < n; ++k) {
            seq.labels[k] = seq.input[k + 1];
            seq.mask[k] = in_frame[k + 1];
        }
        return seq;
    }

    VocabLayout layout_;
    bool start_of_image_;
};

} // namespace flashvid
