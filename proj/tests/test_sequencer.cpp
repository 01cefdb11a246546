// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>

#include "flashvid/rng.hpp"
#include "flashvid/sequencer.hpp"

namespace flashvid {
namespace {

class SequencerTest : public ::testing::Test {
protected:
    VocabLayout layout;
    Sequencer seq{layout};
    Token T = layout.text(0);

    Token sn(std::size_t k) const { return static_cast<Token>(layout.sn_base() + k - 1); }
    Token v(Token local) const { return static_cast<Token>(layout.vision_base()) + local; }

    static FrameGrid grid2x2(Token a, Token b, Token c, Token d)
    {
        FrameGrid g(2, 2);
        g.tokens = {a, b, c, d};
        return g;
    }
};

TEST_F(SequencerTest, LayoutRangesAreDisjointAndCoverVocabulary)
{
    EXPECT_EQ(layout.vocab_size(), 128u);
    EXPECT_EQ(layout.sn_base(), 78u);
    EXPECT_EQ(layout.serial(1), 78);
    EXPECT_EQ(layout.serial(48), 125);
    EXPECT_EQ(layout.start_of_image(), 126);
    EXPECT_EQ(layout.pad(), 127);
    std::size_t text = 0, vision = 0, serial = 0;
    for (Token t = 0; t < static_cast<Token>(layout.vocab_size()); ++t) {
        const int hits = layout.is_text(t) + layout.is_vision(t) + layout.is_serial(t);
        EXPECT_LE(hits, 1) << t;
        text += layout.is_text(t);
        vision += layout.is_vision(t);
        serial += layout.is_serial(t);
    }
    EXPECT_EQ(text + vision + serial + 2, layout.vocab_size());
    EXPECT_THROW(layout.serial(0), CapacityError);
    EXPECT_THROW(layout.serial(49), CapacityError);
}

TEST_F(SequencerTest, TwoFrameTrainingSequenceGolden)
{
    const std::vector<FrameGrid> frames{grid2x2(0, 1, 2, 3), grid2x2(4, 5, 6, 7)};
    const std::vector<Token> text{T};
    const auto s = seq.build_training_sequence(text, frames);
    const std::vector<Token> golden{T, sn(1), v(0), v(1), v(2), v(3),
                                    T, sn(2), v(4), v(5), v(6), v(7)};
    EXPECT_EQ(s.input, golden);
    ASSERT_EQ(s.labels.size(), golden.size());
    for (std::size_t k = 0; k + 1 < golden.size(); ++k) {
        EXPECT_EQ(s.labels[k], s.input[k + 1]);
    }
    EXPECT_EQ(s.labels.back(), layout.pad());
    // The mask is unset exactly where the label is text, an SN, or the
    // trailing pad.
    const std::vector<std::uint8_t> mask{0, 1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 0};
    EXPECT_EQ(s.mask, mask);
    EXPECT_TRUE(s.plan.tiles());
    EXPECT_EQ(s.plan.serialize(),
              "text 0 1 0 : 0\n"
              "sn 1 1 1 : 78\n"
              "frame 2 4 1 : 14 15 16 17\n"
              "text 6 1 0 : 0\n"
              "sn 7 1 2 : 79\n"
              "frame 8 4 2 : 18 19 20 21\n");
}

TEST_F(SequencerTest, StartOfImageFollowsEverySerial)
{
    Sequencer soi(layout, true);
    const std::vector<Token> text{T};
    const std::vector<FrameGrid> frames{grid2x2(0, 0, 0, 0)};
    const auto s = soi.build_training_sequence(text, frames);
    EXPECT_EQ(s.input, (std::vector<Token>{T, sn(1), layout.start_of_image(), v(0), v(0), v(0),
                                           v(0)}));
    EXPECT_EQ(s.mask, (std::vector<std::uint8_t>{0, 0, 1, 1, 1, 1, 0}));
    EXPECT_EQ(soi.keyframe_prompt(text, 2),
              (std::vector<Token>{T, sn(2), layout.start_of_image()}));
}

TEST_F(SequencerTest, LengthFormulaAndTilingHoldForRandomInputs)
{
    SplitMix64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 1 + rng.below(5), cols = 1 + rng.below(5);
        std::vector<Token> text(1 + rng.below(3));
        for (auto& t : text) {
            t = layout.text(rng.below(layout.text_count));
        }
        std::vector<FrameGrid> frames(1 + rng.below(layout.max_serial()));
        for (auto& f : frames) {
            f = FrameGrid(rows, cols, static_cast<Token>(rng.below(64)));
        }
        const auto s = seq.build_training_sequence(text, frames);
        EXPECT_EQ(s.input.size(), frames.size() * (text.size() + 1 + rows * cols));
        EXPECT_TRUE(s.plan.tiles());
        for (const auto& seg : s.plan.segments) {
            if (seg.kind == SegmentKind::frame) {
                EXPECT_EQ(seg.length, rows * cols);
            }
        }
    }
}

TEST_F(SequencerTest, TooManyFramesIsCapacityError)
{
    const std::vector<FrameGrid> frames(layout.max_serial() + 1, FrameGrid(1, 1));
    const std::vector<Token> text{T};
    EXPECT_THROW(seq.build_training_sequence(text, frames), CapacityError);
}

TEST_F(SequencerTest, MixedShapesAndBadTextRejected)
{
    const std::vector<FrameGrid> frames{FrameGrid(1, 2), FrameGrid(2, 1)};
    const std::vector<Token> text{T};
    EXPECT_THROW(seq.build_training_sequence(text, frames), ShapeError);
    const std::vector<Token> bad{v(0)};
    EXPECT_THROW(seq.keyframe_prompt(bad, 1), InputError);
}

TEST_F(SequencerTest, KeyframePrompts)
{
    const std::vector<Token> text{T, layout.text(3)};
    EXPECT_EQ(seq.keyframe_prompt(text, 1), (std::vector<Token>{T, layout.text(3), sn(1)}));
    EXPECT_EQ(seq.keyframe_prompt(text, 2), (std::vector<Token>{T, layout.text(3), sn(2)}));
    EXPECT_EQ(sn(2), static_cast<Token>(layout.sn_base() + 1));
    EXPECT_THROW(seq.keyframe_prompt(text, 0), CapacityError);
    EXPECT_THROW(seq.keyframe_prompt(text, 49), CapacityError);
}

TEST_F(SequencerTest, InterpolationPlanThreeInsertedFrames)
{
    const auto a = grid2x2(1, 1, 1, 1), b = grid2x2(2, 2, 2, 2);
    const std::vector<Token> text{T};
    auto plan = seq.build_interpolation_prompt(text, a, b, 3);
    EXPECT_EQ(plan.tokens, (std::vector<Token>{T, sn(1), v(1), v(1), v(1), v(1),
                                               T, sn(5), v(2), v(2), v(2), v(2)}));
    std::vector<FrameGrid> generated;
    for (std::size_t j = 1; j <= 3; ++j) {
        generated.push_back(FrameGrid(2, 2, static_cast<Token>(10 + j)));
        seq.append_frame(plan, text, j + 1, generated.back());
    }
    EXPECT_EQ(plan.tokens, (std::vector<Token>{T, sn(1), v(1), v(1), v(1), v(1),
                                               T, sn(5), v(2), v(2), v(2), v(2),
                                               T, sn(2), v(11), v(11), v(11), v(11),
                                               T, sn(3), v(12), v(12), v(12), v(12),
                                               T, sn(4), v(13), v(13), v(13), v(13)}));
    EXPECT_TRUE(plan.tiles());
    const auto ordered = seq.reorganize_frames(plan, 2, 2);
    EXPECT_EQ(ordered, (std::vector<FrameGrid>{a, generated[0], generated[1], generated[2], b}));
}

TEST_F(SequencerTest, InterpolationPlanSingleInsertedFrame)
{
    const auto a = grid2x2(1, 2, 3, 4), b = grid2x2(5, 6, 7, 8), g = grid2x2(9, 9, 9, 9);
    const std::vector<Token> text{T};
    auto plan = seq.build_interpolation_prompt(text, a, b, 1);
    EXPECT_EQ(plan.segments[4].frame_index, 3u);
    EXPECT_EQ(plan.tokens[7], sn(3));
    seq.append_frame(plan, text, 2, g);
    EXPECT_EQ(plan.tokens[13], sn(2));
    EXPECT_EQ(seq.reorganize_frames(plan, 2, 2), (std::vector<FrameGrid>{a, g, b}));
}

TEST_F(SequencerTest, InterpolationCapacityAndArguments)
{
    const std::vector<Token> text{T};
    const FrameGrid a(1, 1), b(1, 1);
    EXPECT_NO_THROW(seq.build_interpolation_prompt(text, a, b, layout.max_serial() - 2));
    EXPECT_THROW(seq.build_interpolation_prompt(text, a, b, layout.max_serial() - 1),
                 CapacityError);
    EXPECT_THROW(seq.build_interpolation_prompt(text, a, b, 0), InputError);
    EXPECT_THROW(seq.build_interpolation_prompt(text, a, FrameGrid(1, 2), 1), ShapeError);
}

TEST_F(SequencerTest, OrderedKeyframePlanIsUnchangedByReorganize)
{
    const std::vector<FrameGrid> frames{grid2x2(0, 1, 2, 3), grid2x2(3, 2, 1, 0),
                                        grid2x2(7, 7, 7, 7)};
    const std::vector<Token> text{T};
    const auto s = seq.build_training_sequence(text, frames);
    EXPECT_EQ(seq.reorganize_frames(s.plan, 2, 2), frames);
}

TEST_F(SequencerTest, DuplicateSerialIsConsistencyError)
{
    const std::vector<Token> text{T};
    auto plan = seq.build_interpolation_prompt(text, FrameGrid(1, 1), FrameGrid(1, 1), 2);
    seq.append_frame(plan, text, 1, FrameGrid(1, 1));
    EXPECT_THROW(seq.reorganize_frames(plan, 1, 1), ConsistencyError);
}

TEST_F(SequencerTest, ReorganizeIsPermutationWithInjectiveSerials)
{
    SplitMix64 rng(2);
    const std::vector<Token> text{T};
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t k = 1 + rng.below(20);
        std::vector<FrameGrid> temporal;
        for (std::size_t i = 0; i < k + 2; ++i) {
            FrameGrid g(2, 3);
            for (auto& t : g.tokens) {
                t = static_cast<Token>(rng.below(64));
            }
            temporal.push_back(g);
        }
        auto plan = seq.build_interpolation_prompt(text, temporal.front(), temporal.back(), k);
        for (std::size_t j = 1; j <= k; ++j) {
            seq.append_frame(plan, text, j + 1, temporal[j]);
        }
        std::vector<std::size_t> serials;
        for (const auto& s : plan.segments) {
            if (s.kind == SegmentKind::sn) {
                serials.push_back(s.frame_index);
            }
        }
        std::ranges::sort(serials);
        EXPECT_TRUE(std::ranges::adjacent_find(serials) == serials.end());
        EXPECT_EQ(seq.reorganize_frames(plan, 2, 3), temporal);
    }
}

TEST_F(SequencerTest, InterpolationTrainingSequenceOrdersKeysFirst)
{
    const std::vector<FrameGrid> clip{FrameGrid(1, 1, 0), FrameGrid(1, 1, 1), FrameGrid(1, 1, 2),
                                      FrameGrid(1, 1, 3)};
    const std::vector<Token> text{T};
    const auto s = seq.build_interpolation_training_sequence(text, clip);
    EXPECT_EQ(s.input, (std::vector<Token>{T, sn(1), v(0), T, sn(4), v(3), T, sn(2), v(1), T,
                                           sn(3), v(2)}));
    EXPECT_EQ(seq.reorganize_frames(s.plan, 1, 1), clip);
}

} // namespace
} // namespace flashvid
