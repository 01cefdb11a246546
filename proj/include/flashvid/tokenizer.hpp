// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "flashvid/decoder.hpp"
#include "flashvid/error.hpp"

namespace flashvid {

/// RGB image, interleaved, values in [0, 1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> pixels;  // height * width * 3

    Image() = default;
    Image(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0.0f) {}

    float& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
    float at(std::size_t y, std::size_t x, std::size_t c) const
    {
        return pixels[(y * width + x) * 3 + c];
    }

    bool operator==(const Image&) const = default;
};

/// Grid of vision-token indices (codebook-local, i.e. in [0, C)).
struct FrameGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Token> tokens;  // row-major

    FrameGrid() = default;
    FrameGrid(std::size_t r, std::size_t c, Token fill = 0) : rows(r), cols(c), tokens(r * c, fill) {}

    Token& at(std::size_t r, std::size_t c) { return tokens[r * cols + c]; }
    Token at(std::size_t r, std::size_t c) const { return tokens[r * cols + c]; }
    std::size_t size() const { return tokens.size(); }
    bool same_shape(const FrameGrid& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const FrameGrid&) const = default;
};

/// Patch codebook: each entry is patch*patch*3 values in [0, 1].
struct Codebook {
    std::size_t patch = 8;
    std::vector<std::vector<float>> entries;

    std::size_t size() const { return entries.size(); }
    std::size_t entry_length() const { return patch * patch * 3; }

    /// Flat color swatches over a levels^3 RGB lattice (levels = 4 gives 64).
    static Codebook rgb_lattice(std::size_t levels = 4, std::size_t patch = 8)
    {
        if (levels < 2 || patch == 0) {
            throw ConfigError("rgb lattice needs at least 2 levels and a positive patch size");
        }
        Codebook cb;
        cb.patch = patch;
        const float step = 1.0f / static_cast<float>(levels - 1);
        for (std::size_t r = 0; r < levels; ++r) {
            for (std::size_t g = 0; g < levels; ++g) {
                for (std::size_t b = 0; b < levels; ++b) {
                    std::vector<float> e(cb.entry_length());
                    for (std::size_t i = 0; i < patch * patch; ++i) {
                        e[3 * i] = static_cast<float>(r) * step;
                        e[3 * i + 1] = static_cast<float>(g) * step;
                        e[3 * i + 2] = static_cast<float>(b) * step;
                    }
                    cb.entries.push_back(std::move(e));
                }
            }
        }
        cb.validate();
        return cb;
    }

    void validate() const
    {
        if (entries.size() < 2) {
            throw ConfigError("codebook needs at least 2 entries");
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].size() != entry_length()) {
                throw ConfigError("codebook entry " + std::to_string(i) + " has " +
                                  std::to_string(entries[i].size()) + " values, expected " +
                                  std::to_string(entry_length()));
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (entries[i] == entries[j]) {
                    throw ConfigError("codebook entries " + std::to_string(j) + " and " +
                                      std::to_string(i) + " are identical");
                }
            }
        }
    }
};

/// Maps each patch to its nearest codebook entry (squared Euclidean), ties
/// to the lowest index.
inline FrameGrid encode_frame(const Image& img, const Codebook& cb)
{
    const std::size_t p = cb.patch;
    if (p == 0 || img.width % p != 0 || img.height % p != 0 || img.width == 0 || img.height == 0) {
        throw InputError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         " is not divisible into " + std::to_string(p) + "-pixel patches");
    }
    FrameGrid g(img.height / p, img.width / p);
    std::vector<float> patch(cb.entry_length());
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
            for (std::size_t y = 0; y < p; ++y) {
                for (std::size_t x = 0; x < p; ++x) {
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        patch[(y * p + x) * 3 + ch] = img.at(r * p + y, c * p + x, ch);
                    }
                }
            }
            double best = std::numeric_limits<double>::infinity();
            Token best_index = 0;
            for (std::size_t e = 0; e < cb.size(); ++e) {
                double dist = 0.0;
                for (std::size_t i = 0; i < patch.size(); ++i) {
                    const double diff = static_cast<double>(patch[i]) - cb.entries[e][i];
                    dist += diff * diff;
                }
                if (dist < best) {
                    best = dist;
                    best_index = static_cast<Token>(e);
                }
            }
            g.at(r, c) = best_index;
        }
    }
    return g;
}

inline Image decode_frame(const FrameGrid& g, const Codebook& cb)
{
    const std::size_t p = cb.patch;
    if (g.tokens.size() != g.rows * g.cols) {
        throw InputError("frame grid holds " + std::to_string(g.tokens.size()) + " tokens for " +
                         std::to_string(g.rows) + "x" + std::to_string(g.cols));
    }
    Image img(g.cols * p, g.rows * p);
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
            const Token t = g.at(r, c);
            if (t < 0 || static_cast<std::size_t>(t) >= cb.size()) {
                throw InputError("token " + std::to_string(t) + " at (" + std::to_string(r) + "," +
                                 std::to_string(c) + ") is outside the codebook of " +
                                 std::to_string(cb.size()));
            }
            const auto& e = cb.entries[static_cast<std::size_t>(t)];
            for (std::size_t y = 0; y < p; ++y) {
                for (std::size_t x = 0; x < p; ++x) {
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        img.at(r * p + y, c * p + x, ch) = e[(y * p + x) * 3 + ch];
                    }
                }
            }
        }
    }
    return img;
}

inline std::vector<Token> flatten(const FrameGrid& g) { return g.tokens; }

inline FrameGrid unflatten(std::span<const Token> tokens, std::size_t rows, std::size_t cols)
{
    if (tokens.size() != rows * cols) {
        throw InputError("cannot unflatten " + std::to_string(tokens.size()) + " tokens into " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
    FrameGrid g(rows, cols);
    std::ranges::copy(tokens, g.tokens.begin());
    return g;
}

/// Binary PPM (P6), 8 bits per channel.
inline std::string encode_p6(const Image& img)
{
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    out.reserve(out.size() + img.pixels.size());
    for (float v : img.pixels) {
        const float c = std::clamp(v, 0.0f, 1.0f);
        out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(c * 255.0f))));
    }
    return out;
}

inline void write_p6(const Image& img, const std::filesystem::path& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    const auto bytes = encode_p6(img);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Image read_p6(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255 || w == 0 || h == 0) {
        throw InputError(path.string() + " is not an 8-bit P6 image");
    }
    f.get();
    Image img(w, h);
    std::vector<char> raw(img.pixels.size());
    if (!f.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
        throw InputError(path.string() + " has truncated pixel data");
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        img.pixels[i] = static_cast<float>(static_cast<std::uint8_t>(raw[i])) / 255.0f;
    }
    return img;
}

/// One grid row per line, integers separated by single spaces.
inline std::string format_grid(const FrameGrid& g)
{
    std::ostringstream os;
    for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
            os << (c ? " " : "") << g.at(r, c);
        }
        os << '\n';
    }
    return os.str();
}

/// Grids separated by blank lines.
inline std::string format_grids(std::span<const FrameGrid> grids)
{
    std::string out;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        out += (i ? "\n" : "") + format_grid(grids[i]);
    }
    return out;
}

inline std::vector<FrameGrid> parse_grids(const std::string& text)
{
    std::vector<FrameGrid> grids;
    std::vector<std::vector<Token>> rows;
    auto finish = [&](std::size_t line_no) {
        if (rows.empty()) {
            return;
        }
        FrameGrid g(rows.size(), rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != g.cols) {
                throw InputError("grid row ending at line " + std::to_string(line_no) + " has " +
                                 std::to_string(rows[r].size()) + " tokens, expected " +
                                 std::to_string(g.cols));
            }
            std::ranges::copy(rows[r], g.tokens.begin() + static_cast<std::ptrdiff_t>(r * g.cols));
        }
        grids.push_back(std::move(g));
        rows.clear();
    };
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            finish(line_no);
            continue;
        }
        std::istringstream ls(line);
        std::vector<Token> row;
        std::string word;
        while (ls >> word) {
            try {
                std::size_t used = 0;
                const long v = std::stol(word, &used);
                if (used != word.size() || v < 0 || v > std::numeric_limits<Token>::max()) {
                    throw std::invalid_argument(word);
                }
                row.push_back(static_cast<Token>(v));
            } catch (const std::logic_error&) {
                throw InputError("line " + std::to_string(line_no) + ": '" + word +
                                 "' is not a token index");
            }
        }
        rows.push_back(std::move(row));
    }
    finish(line_no);
    return grids;
}

} // namespace flashvid
