// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "flashvid/interpolation.hpp"
#include "flashvid/training.hpp"

namespace flashvid {

/// Every tunable of a run, flattened so it can be read from `key = value`
/// lines. Defaults describe the toy setup.
struct RunConfig {
    // Model.
    std::size_t layers = 4;
    std::size_t d_model = 128;
    std::size_t heads = 4;
    std::size_t ffn_hidden = 512;
    std::size_t max_sequence_length = 4096;
    double gamma = 0.0;  // 0 selects the per-head schedule
    double xpos_scale_base = 0.0;
    double rms_eps = 1e-6;
    double init_stddev = 0.02;
    std::uint64_t init_seed = 7;
    bool start_of_image = false;

    // Data.
    std::size_t rows = 8;
    std::size_t cols = 8;
    std::size_t frames_per_clip = 4;
    std::size_t clips_per_class = 24;
    std::size_t sprite_size = 2;
    std::uint64_t dataset_seed = 1;
    bool interpolation_tasks = true;

    // Optimizer.
    std::size_t epochs = 160;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    std::uint64_t train_seed = 1;

    // Generation and interpolation.
    double temperature = 1.0;  // 0 is greedy
    std::uint64_t seed = 0;
    double inherit_fraction = 0.2;
    std::size_t dilation_radius = 1;
    std::size_t rounds = 1;
    std::size_t per_gap = 1;

    // Benchmark.
    std::size_t repetitions = 3;
    std::size_t warmup = 1;

    DecoderConfig decoder(const VocabLayout& layout) const
    {
        DecoderConfig cfg;
        cfg.layers = layers;
        cfg.vocab_size = layout.vocab_size();
        cfg.d_model = d_model;
        cfg.ffn_hidden = ffn_hidden;
        cfg.max_sequence_length = max_sequence_length;
        cfg.rms_eps = rms_eps;
        cfg.retention = RetentionConfig::make(
            d_model, heads, gamma > 0.0 ? std::optional<double>(gamma) : std::nullopt);
        cfg.retention.xpos_scale_base = xpos_scale_base;
        cfg.validate();
        return cfg;
    }

    SyntheticDatasetSpec dataset() const
    {
        SyntheticDatasetSpec s;
        s.rows = rows;
        s.cols = cols;
        s.frames_per_clip = frames_per_clip;
        s.clips_per_class = clips_per_class;
        s.sprite_size = sprite_size;
        s.seed = dataset_seed;
        if (sprite_size != 2) {
            s.sprite.clear();
            for (std::size_t i = 0; i < sprite_size * sprite_size; ++i) {
                s.sprite.push_back(static_cast<Token>(1 + (i * 37) % 63));
            }
        }
        return s;
    }

    TrainConfig training() const
    {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = learning_rate;
        tc.beta1 = beta1;
        tc.beta2 = beta2;
        tc.adam_eps = adam_eps;
        tc.clip_norm = clip_norm;
        tc.seed = train_seed;
        return tc;
    }

    InterpolationPolicy policy() const { return {inherit_fraction, dilation_radius, seed}; }

    Sampler sampler() const { return Sampler(temperature, seed); }
};

namespace detail {

template <class V>
bool parse_number(std::string_view text, V& out)
{
    if constexpr (std::is_same_v<V, double>) {
        std::string s(text);
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
            return false;
        }
        out = v;
        return true;
    } else {
        if (!text.empty() && text.front() == '-') {
            return false;
        }
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
        return ec == std::errc() && ptr == text.data() + text.size();
    }
}

using Setter = std::function<void(RunConfig&, std::string_view, std::size_t)>;

template <class V>
Setter setter(V RunConfig::*field, const char* type)
{
    return [field, type](RunConfig& c, std::string_view value, std::size_t line) {
        V v{};
        if constexpr (std::is_same_v<V, bool>) {
            if (value == "true" || value == "1") {
                v = true;
            } else if (value == "false" || value == "0") {
                v = false;
            } else {
                throw ParseError(line, "expected " + std::string(type) + ", got '" +
                                           std::string(value) + "'");
            }
        } else if (!parse_number(value, v)) {
            throw ParseError(line,
                             "expected " + std::string(type) + ", got '" + std::string(value) + "'");
        }
        c.*field = v;
    };
}

inline const std::vector<std::pair<std::string_view, Setter>>& config_keys()
{
    static const std::vector<std::pair<std::string_view, Setter>> keys = {
        {"layers", setter(&RunConfig::layers, "an unsigned integer")},
        {"d_model", setter(&RunConfig::d_model, "an unsigned integer")},
        {"heads", setter(&RunConfig::heads, "an unsigned integer")},
        {"ffn_hidden", setter(&RunConfig::ffn_hidden, "an unsigned integer")},
        {"max_sequence_length", setter(&RunConfig::max_sequence_length, "an unsigned integer")},
        {"gamma", setter(&RunConfig::gamma, "a number")},
        {"xpos_scale_base", setter(&RunConfig::xpos_scale_base, "a number")},
        {"rms_eps", setter(&RunConfig::rms_eps, "a number")},
        {"init_stddev", setter(&RunConfig::init_stddev, "a number")},
        {"init_seed", setter(&RunConfig::init_seed, "an unsigned integer")},
        {"start_of_image", setter(&RunConfig::start_of_image, "true or false")},
        {"rows", setter(&RunConfig::rows, "an unsigned integer")},
        {"cols", setter(&RunConfig::cols, "an unsigned integer")},
        {"frames_per_clip", setter(&RunConfig::frames_per_clip, "an unsigned integer")},
        {"clips_per_class", setter(&RunConfig::clips_per_class, "an unsigned integer")},
        {"sprite_size", setter(&RunConfig::sprite_size, "an unsigned integer")},
        {"dataset_seed", setter(&RunConfig::dataset_seed, "an unsigned integer")},
        {"interpolation_tasks", setter(&RunConfig::interpolation_tasks, "true or false")},
        {"epochs", setter(&RunConfig::epochs, "an unsigned integer")},
        {"batch_size", setter(&RunConfig::batch_size, "an unsigned integer")},
        {"learning_rate", setter(&RunConfig::learning_rate, "a number")},
        {"beta1", setter(&RunConfig::beta1, "a number")},
        {"beta2", setter(&RunConfig::beta2, "a number")},
        {"adam_eps", setter(&RunConfig::adam_eps, "a number")},
        {"clip_norm", setter(&RunConfig::clip_norm, "a number")},
        {"train_seed", setter(&RunConfig::train_seed, "an unsigned integer")},
        {"temperature", setter(&RunConfig::temperature, "a number")},
        {"seed", setter(&RunConfig::seed, "an unsigned integer")},
        {"inherit_fraction", setter(&RunConfig::inherit_fraction, "a number")},
        {"dilation_radius", setter(&RunConfig::dilation_radius, "an unsigned integer")},
        {"rounds", setter(&RunConfig::rounds, "an unsigned integer")},
        {"per_gap", setter(&RunConfig::per_gap, "an unsigned integer")},
        {"repetitions", setter(&RunConfig::repetitions, "an unsigned integer")},
        {"warmup", setter(&RunConfig::warmup, "an unsigned integer")},
    };
    return keys;
}

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

} // namespace detail

/// Sets one key. `line` is reported in errors; 0 marks a command-line value.
inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value,
                             std::size_t line = 0)
{
    for (const auto& [name, set] : detail::config_keys()) {
        if (name == key) {
            set(cfg, value, line);
            return;
        }
    }
    throw UnknownKeyError(line, "unknown key '" + std::string(key) + "'");
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
inline void apply_config_text(RunConfig& cfg, std::string_view text)
{
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(line_no, "expected 'key = value', got '" + std::string(line) + "'");
        }
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(line_no, "missing key before '='");
        }
        set_config_value(cfg, key, value, line_no);
    }
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    RunConfig cfg;
    apply_config_text(cfg, ss.str());
    return cfg;
}

/// Applies `key=value` overrides (from the command line) on top of `cfg`.
inline void apply_overrides(RunConfig& cfg, std::span<const std::string> overrides)
{
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            throw ParseError(0, "override '" + o + "' is not of the form key=value");
        }
        set_config_value(cfg, detail::trim(std::string_view(o).substr(0, eq)),
                         detail::trim(std::string_view(o).substr(eq + 1)));
    }
}

} // namespace flashvid
