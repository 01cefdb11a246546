// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint layout, all integers and reals little-endian:
//
//   "FVID"                      4 bytes magic
//   version                     u8  (kCheckpointVersion)
//   scalar_bytes                u8  (4 = f32, 8 = f64)
//   reserved                    u16 (0)
//   layers, vocab_size, d_model, ffn_hidden, heads, max_sequence_length, n_thetas
//                               u32 x 7
//   rms_eps, xpos_scale_base    f64 x 2
//   gammas                      f64 x heads
//   thetas                      f64 x n_thetas
//   scalar_count                u64
//   weights                     scalar x scalar_count, canonical visit order
//   checksum                    u64 FNV-1a over every preceding byte

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "flashvid/decoder.hpp"

namespace flashvid {

inline constexpr std::uint8_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'F', 'V', 'I', 'D'};

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

class ByteWriter {
public:
    template <class U>
        requires std::is_integral_v<U>
    void put(U v)
    {
        auto u = static_cast<std::make_unsigned_t<U>>(v);
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
        }
    }
    void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
    void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }

    std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <class U>
        requires std::is_integral_v<U>
    U get()
    {
        need(sizeof(U));
        std::make_unsigned_t<U> u = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            u |= static_cast<std::make_unsigned_t<U>>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(U);
        return static_cast<U>(u);
    }
    double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
    float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > bytes_.size()) {
            throw ChecksumError("checkpoint ends early (truncated file)");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

template <class T>
std::vector<std::uint8_t> encode_checkpoint(const ModelWeights<T>& w, const DecoderConfig& cfg)
{
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    cfg.validate();
    w.check(cfg);
    detail::ByteWriter out;
    for (char c : kCheckpointMagic) {
        out.put(static_cast<std::uint8_t>(c));
    }
    out.put(kCheckpointVersion);
    out.put(static_cast<std::uint8_t>(sizeof(T)));
    out.put(std::uint16_t{0});
    for (std::size_t v : {cfg.layers, cfg.vocab_size, cfg.d_model, cfg.ffn_hidden,
                          cfg.retention.heads, cfg.max_sequence_length,
                          cfg.retention.thetas.size()}) {
        out.put(static_cast<std::uint32_t>(v));
    }
    out.put_f64(cfg.rms_eps);
    out.put_f64(cfg.retention.xpos_scale_base);
    for (double g : cfg.retention.gammas) {
        out.put_f64(g);
    }
    for (double t : cfg.retention.thetas) {
        out.put_f64(t);
    }
    out.put(static_cast<std::uint64_t>(w.parameter_count()));
    w.for_each([&](const Tensor<T>& t) {
        for (T v : t.data()) {
            if constexpr (sizeof(T) == 8) {
                out.put_f64(static_cast<double>(v));
            } else {
                out.put_f32(static_cast<float>(v));
            }
        }
    });
    out.put(fnv1a64(out.bytes));
    return std::move(out.bytes);
}

/// Decodes a checkpoint. Bad magic, version and checksum each raise their own
/// error type; the magic and version are checked first so a foreign or newer
/// file is reported as such rather than as corruption.
template <class T>
std::pair<ModelWeights<T>, DecoderConfig> decode_checkpoint(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 5) {
        throw ChecksumError("checkpoint of " + std::to_string(bytes.size()) +
                            " bytes is truncated");
    }
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw MagicError("file does not start with FVID");
    }
    if (bytes[4] != kCheckpointVersion) {
        throw VersionError("checkpoint format version " + std::to_string(bytes[4]) +
                           " is not supported by this reader (version " +
                           std::to_string(kCheckpointVersion) + ")");
    }
    if (bytes.size() < 16) {
        throw ChecksumError("checkpoint is truncated");
    }
    const auto body = bytes.first(bytes.size() - 8);
    detail::ByteReader tail(bytes.last(8));
    if (tail.get<std::uint64_t>() != fnv1a64(body)) {
        throw ChecksumError("checkpoint checksum mismatch (corrupt or truncated file)");
    }

    detail::ByteReader in(body.subspan(5));
    const auto scalar_bytes = in.get<std::uint8_t>();
    if (scalar_bytes != 4 && scalar_bytes != 8) {
        throw ConsistencyError("checkpoint scalar width " + std::to_string(scalar_bytes) +
                               " is neither 4 nor 8");
    }
    in.get<std::uint16_t>();
    DecoderConfig cfg;
    cfg.layers = in.get<std::uint32_t>();
    cfg.vocab_size = in.get<std::uint32_t>();
    cfg.d_model = in.get<std::uint32_t>();
    cfg.ffn_hidden = in.get<std::uint32_t>();
    cfg.retention.heads = in.get<std::uint32_t>();
    cfg.max_sequence_length = in.get<std::uint32_t>();
    const std::size_t n_thetas = in.get<std::uint32_t>();
    cfg.rms_eps = in.get_f64();
    cfg.retention.d_model = cfg.d_model;
    cfg.retention.xpos_scale_base = in.get_f64();
    cfg.retention.gammas.clear();
    cfg.retention.thetas.clear();
    for (std::size_t h = 0; h < cfg.retention.heads; ++h) {
        cfg.retention.gammas.push_back(in.get_f64());
    }
    for (std::size_t j = 0; j < n_thetas; ++j) {
        cfg.retention.thetas.push_back(in.get_f64());
    }
    cfg.validate();
    const auto count = in.get<std::uint64_t>();

    ModelWeights<T> w = ModelWeights<T>::init(cfg, 0, 0.0);
    if (count != w.parameter_count() || in.remaining() != count * scalar_bytes) {
        throw ConsistencyError("checkpoint holds " + std::to_string(count) +
                               " scalars, config implies " + std::to_string(w.parameter_count()));
    }
    w.for_each([&](Tensor<T>& t) {
        for (T& v : t.storage()) {
            v = scalar_bytes == 8 ? static_cast<T>(in.get_f64()) : static_cast<T>(in.get_f32());
        }
    });
    return {std::move(w), std::move(cfg)};
}

template <class T>
void save_checkpoint(const ModelWeights<T>& w, const DecoderConfig& cfg,
                     const std::filesystem::path& path)
{
    const auto bytes = encode_checkpoint(w, cfg);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw IoError("failed writing " + path.string());
    }
}

template <class T>
std::pair<ModelWeights<T>, DecoderConfig> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_checkpoint<T>(bytes);
}

} // namespace flashvid
