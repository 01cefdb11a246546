// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "flashvid/decoder.hpp"

namespace flashvid {

enum class BenchMode { recurrent, ar_baseline };

inline std::string to_string(BenchMode m)
{
    return m == BenchMode::recurrent ? "recurrent" : "ar_baseline";
}

inline BenchMode parse_bench_mode(const std::string& s)
{
    if (s == "recurrent") {
        return BenchMode::recurrent;
    }
    if (s == "ar_baseline") {
        return BenchMode::ar_baseline;
    }
    throw ScenarioError("unknown bench mode '" + s + "' (expected recurrent or ar_baseline)");
}

struct BenchScenario {
    std::vector<BenchMode> modes{BenchMode::recurrent, BenchMode::ar_baseline};
    std::vector<std::size_t> lengths{64, 128, 256, 512};
    std::size_t repetitions = 3;
    std::size_t warmup = 1;
    std::size_t frame_tokens = 64;  // tokens per frame, for per-frame figures

    void validate() const
    {
        if (modes.empty() || lengths.empty()) {
            throw ScenarioError("a bench scenario needs at least one mode and one length");
        }
        if (lengths.front() == 0 || !std::ranges::is_sorted(lengths, std::less_equal<>{})) {
            throw ScenarioError("bench lengths must be positive and strictly ascending");
        }
        if (repetitions < 3) {
            throw ScenarioError("bench needs at least 3 repetitions, got " +
                                std::to_string(repetitions));
        }
        if (frame_tokens == 0) {
            throw ScenarioError("frame_tokens must be positive");
        }
    }
};

struct BenchRecord {
    BenchMode mode;
    std::size_t length;
    double mean_s_per_token;
    double min_s_per_token;
    double max_s_per_token;
    double mean_s_per_frame;
    double min_s_per_frame;
    double max_s_per_frame;
    double tokens_per_s;

    double mean_total_s() const { return mean_s_per_token * static_cast<double>(length); }
};

namespace detail {

template <class T>
Token argmax_token(std::span<const T> logits)
{
    return static_cast<Token>(std::ranges::max_element(logits) - logits.begin());
}

/// Greedily decodes `length` tokens one state update at a time.
template <class T>
std::vector<Token> decode_recurrent(const Model<T>& model, std::size_t length)
{
    auto states = LayerStates<T>::fresh(model.config);
    std::vector<Token> out{0};
    while (out.size() < length) {
        const auto logits =
            decoder_step_recurrent(out.back(), states, model.weights, model.config, true);
        out.push_back(argmax_token<T>(*logits));
    }
    return out;
}

/// Greedily decodes `length` tokens, re-running the parallel forward over the
/// whole prefix for every new token.
template <class T>
std::vector<Token> decode_ar_baseline(const Model<T>& model, std::size_t length)
{
    std::vector<Token> out{0};
    while (out.size() < length) {
        Tape<T> tape(Tape<T>::Mode::inference);
        const Var logits = decoder_forward_parallel(tape, std::span<const Token>(out),
                                                    model.weights, model.config);
        const auto& v = tape.value(logits);
        out.push_back(argmax_token<T>(v.row(out.size() - 1)));
    }
    return out;
}

} // namespace detail

/// Times each (mode, length) pair. Every repetition decodes `length` tokens
/// from scratch; warmup runs are not recorded.
template <class T>
std::vector<BenchRecord> run_bench(const BenchScenario& scenario, const Model<T>& model)
{
    scenario.validate();
    if (scenario.lengths.back() > model.config.max_sequence_length) {
        throw ScenarioError("bench length " + std::to_string(scenario.lengths.back()) +
                            " exceeds max_sequence_length " +
                            std::to_string(model.config.max_sequence_length));
    }
    std::vector<BenchRecord> records;
    for (BenchMode mode : scenario.modes) {
        for (std::size_t len : scenario.lengths) {
            auto once = [&] {
                const auto t0 = std::chrono::steady_clock::now();
                const auto toks = mode == BenchMode::recurrent
                                      ? detail::decode_recurrent(model, len)
                                      : detail::decode_ar_baseline(model, len);
                const double s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (toks.size() != len) {
                    throw ConsistencyError("decoder produced the wrong number of tokens");
                }
                return s / static_cast<double>(len);
            };
            for (std::size_t i = 0; i < scenario.warmup; ++i) {
                once();
            }
            std::vector<double> per_token;
            for (std::size_t i = 0; i < scenario.repetitions; ++i) {
                per_token.push_back(once());
            }
            double mean = 0.0;
            for (double v : per_token) {
                mean += v;
            }
            mean /= static_cast<double>(per_token.size());
            const auto [lo, hi] = std::ranges::minmax(per_token);
            const double f = static_cast<double>(scenario.frame_tokens);
            records.push_back({mode, len, mean, lo, hi, mean * f, lo * f, hi * f, 1.0 / mean});
        }
    }
    return records;
}

inline std::string bench_csv(std::span<const BenchRecord> records)
{
    std::string out = "mode,L,mean_s_per_token,min,max,tokens_per_s\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.9e,%.9e,%.9e,%.6f\n", to_string(r.mode).c_str(),
                      r.length, r.mean_s_per_token, r.min_s_per_token, r.max_s_per_token,
                      r.tokens_per_s);
        out += buf;
    }
    return out;
}

/// Least-squares polynomial fit y ~ sum_k c_k x^k with coefficient of
/// determination.
struct PolyFit {
    std::vector<double> coefficients;  // constant term first
    double r_squared = 0.0;

    double operator()(double x) const
    {
        double y = 0.0, p = 1.0;
        for (double c : coefficients) {
            y += c * p;
            p *= x;
        }
        return y;
    }
};

inline PolyFit fit_polynomial(std::span<const double> x, std::span<const double> y,
                              std::size_t degree)
{
    if (x.size() != y.size() || x.size() < degree + 1) {
        throw InputError("polynomial fit of degree " + std::to_string(degree) + " needs at least " +
                         std::to_string(degree + 1) + " paired points");
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto k = static_cast<Eigen::Index>(degree + 1);
    // Scale x to [0, 1] so the normal equations stay well conditioned.
    const double scale = std::max(1.0, *std::ranges::max_element(x));
    Eigen::MatrixXd a(n, k);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = 1.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            a(i, j) = p;
            p *= x[static_cast<std::size_t>(i)] / scale;
        }
        b(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    PolyFit fit;
    double s = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
        fit.coefficients.push_back(c(j) / s);
        s *= scale;
    }
    const double mean = b.mean();
    const double ss_tot = (b.array() - mean).square().sum();
    const double ss_res = (a * c - b).squaredNorm();
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

/// Scaling analysis over one mode's records, fitted on (L, total time).
struct ScalingSummary {
    BenchMode mode;
    PolyFit linear;
    PolyFit quadratic;
    std::vector<std::pair<std::size_t, double>> doubling_ratios;  // (L, T(2L)/T(L))
};

inline std::vector<ScalingSummary> summarize_bench(std::span<const BenchRecord> records)
{
    std::map<BenchMode, std::vector<const BenchRecord*>> by_mode;
    for (const auto& r : records) {
        by_mode[r.mode].push_back(&r);
    }
    std::vector<ScalingSummary> out;
    for (const auto& [mode, rs] : by_mode) {
        std::vector<double> x, y;
        std::map<std::size_t, double> total;
        for (const auto* r : rs) {
            x.push_back(static_cast<double>(r->length));
            y.push_back(r->mean_total_s());
            total[r->length] = r->mean_total_s();
        }
        ScalingSummary s{mode, {}, {}, {}};
        if (x.size() >= 2) {
            s.linear = fit_polynomial(x, y, 1);
        }
        if (x.size() >= 3) {
            s.quadratic = fit_polynomial(x, y, 2);
        }
        for (const auto& [len, t] : total) {
            if (auto it = total.find(2 * len); it != total.end()) {
                s.doubling_ratios.emplace_back(len, it->second / t);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Human-readable summary: fits per mode and speedups at each shared length.
inline std::string bench_report(std::span<const BenchRecord> records)
{
    std::string out;
    char buf[256];
    for (const auto& s : summarize_bench(records)) {
        std::snprintf(buf, sizeof buf, "%s: linear R^2 %.4f, quadratic R^2 %.4f\n",
                      to_string(s.mode).c_str(), s.linear.r_squared, s.quadratic.r_squared);
        out += buf;
        for (const auto& [len, ratio] : s.doubling_ratios) {
            std::snprintf(buf, sizeof buf, "  T(%zu)/T(%zu) = %.3f\n", 2 * len, len, ratio);
            out += buf;
        }
    }
    std::map<std::size_t, double> rec, ar;
    for (const auto& r : records) {
        (r.mode == BenchMode::recurrent ? rec : ar)[r.length] = r.mean_s_per_token;
    }
    for (const auto& [len, t] : rec) {
        if (auto it = ar.find(len); it != ar.end()) {
            std::snprintf(buf, sizeof buf, "speedup at L=%zu: %.2fx\n", len, it->second / t);
            out += buf;
        }
    }
    return out;
}

} // namespace flashvid
