// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. Nothing here calls into the
// code paths it is used to check.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "flashvid/autodiff.hpp"
#include "flashvid/interpolation.hpp"
#include "flashvid/rng.hpp"

namespace flashvid::testing {

inline Tensor<double> random_tensor(Shape shape, SplitMix64& rng, double scale = 1.0)
{
    Tensor<double> t(std::move(shape));
    for (auto& v : t.storage()) {
        v = scale * (2.0 * rng.uniform() - 1.0);
    }
    return t;
}

inline Tensor<double> triple_loop_matmul(const Tensor<double>& a, const Tensor<double>& b)
{
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<double> c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                s += a(i, p) * b(p, j);
            }
            c(i, j) = s;
        }
    }
    return c;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

/// Scalar function of a set of parameter tensors, built on a tape.
using TapeLoss = std::function<Var(Tape<double>&, std::vector<Var>&)>;

/// Norm-wise relative error ||analytic - numeric|| / ||numeric|| over all
/// parameters, with numeric gradients from central differences.
inline double gradient_check(std::vector<Tensor<double>*> params, const TapeLoss& loss,
                             double step = 1e-4)
{
    auto evaluate = [&]() {
        Tape<double> tape(Tape<double>::Mode::inference);
        std::vector<Var> vars;
        for (auto* p : params) {
            vars.push_back(tape.constant_ref(*p));
        }
        return tape.value(loss(tape, vars))[0];
    };

    for (auto* p : params) {
        p->ensure_grad();
        p->zero_grad();
    }
    {
        Tape<double> tape;
        std::vector<Var> vars;
        for (auto* p : params) {
            vars.push_back(tape.leaf(*p));
        }
        tape.backward(loss(tape, vars));
    }

    double diff_sq = 0.0, ref_sq = 0.0;
    for (auto* p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double saved = (*p)[i];
            (*p)[i] = saved + step;
            const double up = evaluate();
            (*p)[i] = saved - step;
            const double down = evaluate();
            (*p)[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = p->grad()[i];
            diff_sq += (analytic - numeric) * (analytic - numeric);
            ref_sq += numeric * numeric;
        }
    }
    return std::sqrt(diff_sq) / std::max(std::sqrt(ref_sq), 1e-12);
}

/// Position-wise diff followed by an exhaustive radius-r neighborhood scan.
struct BruteForceClasses {
    std::vector<char> cls;  // 'D', 'U', 'S' (inheritable not distinguished)
    std::size_t different = 0, unstable = 0, stable = 0;
};

inline BruteForceClasses brute_force_classes(const FrameGrid& a, const FrameGrid& b,
                                             std::size_t radius)
{
    BruteForceClasses out;
    const auto rows = static_cast<long>(a.rows), cols = static_cast<long>(a.cols);
    const auto r = static_cast<long>(radius);
    for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) {
            const auto pos = static_cast<std::size_t>(i * cols + j);
            char c = 'S';
            if (a.tokens[pos] != b.tokens[pos]) {
                c = 'D';
            } else {
                for (long y = 0; y < rows && c == 'S'; ++y) {
                    for (long x = 0; x < cols; ++x) {
                        const auto q = static_cast<std::size_t>(y * cols + x);
                        if (std::max(std::abs(y - i), std::abs(x - j)) <= r &&
                            a.tokens[q] != b.tokens[q]) {
                            c = 'U';
                            break;
                        }
                    }
                }
            }
            out.cls.push_back(c);
            (c == 'D' ? out.different : c == 'U' ? out.unstable : out.stable) += 1;
        }
    }
    return out;
}

/// Direct evaluation of out[n] = sum_{m<=n} gamma^(n-m) (q_n . k_m) v_m for
/// one head, with q, k, v already projected and rotated.
inline Tensor<double> naive_retention_head(const Tensor<double>& q, const Tensor<double>& k,
                                           const Tensor<double>& v, double gamma)
{
    const std::size_t len = q.dim(0), d = q.dim(1), dv = v.dim(1);
    Tensor<double> out({len, dv});
    for (std::size_t n = 0; n < len; ++n) {
        for (std::size_t m = 0; m <= n; ++m) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                dot += q(n, i) * k(m, i);
            }
            const double w = std::pow(gamma, static_cast<double>(n - m)) * dot;
            for (std::size_t i = 0; i < dv; ++i) {
                out(n, i) += w * v(m, i);
            }
        }
    }
    return out;
}

} // namespace flashvid::testing
