// Copyright 2026 The flashvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "flashvid/error.hpp"

namespace flashvid {

#ifdef FLASHVID_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "x" : "") << shape[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major tensor. The gradient buffer is empty until something
/// accumulates into it.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill)
    {
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (shape_numel(shape_) != data_.size()) {
            throw ShapeError("shape " + shape_string(shape_) + " does not hold " +
                             std::to_string(data_.size()) + " elements");
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }

    static Tensor identity(std::size_t n)
    {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) {
            t(i, i) = T(1);
        }
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    /// Leading dimensions collapsed; a rank-1 tensor is one row.
    std::size_t rows() const { return shape_.empty() ? 1 : size() / shape_.back(); }
    std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }
    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
    std::span<const T> row(std::size_t r) const
    {
        return std::span<const T>(data_).subspan(r * cols(), cols());
    }

    bool has_grad() const { return !grad_.empty(); }
    std::span<T> grad() { return grad_; }
    std::span<const T> grad() const { return grad_; }

    /// Allocates (zeroed) on first use.
    std::span<T> ensure_grad()
    {
        if (grad_.size() != data_.size()) {
            grad_.assign(data_.size(), T(0));
        }
        return grad_;
    }

    void zero_grad() { std::fill(grad_.begin(), grad_.end(), T(0)); }
    void drop_grad() { grad_.clear(); }

    bool operator==(const Tensor& other) const
    {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    Shape shape_;
    std::vector<T> data_;
    std::vector<T> grad_;
};

namespace kernel {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <class T>
ConstMatrixMap<T> view(std::span<const T> data, std::size_t rows, std::size_t cols)
{
    return ConstMatrixMap<T>(data.data(), static_cast<Eigen::Index>(rows),
                             static_cast<Eigen::Index>(cols));
}

template <class T>
MatrixMap<T> view(std::span<T> data, std::size_t rows, std::size_t cols)
{
    return MatrixMap<T>(data.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

/// out (+)= a[m x k] * b[k x n]
template <class T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate = false)
{
    auto c = view(out, m, n);
    if (accumulate) {
        c.noalias() += view(a, m, k) * view(b, k, n);
    } else {
        c.noalias() = view(a, m, k) * view(b, k, n);
    }
}

/// out (+)= a[m x k] * b[n x k]^T
template <class T>
void gemm_nt(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false)
{
    auto c = view(out, m, n);
    if (accumulate) {
        c.noalias() += view(a, m, k) * view(b, n, k).transpose();
    } else {
        c.noalias() = view(a, m, k) * view(b, n, k).transpose();
    }
}

/// out (+)= a[k x m]^T * b[k x n]
template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> out, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false)
{
    auto c = view(out, m, n);
    if (accumulate) {
        c.noalias() += view(a, k, m).transpose() * view(b, k, n);
    } else {
        c.noalias() = view(a, k, m).transpose() * view(b, k, n);
    }
}

template <class T>
T sigmoid(T x)
{
    return T(1) / (T(1) + std::exp(-x));
}

/// In-place 2-D rotation of consecutive pairs by position * theta[j];
/// the conjugate rotation negates the angle.
template <class T>
void rotate_pairs(std::span<T> x, double position, std::span<const double> thetas, bool conjugate)
{
    const double sign = conjugate ? -1.0 : 1.0;
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        const double angle = sign * position * thetas[j];
        const T c = static_cast<T>(std::cos(angle));
        const T s = static_cast<T>(std::sin(angle));
        const T a = x[2 * j];
        const T b = x[2 * j + 1];
        x[2 * j] = a * c - b * s;
        x[2 * j + 1] = a * s + b * c;
    }
}

/// Row-wise RMS normalization with per-column gain. Returns the inverse RMS of
/// each row through inv_rms when non-empty.
template <class T>
void rms_norm_rows(std::span<const T> x, std::span<const T> gain, std::span<T> out,
                   std::size_t rows, std::size_t d, T eps, std::span<T> inv_rms = {})
{
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * d;
        T sq = T(0);
        for (std::size_t c = 0; c < d; ++c) {
            sq += xr[c] * xr[c];
        }
        const T ms = sq / static_cast<T>(d) + eps;
        const T inv = ms > T(0) ? T(1) / std::sqrt(ms) : T(0);
        T* orow = out.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            orow[c] = xr[c] * inv * gain[c];
        }
        if (!inv_rms.empty()) {
            inv_rms[r] = inv;
        }
    }
}

/// Max-subtracted softmax of one row.
template <class T>
void softmax_row(std::span<const T> logits, std::span<T> out)
{
    T mx = logits[0];
    for (T v : logits) {
        if (!std::isfinite(v)) {
            throw NumericError("softmax input contains a non-finite value");
        }
        mx = std::max(mx, v);
    }
    T sum = T(0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (T& v : out) {
        v /= sum;
    }
}

} // namespace kernel

} // namespace flashvid
