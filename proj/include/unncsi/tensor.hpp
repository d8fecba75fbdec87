// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace unncsi {

using Shape = std::vector<std::size_t>;

class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline std::size_t shape_size(const Shape &dims)
{
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape &dims);

// Dense D-way tensor, row-major with the last index fastest.
template <typename T>
class Tensor {
  public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape dims) : dims_(std::move(dims)), data_(shape_size(dims_), T{}) { check_dims(); }

    Tensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data))
    {
        check_dims();
        if (data_.size() != shape_size(dims_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                 shape_string(dims_));
    }

    const Shape &dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t mode) const { return dims_.at(mode); }

    std::span<const T> data() const { return data_; }
    std::span<T> data() { return data_; }
    const std::vector<T> &values() const { return data_; }

    T &operator[](std::size_t flat) { return data_[flat]; }
    const T &operator[](std::size_t flat) const { return data_[flat]; }

    std::size_t offset(std::span<const std::size_t> index) const
    {
        std::size_t off = 0;
        for (std::size_t d = 0; d < dims_.size(); ++d)
            off = off * dims_[d] + index[d];
        return off;
    }

    T &at(std::initializer_list<std::size_t> index) { return data_[offset(std::span(index.begin(), index.size()))]; }
    const T &at(std::initializer_list<std::size_t> index) const
    {
        return data_[offset(std::span(index.begin(), index.size()))];
    }

    Tensor reshape(Shape dims) const
    {
        if (shape_size(dims) != data_.size())
            throw DimensionError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
        return Tensor(std::move(dims), data_);
    }

    bool operator==(const Tensor &) const = default;

  private:
    void check_dims() const
    {
        for (auto d : dims_)
            if (d == 0)
                throw DimensionError("tensor extents must be positive: " + shape_string(dims_));
    }

    Shape dims_;
    std::vector<T> data_;
};

using RealTensor = Tensor<double>;
using ComplexTensor = Tensor<std::complex<double>>;

// Row-major dense matrix.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T{}) {}

    T &operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T &operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = T{1};
        return m;
    }

    bool operator==(const Matrix &) const = default;
};

// Mode indices below are zero-based. unfold(t, d) has M_d rows; its columns
// enumerate the remaining indices in cyclic order d+1, ..., D-1, 0, ..., d-1,
// lexicographically (the first listed index varies slowest).
template <typename T>
Matrix<T> unfold(const Tensor<T> &t, std::size_t mode);

template <typename T>
Tensor<T> fold(const Matrix<T> &m, std::size_t mode, const Shape &dims);

template <typename T>
Tensor<T> mode_product(const Tensor<T> &t, const Matrix<T> &u, std::size_t mode);

template <typename T>
Matrix<T> matmul(const Matrix<T> &a, const Matrix<T> &b);

// Linear interpolation 2n -> n with half-pixel centres. Each output row holds
// at most two nonzeros.
struct UpsampleOperator {
    struct Tap {
        std::size_t lo;
        std::size_t hi;
        double w_lo;
        double w_hi;
    };

    std::size_t source_extent = 0;
    std::size_t mode = 0;
    std::vector<Tap> taps;

    std::size_t target_extent() const { return taps.size(); }
    Matrix<double> matrix() const;
};

UpsampleOperator make_upsampler(std::size_t n, std::size_t mode = 0);

} // namespace unncsi
