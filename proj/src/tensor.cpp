// SPDX-License-Identifier: Apache-2.0

#include "unncsi/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace unncsi {

std::string shape_string(const Shape &dims)
{
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i)
            s += "x";
        s += std::to_string(dims[i]);
    }
    return s + ")";
}

namespace {

std::vector<std::size_t> cyclic_order(std::size_t mode, std::size_t rank)
{
    std::vector<std::size_t> order;
    for (std::size_t k = 1; k < rank; ++k)
        order.push_back((mode + k) % rank);
    return order;
}

void check_mode(std::size_t mode, std::size_t rank)
{
    if (mode >= rank)
        throw DimensionError("mode index " + std::to_string(mode) + " out of range for rank " + std::to_string(rank));
}

// Calls f(flat_offset, column) for every entry, column following the cyclic
// unfolding rule.
template <typename F>
void for_each_unfolded(const Shape &dims, std::size_t mode, F &&f)
{
    const std::size_t rank = dims.size();
    const auto order = cyclic_order(mode, rank);
    std::vector<std::size_t> idx(rank, 0);
    const std::size_t total = shape_size(dims);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t col = 0;
        for (auto m : order)
            col = col * dims[m] + idx[m];
        f(flat, idx[mode], col);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < dims[d])
                break;
            idx[d] = 0;
        }
    }
}

} // namespace

template <typename T>
Matrix<T> unfold(const Tensor<T> &t, std::size_t mode)
{
    check_mode(mode, t.rank());
    Matrix<T> m(t.extent(mode), t.size() / t.extent(mode));
    for_each_unfolded(t.dims(), mode, [&](std::size_t flat, std::size_t row, std::size_t col) { m(row, col) = t[flat]; });
    return m;
}

template <typename T>
Tensor<T> fold(const Matrix<T> &m, std::size_t mode, const Shape &dims)
{
    check_mode(mode, dims.size());
    if (m.rows != dims[mode] || m.rows * m.cols != shape_size(dims))
        throw DimensionError("fold: matrix " + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                             " incompatible with " + shape_string(dims));
    Tensor<T> t(dims);
    for_each_unfolded(dims, mode, [&](std::size_t flat, std::size_t row, std::size_t col) { t[flat] = m(row, col); });
    return t;
}

template <typename T>
Tensor<T> mode_product(const Tensor<T> &t, const Matrix<T> &u, std::size_t mode)
{
    check_mode(mode, t.rank());
    if (u.cols != t.extent(mode))
        throw DimensionError("mode_product: matrix has " + std::to_string(u.cols) + " columns, mode " +
                             std::to_string(mode) + " has extent " + std::to_string(t.extent(mode)));
    const auto &dims = t.dims();
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < mode; ++d)
        outer *= dims[d];
    for (std::size_t d = mode + 1; d < dims.size(); ++d)
        inner *= dims[d];
    const std::size_t n = dims[mode];

    Shape out_dims = dims;
    out_dims[mode] = u.rows;
    Tensor<T> out(out_dims);
    auto src = t.data();
    auto dst = out.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t r = 0; r < u.rows; ++r) {
            T *row = dst.data() + (o * u.rows + r) * inner;
            for (std::size_t k = 0; k < n; ++k) {
                const T w = u(r, k);
                const T *col = src.data() + (o * n + k) * inner;
                for (std::size_t i = 0; i < inner; ++i)
                    row[i] += w * col[i];
            }
        }
    return out;
}

template <typename T>
Matrix<T> matmul(const Matrix<T> &a, const Matrix<T> &b)
{
    if (a.cols != b.rows)
        throw DimensionError("matmul: inner dimensions differ");
    Matrix<T> c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k)
            for (std::size_t j = 0; j < b.cols; ++j)
                c(i, j) += a(i, k) * b(k, j);
    return c;
}

UpsampleOperator make_upsampler(std::size_t n, std::size_t mode)
{
    if (n == 0)
        throw DimensionError("upsampler source extent must be positive");
    UpsampleOperator op;
    op.source_extent = n;
    op.mode = mode;
    op.taps.reserve(2 * n);
    const double last = static_cast<double>(n - 1);
    for (std::size_t p = 0; p < 2 * n; ++p) {
        const double s = std::clamp((static_cast<double>(p) + 0.5) / 2.0 - 0.5, 0.0, last);
        const auto lo = static_cast<std::size_t>(std::floor(s));
        const double frac = s - static_cast<double>(lo);
        const std::size_t hi = std::min(lo + 1, n - 1);
        op.taps.push_back({lo, hi, 1.0 - frac, frac});
    }
    return op;
}

Matrix<double> UpsampleOperator::matrix() const
{
    Matrix<double> m(taps.size(), source_extent);
    for (std::size_t p = 0; p < taps.size(); ++p) {
        m(p, taps[p].lo) += taps[p].w_lo;
        m(p, taps[p].hi) += taps[p].w_hi;
    }
    return m;
}

#define UNNCSI_INSTANTIATE(T)                                                                                          \
    template Matrix<T> unfold(const Tensor<T> &, std::size_t);                                                        \
    template Tensor<T> fold(const Matrix<T> &, std::size_t, const Shape &);                                           \
    template Tensor<T> mode_product(const Tensor<T> &, const Matrix<T> &, std::size_t);                               \
    template Matrix<T> matmul(const Matrix<T> &, const Matrix<T> &);

UNNCSI_INSTANTIATE(float)
UNNCSI_INSTANTIATE(double)
UNNCSI_INSTANTIATE(std::complex<double>)

#undef UNNCSI_INSTANTIATE

} // namespace unncsi
