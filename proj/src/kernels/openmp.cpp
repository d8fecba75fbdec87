// SPDX-License-Identifier: Apache-2.0

// OpenMP kernels. Work is split over independent outputs only; see
// kernels.hpp for the ordering contract against the serial reference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <omp.h>

#include "unncsi/kernels.hpp"

namespace unncsi::kernels::openmp {

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) { omp_set_num_threads(std::max(1, n)); }

namespace {

using Index = std::int64_t;

// Each thread owns a contiguous range of rows or channels and sweeps positions.
inline std::pair<std::size_t, std::size_t> channel_range(std::size_t channels)
{
    const std::size_t t = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t nt = static_cast<std::size_t>(omp_get_num_threads());
    return {channels * t / nt, channels * (t + 1) / nt};
}

template <typename T>
void channel_product(std::span<const T> x, std::size_t positions, std::size_t k_in, std::span<const T> w,
                     std::size_t k_out, std::span<T> y)
{
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < static_cast<Index>(positions); ++p) {
        T *yr = y.data() + p * k_out;
        std::fill(yr, yr + k_out, T{});
        for (std::size_t i = 0; i < k_in; ++i) {
            const T xi = x[p * k_in + i];
            const T *wr = w.data() + i * k_out;
            for (std::size_t j = 0; j < k_out; ++j)
                yr[j] += xi * wr[j];
        }
    }
}

template <typename T>
void channel_product_grad_weight(std::span<const T> x, std::span<const T> dy, std::size_t positions,
                                 std::size_t k_in, std::size_t k_out, std::span<T> dw)
{
#pragma omp parallel
    {
        const auto [i0, i1] = channel_range(k_in);
        const T *xs = x.data();
        const T *dys = dy.data();
        T *dws = dw.data();
        std::fill(dws + i0 * k_out, dws + i1 * k_out, T{});
        for (std::size_t p = 0; p < positions; ++p) {
            const T *dyr = dys + p * k_out;
            for (std::size_t i = i0; i < i1; ++i) {
                const T xi = xs[p * k_in + i];
                T *dwr = dws + i * k_out;
                for (std::size_t j = 0; j < k_out; ++j)
                    dwr[j] += xi * dyr[j];
            }
        }
    }
}

template <typename T>
void channel_product_grad_input(std::span<const T> dy, std::span<const T> w, std::size_t positions,
                                std::size_t k_in, std::size_t k_out, std::span<T> dx)
{
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < static_cast<Index>(positions); ++p) {
        const T *dyr = dy.data() + p * k_out;
        for (std::size_t i = 0; i < k_in; ++i) {
            const T *wr = w.data() + i * k_out;
            T acc{};
            for (std::size_t j = 0; j < k_out; ++j)
                acc += dyr[j] * wr[j];
            dx[p * k_in + i] = acc;
        }
    }
}

template <typename T>
void upsample(std::span<const T> x, std::size_t outer, std::size_t inner, const UpsampleTaps &taps, std::span<T> y)
{
    const Index rows = static_cast<Index>(outer * taps.n_out);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const std::size_t o = r / taps.n_out;
        const std::size_t p = r % taps.n_out;
        const T a = static_cast<T>(taps.w_lo[p]);
        const T b = static_cast<T>(taps.w_hi[p]);
        const T *lo = x.data() + (o * taps.n_in + taps.lo[p]) * inner;
        const T *hi = x.data() + (o * taps.n_in + taps.hi[p]) * inner;
        T *out = y.data() + r * inner;
        for (std::size_t i = 0; i < inner; ++i)
            out[i] = a * lo[i] + b * hi[i];
    }
}

template <typename T>
void upsample_adjoint(std::span<const T> dy, std::size_t outer, std::size_t inner, const UpsampleTaps &taps,
                      std::span<T> dx)
{
    const Index rows = static_cast<Index>(outer * taps.n_in);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const std::size_t o = r / taps.n_in;
        const std::size_t s = r % taps.n_in;
        T *out = dx.data() + r * inner;
        std::fill(out, out + inner, T{});
        for (std::size_t e = taps.adj_begin[s]; e < taps.adj_begin[s + 1]; ++e) {
            const T w = static_cast<T>(taps.adj_w[e]);
            const T *g = dy.data() + (o * taps.n_out + taps.adj_out[e]) * inner;
            for (std::size_t i = 0; i < inner; ++i)
                out[i] += w * g[i];
        }
    }
}

template <typename T>
void relu(std::span<const T> x, std::span<T> y)
{
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(x.size()); ++i)
        y[i] = x[i] > T{} ? x[i] : T{};
}

template <typename T>
void relu_backward(std::span<const T> pre, std::span<const T> dy, std::span<T> dx)
{
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(pre.size()); ++i)
        dx[i] = pre[i] > T{} ? dy[i] : T{};
}

template <typename T>
void batch_norm(std::span<const T> x, std::size_t positions, std::size_t channels, std::span<const T> gamma,
                std::span<const T> beta, double eps, std::span<T> y, std::span<T> xhat, std::span<T> inv_std)
{
    const double n = static_cast<double>(positions);
#pragma omp parallel
    {
        const auto [j0, j1] = channel_range(channels);
        std::vector<double> mean(j1 - j0, 0.0), sq(j1 - j0, 0.0);
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = j0; j < j1; ++j)
                mean[j - j0] += static_cast<double>(x[p * channels + j]);
        for (auto& m : mean)
            m /= n;
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = j0; j < j1; ++j) {
                const double d = static_cast<double>(x[p * channels + j]) - mean[j - j0];
                sq[j - j0] += d * d;
            }
        for (std::size_t j = j0; j < j1; ++j)
            inv_std[j] = static_cast<T>(1.0 / std::sqrt(sq[j - j0] / n + eps));
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = j0; j < j1; ++j) {
                const std::size_t k = p * channels + j;
                const T h = static_cast<T>((static_cast<double>(x[k]) - mean[j - j0]) *
                                           static_cast<double>(inv_std[j]));
                xhat[k] = h;
                y[k] = gamma[j] * h + beta[j];
            }
    }
}

template <typename T>
void batch_norm_backward(std::span<const T> dy, std::span<const T> xhat, std::span<const T> inv_std,
                         std::span<const T> gamma, std::size_t positions, std::size_t channels, std::span<T> dx,
                         std::span<T> dgamma, std::span<T> dbeta)
{
    const double n = static_cast<double>(positions);
#pragma omp parallel
    {
        const auto [j0, j1] = channel_range(channels);
        std::vector<double> sdy(j1 - j0, 0.0), sdyx(j1 - j0, 0.0);
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = j0; j < j1; ++j) {
                const std::size_t k = p * channels + j;
                sdy[j - j0] += static_cast<double>(dy[k]);
                sdyx[j - j0] += static_cast<double>(dy[k]) * static_cast<double>(xhat[k]);
            }
        for (std::size_t j = j0; j < j1; ++j) {
            dgamma[j] = static_cast<T>(sdyx[j - j0]);
            dbeta[j] = static_cast<T>(sdy[j - j0]);
        }
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t j = j0; j < j1; ++j) {
                const std::size_t k = p * channels + j;
                const double scale = static_cast<double>(gamma[j]) * static_cast<double>(inv_std[j]) / n;
                dx[k] = static_cast<T>(scale * (n * static_cast<double>(dy[k]) - sdy[j - j0] -
                                                static_cast<double>(xhat[k]) * sdyx[j - j0]));
            }
    }
}

template <typename T>
void tanh_forward(std::span<const T> x, std::span<T> y)
{
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(x.size()); ++i)
        y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_backward(std::span<const T> y, std::span<const T> dy, std::span<T> dx)
{
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(y.size()); ++i)
        dx[i] = dy[i] * (T{1} - y[i] * y[i]);
}

template <typename T>
double mse(std::span<const T> out, std::span<const T> target)
{
    const std::size_t blocks = (out.size() + kReductionBlock - 1) / kReductionBlock;
    std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
    for (Index b = 0; b < static_cast<Index>(blocks); ++b) {
        const std::size_t s = b * kReductionBlock;
        const std::size_t e = std::min(out.size(), s + kReductionBlock);
        double block = 0.0;
        for (std::size_t i = s; i < e; ++i) {
            const double d = static_cast<double>(out[i]) - static_cast<double>(target[i]);
            block += d * d;
        }
        partial[b] = block;
    }
    double total = 0.0;
    for (double v : partial)
        total += v;
    return total / static_cast<double>(out.size());
}

template <typename T>
void mse_grad(std::span<const T> out, std::span<const T> target, std::span<T> dout)
{
    const double s = 2.0 / static_cast<double>(out.size());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < static_cast<Index>(out.size()); ++i)
        dout[i] = static_cast<T>(s * (static_cast<double>(out[i]) - static_cast<double>(target[i])));
}

template <typename T>
const KernelSet<T> kTable{
    &channel_product<T>, &channel_product_grad_weight<T>, &channel_product_grad_input<T>, &upsample<T>,
    &upsample_adjoint<T>, &relu<T>, &relu_backward<T>, &batch_norm<T>, &batch_norm_backward<T>,
    &tanh_forward<T>, &tanh_backward<T>, &mse<T>, &mse_grad<T>,
};

} // namespace

template <typename T>
const KernelSet<T> &table()
{
    return kTable<T>;
}

template const KernelSet<float> &table();
template const KernelSet<double> &table();

} // namespace unncsi::kernels::openmp
