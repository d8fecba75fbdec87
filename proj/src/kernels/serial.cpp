// SPDX-License-Identifier: Apache-2.0

// Reference kernels. Loop orders favour a single core; accumulation order
// per output element matches the OpenMP kernels exactly.

#include <algorithm>
#include <cmath>
#include <vector>

#include "unncsi/kernels.hpp"

namespace unncsi::kernels::serial {
namespace {

template <typename T>
void channel_product(std::span<const T> x, std::size_t positions, std::size_t k_in, std::span<const T> w,
                     std::size_t k_out, std::span<T> y)
{
    std::fill(y.begin(), y.end(), T{});
    for (std::size_t p = 0; p < positions; ++p) {
        T *yr = y.data() + p * k_out;
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
    std::fill(dw.begin(), dw.end(), T{});
    for (std::size_t p = 0; p < positions; ++p) {
        const T *dyr = dy.data() + p * k_out;
        for (std::size_t i = 0; i < k_in; ++i) {
            const T xi = x[p * k_in + i];
            T *dwr = dw.data() + i * k_out;
            for (std::size_t j = 0; j < k_out; ++j)
                dwr[j] += xi * dyr[j];
        }
    }
}

template <typename T>
void channel_product_grad_input(std::span<const T> dy, std::span<const T> w, std::size_t positions,
                                std::size_t k_in, std::size_t k_out, std::span<T> dx)
{
    for (std::size_t p = 0; p < positions; ++p) {
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
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t p = 0; p < taps.n_out; ++p) {
            const T a = static_cast<T>(taps.w_lo[p]);
            const T b = static_cast<T>(taps.w_hi[p]);
            const T *lo = x.data() + (o * taps.n_in + taps.lo[p]) * inner;
            const T *hi = x.data() + (o * taps.n_in + taps.hi[p]) * inner;
            T *out = y.data() + (o * taps.n_out + p) * inner;
            for (std::size_t i = 0; i < inner; ++i)
                out[i] = a * lo[i] + b * hi[i];
        }
}

template <typename T>
void upsample_adjoint(std::span<const T> dy, std::size_t outer, std::size_t inner, const UpsampleTaps &taps,
                      std::span<T> dx)
{
    std::fill(dx.begin(), dx.end(), T{});
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t p = 0; p < taps.n_out; ++p) {
            const T a = static_cast<T>(taps.w_lo[p]);
            const T b = static_cast<T>(taps.w_hi[p]);
            const T *g = dy.data() + (o * taps.n_out + p) * inner;
            T *lo = dx.data() + (o * taps.n_in + taps.lo[p]) * inner;
            T *hi = dx.data() + (o * taps.n_in + taps.hi[p]) * inner;
            for (std::size_t i = 0; i < inner; ++i)
                lo[i] += a * g[i];
            for (std::size_t i = 0; i < inner; ++i)
                hi[i] += b * g[i];
        }
}

template <typename T>
void relu(std::span<const T> x, std::span<T> y)
{
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] > T{} ? x[i] : T{};
}

template <typename T>
void relu_backward(std::span<const T> pre, std::span<const T> dy, std::span<T> dx)
{
    for (std::size_t i = 0; i < pre.size(); ++i)
        dx[i] = pre[i] > T{} ? dy[i] : T{};
}

template <typename T>
void batch_norm(std::span<const T> x, std::size_t positions, std::size_t channels, std::span<const T> gamma,
                std::span<const T> beta, double eps, std::span<T> y, std::span<T> xhat, std::span<T> inv_std)
{
    std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t j = 0; j < channels; ++j)
            sum[j] += static_cast<double>(x[p * channels + j]);
    const double n = static_cast<double>(positions);
    for (std::size_t j = 0; j < channels; ++j)
        sum[j] /= n;
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t j = 0; j < channels; ++j) {
            const double d = static_cast<double>(x[p * channels + j]) - sum[j];
            sq[j] += d * d;
        }
    for (std::size_t j = 0; j < channels; ++j)
        inv_std[j] = static_cast<T>(1.0 / std::sqrt(sq[j] / n + eps));
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t j = 0; j < channels; ++j) {
            const std::size_t k = p * channels + j;
            const T h = static_cast<T>((static_cast<double>(x[k]) - sum[j]) * static_cast<double>(inv_std[j]));
            xhat[k] = h;
            y[k] = gamma[j] * h + beta[j];
        }
}

template <typename T>
void batch_norm_backward(std::span<const T> dy, std::span<const T> xhat, std::span<const T> inv_std,
                         std::span<const T> gamma, std::size_t positions, std::size_t channels, std::span<T> dx,
                         std::span<T> dgamma, std::span<T> dbeta)
{
    std::vector<double> sdy(channels, 0.0), sdyx(channels, 0.0);
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t j = 0; j < channels; ++j) {
            const std::size_t k = p * channels + j;
            sdy[j] += static_cast<double>(dy[k]);
            sdyx[j] += static_cast<double>(dy[k]) * static_cast<double>(xhat[k]);
        }
    const double n = static_cast<double>(positions);
    for (std::size_t j = 0; j < channels; ++j) {
        dgamma[j] = static_cast<T>(sdyx[j]);
        dbeta[j] = static_cast<T>(sdy[j]);
    }
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t j = 0; j < channels; ++j) {
            const std::size_t k = p * channels + j;
            const double scale = static_cast<double>(gamma[j]) * static_cast<double>(inv_std[j]) / n;
            dx[k] = static_cast<T>(scale * (n * static_cast<double>(dy[k]) - sdy[j] -
                                            static_cast<double>(xhat[k]) * sdyx[j]));
        }
}

template <typename T>
void tanh_forward(std::span<const T> x, std::span<T> y)
{
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_backward(std::span<const T> y, std::span<const T> dy, std::span<T> dx)
{
    for (std::size_t i = 0; i < y.size(); ++i)
        dx[i] = dy[i] * (T{1} - y[i] * y[i]);
}

template <typename T>
double mse(std::span<const T> out, std::span<const T> target)
{
    double total = 0.0;
    for (std::size_t b = 0; b < out.size(); b += kReductionBlock) {
        const std::size_t e = std::min(out.size(), b + kReductionBlock);
        double block = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            const double d = static_cast<double>(out[i]) - static_cast<double>(target[i]);
            block += d * d;
        }
        total += block;
    }
    return total / static_cast<double>(out.size());
}

template <typename T>
void mse_grad(std::span<const T> out, std::span<const T> target, std::span<T> dout)
{
    const double s = 2.0 / static_cast<double>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
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

} // namespace unncsi::kernels::serial
