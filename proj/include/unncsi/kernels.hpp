// SPDX-License-Identifier: Apache-2.0

#pragma once

// Decoder compute kernels. Activations are (positions x channels) blocks,
// channel index fastest. Two implementations share every signature: a plain
// serial reference and an OpenMP version. Each output element is produced by
// one thread with the same accumulation order as the reference, so the two
// agree bit for bit regardless of thread count.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "unncsi/tensor.hpp"

namespace unncsi {

enum class Backend { serial, openmp };

Backend backend_from_string(std::string_view name);
std::string_view to_string(Backend b);

// Forward taps plus the gather form of the adjoint.
struct UpsampleTaps {
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::vector<std::size_t> lo, hi;
    std::vector<double> w_lo, w_hi;
    // For each source index s: entries adj_out/adj_w in [adj_begin[s], adj_begin[s+1]).
    std::vector<std::size_t> adj_begin, adj_out;
    std::vector<double> adj_w;

    explicit UpsampleTaps(const UpsampleOperator &op);
};

inline constexpr std::size_t kReductionBlock = 4096;

namespace kernels {

template <typename T>
struct KernelSet {
    // y[p, j] = sum_i x[p, i] w[i, j]
    void (*channel_product)(std::span<const T> x, std::size_t positions, std::size_t k_in, std::span<const T> w,
                            std::size_t k_out, std::span<T> y);
    // dw = x^T dy (overwrites dw)
    void (*channel_product_grad_weight)(std::span<const T> x, std::span<const T> dy, std::size_t positions,
                                        std::size_t k_in, std::size_t k_out, std::span<T> dw);
    // dx = dy w^T (overwrites dx)
    void (*channel_product_grad_input)(std::span<const T> dy, std::span<const T> w, std::size_t positions,
                                       std::size_t k_in, std::size_t k_out, std::span<T> dx);
    // Tensor viewed as (outer, n_in, inner) -> (outer, n_out, inner).
    void (*upsample)(std::span<const T> x, std::size_t outer, std::size_t inner, const UpsampleTaps &taps,
                     std::span<T> y);
    void (*upsample_adjoint)(std::span<const T> dy, std::size_t outer, std::size_t inner, const UpsampleTaps &taps,
                             std::span<T> dx);
    void (*relu)(std::span<const T> x, std::span<T> y);
    void (*relu_backward)(std::span<const T> pre, std::span<const T> dy, std::span<T> dx);
    // Per-channel normalisation over positions with population variance.
    void (*batch_norm)(std::span<const T> x, std::size_t positions, std::size_t channels, std::span<const T> gamma,
                       std::span<const T> beta, double eps, std::span<T> y, std::span<T> xhat,
                       std::span<T> inv_std);
    void (*batch_norm_backward)(std::span<const T> dy, std::span<const T> xhat, std::span<const T> inv_std,
                                std::span<const T> gamma, std::size_t positions, std::size_t channels,
                                std::span<T> dx, std::span<T> dgamma, std::span<T> dbeta);
    void (*tanh_forward)(std::span<const T> x, std::span<T> y);
    void (*tanh_backward)(std::span<const T> y, std::span<const T> dy, std::span<T> dx);
    // Mean squared error, summed in fixed blocks of kReductionBlock entries.
    double (*mse)(std::span<const T> out, std::span<const T> target);
    // dout = 2 (out - target) / N
    void (*mse_grad)(std::span<const T> out, std::span<const T> target, std::span<T> dout);
};

template <typename T>
const KernelSet<T> &get(Backend backend);

namespace serial {
template <typename T>
const KernelSet<T> &table();
}

namespace openmp {
template <typename T>
const KernelSet<T> &table();
int max_threads();
void set_threads(int n);
} // namespace openmp

} // namespace kernels
} // namespace unncsi
