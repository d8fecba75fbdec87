// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>
#include <string>

#include "unncsi/kernels.hpp"

namespace unncsi {

Backend backend_from_string(std::string_view name)
{
    if (name == "serial")
        return Backend::serial;
    if (name == "openmp")
        return Backend::openmp;
    throw std::invalid_argument("unknown backend '" + std::string(name) + "' (expected serial or openmp)");
}

std::string_view to_string(Backend b) { return b == Backend::serial ? "serial" : "openmp"; }

UpsampleTaps::UpsampleTaps(const UpsampleOperator &op) : n_in(op.source_extent), n_out(op.target_extent())
{
    for (const auto &t : op.taps) {
        lo.push_back(t.lo);
        hi.push_back(t.hi);
        w_lo.push_back(t.w_lo);
        w_hi.push_back(t.w_hi);
    }
    // Adjoint entries per source in the same (p ascending, lo before hi) order
    // the scatter form visits them.
    std::vector<std::vector<std::pair<std::size_t, double>>> per_source(n_in);
    for (std::size_t p = 0; p < n_out; ++p) {
        per_source[lo[p]].emplace_back(p, w_lo[p]);
        per_source[hi[p]].emplace_back(p, w_hi[p]);
    }
    adj_begin.push_back(0);
    for (const auto &entries : per_source) {
        for (const auto &[p, w] : entries) {
            adj_out.push_back(p);
            adj_w.push_back(w);
        }
        adj_begin.push_back(adj_out.size());
    }
}

namespace kernels {

template <typename T>
const KernelSet<T> &get(Backend backend)
{
    return backend == Backend::serial ? serial::table<T>() : openmp::table<T>();
}

template const KernelSet<float> &get(Backend);
template const KernelSet<double> &get(Backend);

} // namespace kernels
} // namespace unncsi
