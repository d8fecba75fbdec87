// SPDX-License-Identifier: Apache-2.0

#pragma once

// Small decoders covering every layer arrangement, plus a central-difference
// gradient check shared by the unit and acceptance suites.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "unncsi/fit.hpp"
#include "unncsi/rng.hpp"

namespace tiny {

using unncsi::DecoderSpec;

struct Case {
    std::string name;
    DecoderSpec spec;
};

inline DecoderSpec make(unncsi::Shape seed, std::vector<std::size_t> widths, std::size_t inner, std::size_t pre,
                        std::vector<std::vector<bool>> up, std::uint64_t seed_value = 7)
{
    DecoderSpec s;
    s.seed_extents = std::move(seed);
    s.widths = std::move(widths);
    s.inner_layers = inner;
    s.preoutput_layers = pre;
    s.upsample = std::move(up);
    s.seed_rule = {seed_value, 0.15};
    s.check();
    return s;
}

inline std::vector<Case> cases()
{
    return {
        {"3-way, both modes upsampled", make({2, 3}, {3, 4, 3, 4}, 2, 0, {{true, true}, {true, true}})},
        {"3-way, first mode only", make({2, 2}, {2, 3, 3, 2}, 1, 1, {{true, false}})},
        {"3-way, second mode only, stacked pre-output", make({3, 2}, {3, 3, 2, 4, 2}, 1, 2, {{false, true}})},
        {"3-way, mixed per-layer flags", make({2, 2}, {2, 3, 3, 3, 4}, 2, 1, {{true, false}, {false, true}})},
        {"3-way, no inner layers", make({3, 3}, {3, 4, 4, 2}, 0, 2, {})},
        {"4-way, UE mode fixed", make({2, 2, 2}, {2, 3, 3, 4}, 1, 1, {{true, true, false}})},
        {"4-way, UE mode upsampled", make({1, 2, 1}, {2, 3, 3, 2}, 1, 1, {{true, true, true}})},
        {"4-way, inner layer without upsampling", make({2, 2, 3}, {2, 3, 2, 2}, 1, 1, {{false, false, false}})},
    };
}

inline unncsi::RealTensor random_target(const DecoderSpec &spec, std::uint64_t seed)
{
    unncsi::RealTensor t(spec.output_dims());
    unncsi::SplitMix64 rng(seed);
    for (auto &v : t.data())
        v = rng.uniform(-0.6, 0.6);
    return t;
}

struct GradientCheck {
    std::size_t parameters = 0;
    std::size_t failures = 0;
    double worst_relative = 0.0;
    std::uint64_t seed = 0; // parameter seed of the point that was checked
};

// Parameters from seed with gamma and beta drawn away from their defaults so
// their gradients are exercised.
inline unncsi::ParamSet<double> check_point(const DecoderSpec &spec, std::uint64_t seed)
{
    auto params = unncsi::init_params<double>(spec, seed);
    unncsi::SplitMix64 rng(seed + 200);
    for (std::size_t l = 0; l < params.layers(); ++l) {
        for (auto &g : params.gamma(l))
            g = rng.uniform(0.5, 1.5);
        for (auto &b : params.beta(l))
            b = rng.uniform(-0.3, 0.3);
    }
    return params;
}

// True when no ReLU input changes sign as any single parameter moves by +-h,
// so the loss is smooth over every central-difference stencil.
inline bool kink_free(const DecoderSpec &spec, unncsi::ParamSet<double> params, const unncsi::RealTensor &z0,
                      double h)
{
    std::vector<bool> base, moved;
    oracle::forward(spec, params, z0, &base);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params.values()[i];
        for (double s : {saved + h, saved - h}) {
            params.values()[i] = s;
            moved.clear();
            oracle::forward(spec, params, z0, &moved);
            if (moved != base)
                return false;
        }
        params.values()[i] = saved;
    }
    return true;
}

// First parameter seed from `seed` upward whose stencils of half-width h
// avoid ReLU kinks.
inline std::uint64_t kink_free_seed(const DecoderSpec &spec, std::uint64_t seed, double h)
{
    const auto z0 = unncsi::generate_seed(spec).as<double>();
    for (std::uint64_t s = seed; s < seed + 1000; ++s)
        if (kink_free(spec, check_point(spec, s), z0, h))
            return s;
    throw std::runtime_error("no kink-free check point found");
}

// Central difference of the MSE along parameter i.
inline double central_difference(const DecoderSpec &spec, unncsi::ParamSet<double> &params,
                                 const unncsi::RealTensor &z0, const unncsi::RealTensor &target, std::size_t i,
                                 double h)
{
    using unncsi::Backend;
    const double saved = params.values()[i];
    params.values()[i] = saved + h;
    const double up = unncsi::loss(spec, params, z0, target, Backend::serial);
    params.values()[i] = saved - h;
    const double down = unncsi::loss(spec, params, z0, target, Backend::serial);
    params.values()[i] = saved;
    return (up - down) / (2.0 * h);
}

// Central differences of the MSE in double with step h at the kink-free
// point found from `seed`. Entries whose gradients are both below abs_floor
// count as matching.
inline GradientCheck check_gradient(const DecoderSpec &spec, std::uint64_t seed, double h = 1e-3,
                                    double tolerance = 1e-4, double abs_floor = 1e-9)
{
    using namespace unncsi;
    const auto z0 = generate_seed(spec).as<double>();
    const auto target = random_target(spec, seed + 100);
    GradientCheck r;
    r.seed = kink_free_seed(spec, seed, h);
    auto params = check_point(spec, r.seed);
    const auto grad = gradient(spec, params, z0, target, Backend::serial);
    r.parameters = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double fd = central_difference(spec, params, z0, target, i, h), g = grad.values()[i];
        const double scale = std::max(std::abs(fd), std::abs(g));
        if (scale < abs_floor)
            continue;
        const double rel = std::abs(fd - g) / scale;
        r.worst_relative = std::max(r.worst_relative, rel);
        if (!(rel < tolerance))
            ++r.failures;
    }
    return r;
}

} // namespace tiny
