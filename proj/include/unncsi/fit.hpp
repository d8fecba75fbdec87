// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unncsi/decoder.hpp"

namespace unncsi {

enum class Optimizer { adam, sgd };

struct FitConfig {
    std::size_t iterations = 3000;
    double learning_rate = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t trace_period = 100;
    std::uint64_t init_seed = 1;
    Optimizer optimizer = Optimizer::adam;
    Backend backend = Backend::openmp;

    void check() const;
};

nlohmann::json to_json(const FitConfig &c);
// Missing keys keep the values from base.
FitConfig fit_config_from_json(const nlohmann::json &j, FitConfig base = {});

struct TracePoint {
    std::size_t iteration;
    double mse;

    bool operator==(const TracePoint &) const = default;
};

struct FitReport {
    std::vector<TracePoint> trace; // last entry is the loss of the final params
    ParamSet<float> params;
    double final_mse = 0.0;
    std::size_t iterations = 0;
    double elapsed_s = 0.0;
    std::uint64_t init_seed = 0;
    bool warm_start = false;
};

class FitDiverged : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDivergenceFactor = 1e6;

// Mean over entries of the squared difference between decoder output and target.
template <typename T>
double loss(const DecoderSpec &spec, const ParamSet<T> &params, const Tensor<T> &z0, const Tensor<T> &target,
            Backend backend = Backend::openmp);

template <typename T>
ParamSet<T> gradient(const DecoderSpec &spec, const ParamSet<T> &params, const Tensor<T> &z0,
                     const Tensor<T> &target, Backend backend = Backend::openmp);

// Runs exactly config.iterations optimiser steps. Without init the
// parameters come from init_params(spec, config.init_seed).
FitReport fit(const DecoderSpec &spec, const Tensor<float> &z0, const Tensor<float> &target, const FitConfig &config,
              const std::optional<ParamSet<float>> &init = std::nullopt);

template <typename From>
Tensor<float> to_float(const Tensor<From> &t)
{
    return Tensor<float>(t.dims(), std::vector<float>(t.values().begin(), t.values().end()));
}

// "iteration,mse" rows.
std::string trace_csv(const FitReport &report);
nlohmann::json summary_json(const FitReport &report);

} // namespace unncsi
