// SPDX-License-Identifier: Apache-2.0

#pragma once

// Warm-started fits along a chain of neighbouring UEs, and the per-layer
// kernel distances used to compare warm and random starts.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unncsi/channel.hpp"
#include "unncsi/fit.hpp"

namespace unncsi {

inline constexpr int kRandomInit = 0;

struct TransferStep {
    int target_ue = 0;
    int init_from = kRandomInit; // a UE already fitted by the plan, or kRandomInit

    bool operator==(const TransferStep &) const = default;
};

struct TransferPlan {
    std::string name;
    int base_ue = 0;
    std::vector<TransferStep> chain;

    // Throws std::invalid_argument on forward references, repeats or cycles.
    void check() const;
    std::vector<int> ues() const;
};

TransferPlan transfer_plan_from_json(const nlohmann::json &j);
nlohmann::json to_json(const TransferPlan &plan);

struct UeData {
    PreprocessedTarget target;
    ChannelTensor truth;
};

struct TransferResult {
    int ue = 0;
    int init_from = kRandomInit;
    FitReport report;
    ChannelTensor estimate;
    double nmse_db = 0.0;
};

// Random-start seed for a UE; shared by every fit that starts from scratch
// so that a random chain entry reproduces the plain fit.
std::uint64_t ue_init_seed(std::uint64_t base, int ue);

// Fits the base UE from random init, then every chain entry from its
// predecessor's fitted parameters (kernels and normalisation), all with the
// same seed tensor and iteration count. Entries at equal chain depth run
// concurrently when workers > 1.
std::map<int, TransferResult> run_transfer(const TransferPlan &plan, const DecoderSpec &spec, const FitConfig &config,
                                           const std::map<int, UeData> &ues, std::size_t workers = 1);

// Estimated channel P(K, Z0), de-normalised with the target's metadata.
ChannelTensor estimate_channel(const DecoderSpec &spec, const ParamSet<float> &params, const PreprocessedTarget &meta,
                               Backend backend = Backend::openmp);

// Frobenius distances over convolution kernels only.
struct WeightDistance {
    std::vector<double> per_layer;
    double total = 0.0;
};

WeightDistance weight_distance(const ParamSet<float> &a, const ParamSet<float> &b);

} // namespace unncsi
