// SPDX-License-Identifier: Apache-2.0

#pragma once

// Joint recreation of several UEs with one decoder whose output carries an
// extra UE mode: (N_sp, N_sub, M, 2 N_ant).

#include <vector>

#include "unncsi/channel.hpp"
#include "unncsi/fit.hpp"

namespace unncsi {

struct GroupTarget {
    std::vector<int> ue_ids;
    RealTensor data; // (N_sp, N_sub, M, 2 N_ant)
    std::vector<std::vector<double>> norms; // per UE, per snapshot
    std::vector<double> scales;             // per UE
};

// Stacks independently preprocessed single-UE targets. All must share one
// grid; ids and targets pair up by position.
GroupTarget build_group(const std::vector<int> &ue_ids, const std::vector<PreprocessedTarget> &targets);

// Inverse of build_group.
std::vector<PreprocessedTarget> split_group(const GroupTarget &group);

// Per-UE slices (N_sub, N_sp, 2 N_ant) of a group-shaped tensor.
template <typename T>
std::vector<Tensor<T>> split_ue_slices(const Tensor<T> &group_shaped);

struct GroupFitResult {
    FitReport report;
    std::vector<ChannelTensor> estimates; // per UE, group order
    std::vector<double> nmse_db;
};

// One fit of spec against the stacked target; truths pair with group.ue_ids.
GroupFitResult fit_group(const DecoderSpec &spec, const GroupTarget &group, const FitConfig &config,
                         const std::vector<ChannelTensor> &truths);

} // namespace unncsi
