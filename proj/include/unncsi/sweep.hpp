// SPDX-License-Identifier: Apache-2.0

#pragma once

// Factorial comparison of estimators over UEs, SNRs and noise seeds.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unncsi/channel.hpp"
#include "unncsi/fit.hpp"

namespace unncsi {

inline const std::vector<std::string> kEstimators{"mmse_raw", "mmse_genie", "unn"};
inline constexpr std::size_t kDefaultSeedCount = 5;

// Noise seed of one (seed, UE, SNR) cell; every estimator in the cell sees
// the same measurement.
std::uint64_t noise_seed(std::uint64_t seed, int ue, double snr_db);

// Random-start seed of a single-UE fit in one cell.
std::uint64_t cell_init_seed(std::uint64_t base, int ue, std::uint64_t seed);

struct SweepCell {
    std::string estimator;
    int ue = 0;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    double measurement_nmse = 0.0; // linear
    double estimate_nmse = 0.0;    // linear; NaN when the fit diverged
    std::optional<FitReport> fit;  // unn cells only
};

struct EvalRecord {
    std::string estimator;
    int ue = 0;
    double snr_db = 0.0;
    std::size_t seed_count = 0;
    double nmse_db = 0.0;
    double gain_db = 0.0; // seed-averaged measurement NMSE minus estimator NMSE, dB

    bool operator==(const EvalRecord &) const = default;
};

struct SweepSetup {
    Scene scene;
    DecoderSpec spec;
    FitConfig fit;
    std::vector<std::string> estimators = kEstimators;
    std::vector<int> ues;
    std::vector<double> snrs_db;
    std::vector<std::uint64_t> seeds;
    std::size_t workers = 1;
};

// Cells in (ue, snr, seed, estimator) order regardless of worker count.
std::vector<SweepCell> run_sweep_cells(const SweepSetup &setup);

// Linear-domain averaging over seeds; diverged cells are left out of both
// sums and of seed_count. Records in (estimator, ue, snr) order.
std::vector<EvalRecord> aggregate(const std::vector<SweepCell> &cells);

inline std::vector<EvalRecord> sweep(const SweepSetup &setup) { return aggregate(run_sweep_cells(setup)); }

// "estimator,ue,snr_db,seed_count,nmse_db,gain_db"
std::string eval_csv(const std::vector<EvalRecord> &records);

// NMSE against SNR, one series per (estimator, UE).
nlohmann::json curves_json(const std::vector<EvalRecord> &records);

} // namespace unncsi
