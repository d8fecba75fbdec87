// SPDX-License-Identifier: Apache-2.0

#pragma once

// Compact feedback reports (.csir): decoder description, normalisation
// metadata and the fitted parameters. The receiver regenerates the seed from
// the description, so the seed tensor itself is never sent.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "unncsi/channel.hpp"
#include "unncsi/decoder.hpp"

namespace unncsi {

class CodecError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kReportVersion = 1;
inline constexpr std::size_t kReportPreambleBytes = 24;

struct NormalizationMeta {
    std::vector<double> norms;
    double scale = 1.0;

    bool operator==(const NormalizationMeta &) const = default;
};

struct CsiReport {
    DecoderSpec spec;
    ParamSet<float> params;
    std::vector<NormalizationMeta> normalization; // one entry per UE

    bool operator==(const CsiReport &) const = default;
};

// Byte-identical output for identical inputs.
std::vector<std::uint8_t> encode(const CsiReport &report);
// Throws CodecError on bad magic, version, lengths, checksums or contents.
CsiReport decode(std::span<const std::uint8_t> bytes);

void write_report(const std::filesystem::path &path, const CsiReport &report);
CsiReport read_report(const std::filesystem::path &path);

// Receiver side: forward pass from the regenerated seed, then per-UE
// de-normalisation.
std::vector<ChannelTensor> reconstruct(const CsiReport &report, Backend backend = Backend::openmp);

struct DeltaStats {
    std::vector<double> layer_distance; // Frobenius, kernels only
    double mean_abs_delta = 0.0;        // over all parameters
    std::size_t zero_deltas = 0;        // exactly unchanged parameters
    std::size_t parameters = 0;
    double entropy_bits = 0.0;          // per parameter, deltas quantised to step
    double quant_step = 0.0;
};

// How far a later report moved from an earlier one; a proxy for the cost of
// sending only the update.
DeltaStats weight_delta_stats(const CsiReport &earlier, const CsiReport &later, double quant_step = 1e-3);

} // namespace unncsi
