// SPDX-License-Identifier: Apache-2.0

#pragma once

// Ground-truth channels from a single-bounce geometric model, measurement
// noise, and the normalisation that turns a complex channel into a real
// decoder target.

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "unncsi/tensor.hpp"

namespace unncsi {

using Vec3 = std::array<double, 3>;

class GeometryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kSpeedOfLight = 299792458.0;

struct Ura {
    std::size_t rows = 1;
    std::size_t cols = 1;
    double spacing_wavelengths = 0.5;
};

struct Scatterer {
    Vec3 position{};
    std::complex<double> gain{1.0, 0.0};
};

struct UeTrack {
    int id = 0;
    Vec3 start{};
    Vec3 velocity{};
    bool los = true;
};

// The URA lies in the BS-local y-z plane with broadside along +x; element
// (row r, column c) sits at spacing * (0, c, r) wavelengths and maps to
// antenna index r * cols + c.
struct Scene {
    Vec3 bs_position{};
    Ura ura;
    std::vector<Scatterer> scatterers;
    std::vector<UeTrack> ues;
    double carrier_hz = 2.6e9;
    double bandwidth_hz = 20e6;
    double snapshot_interval_s = 0.01;
    std::size_t n_sub = 64;
    std::size_t n_sp = 64;
    // Reference all delays to the UE's shortest path at snapshot 0.
    bool timing_sync = true;

    std::size_t n_ant() const { return ura.rows * ura.cols; }
    double wavelength() const { return kSpeedOfLight / carrier_hz; }
    double subcarrier_spacing() const { return bandwidth_hz / static_cast<double>(n_sub); }
    const UeTrack &ue(int id) const;
    std::vector<int> ue_ids() const;

    void check() const;
};

Scene scene_from_json(const nlohmann::json &j);
nlohmann::json to_json(const Scene &scene);
Scene load_scene(const std::filesystem::path &path);

enum class ChannelRole { ground_truth, measured, estimated };

struct ChannelTensor {
    ComplexTensor data; // (N_sub, N_sp, N_ant)
    ChannelRole role = ChannelRole::ground_truth;
    std::optional<double> snr_db;
};

// One propagation path as seen at one snapshot.
struct PathComponent {
    std::complex<double> gain; // amplitude at this snapshot times carrier phase at snapshot 0
    double delay_s = 0.0;      // baseband delay at this snapshot (after timing reference)
    double doppler_hz = 0.0;
    Vec3 direction{};          // unit vector from the BS towards the last interaction point
};

std::vector<PathComponent> trace_paths(const Scene &scene, int ue_id, std::size_t snapshot);

// URA phase response for a unit direction vector.
std::vector<std::complex<double>> steering_vector(const Ura &ura, const Vec3 &direction);

// H[f, t, a] = sum_p g_p exp(-j 2 pi f_sub(f) tau_p(t)) exp(j 2 pi nu_p t dt) steer_a(u_p(t)),
// f_sub(f) = (f - N_sub / 2) * subcarrier spacing.
ChannelTensor render_paths(const Scene &grid, const std::vector<std::vector<PathComponent>> &per_snapshot);

ChannelTensor synthesize(const Scene &scene, int ue_id);

// Adds circularly-symmetric Gaussian noise with total expected power
// ||H||_F^2 / 10^(snr/10). An infinite SNR returns the input unchanged.
ChannelTensor add_noise(const ChannelTensor &h, double snr_db, std::uint64_t seed);

struct PreprocessedTarget {
    RealTensor data; // (N_sub, N_sp, 2 N_ant): real parts then imaginary parts
    std::vector<double> norms;
    double scale = 1.0;
};

inline constexpr double kDefaultTargetPeak = 0.9;

// Per-snapshot Frobenius normalisation, then scaling. Without an explicit
// scale the factor is kDefaultTargetPeak / max|entry| of the normalised data.
PreprocessedTarget preprocess(const ChannelTensor &h, std::optional<double> scale = std::nullopt);

template <typename T>
ChannelTensor postprocess(const Tensor<T> &real, const std::vector<double> &norms, double scale);

inline ChannelTensor postprocess(const PreprocessedTarget &p) { return postprocess(p.data, p.norms, p.scale); }

// Little-endian tensor files: "CSIT", u16 version, u8 scalar kind, u8 rank,
// u32 extents, then float32 values (complex interleaved re, im).
void write_tensor(const std::filesystem::path &path, const ComplexTensor &t);
void write_tensor(const std::filesystem::path &path, const RealTensor &t);
ComplexTensor read_complex_tensor(const std::filesystem::path &path);
RealTensor read_real_tensor(const std::filesystem::path &path);

} // namespace unncsi
