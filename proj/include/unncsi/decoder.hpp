// SPDX-License-Identifier: Apache-2.0

#pragma once

// Deep-decoder generator: a fixed random seed tensor pushed through 1x1
// convolutions (channel-mode products), fixed linear upsampling, ReLU and
// per-filter normalisation, ending in a TanH output layer.
//
// Layer indices in this API are zero-based: layer 0 is the first inner layer,
// layer layers()-1 the output layer. Spatial modes come first, the channel
// mode is always last.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "unncsi/kernels.hpp"
#include "unncsi/tensor.hpp"

namespace unncsi {

class SpecError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kBatchNormEps = 1e-5;

struct SeedRule {
    std::uint64_t seed = 0;
    double half_range = 0.15;

    bool operator==(const SeedRule &) const = default;
};

enum class LayerKind { inner, preoutput, output };

struct DecoderSpec {
    Shape seed_extents;                      // spatial extents of the seed tensor
    std::vector<std::size_t> widths;         // k_0 .. k_L
    std::size_t inner_layers = 0;            // layers with upsampling
    std::size_t preoutput_layers = 1;        // layers without upsampling, before the output
    std::vector<std::vector<bool>> upsample; // [inner layer][spatial mode]
    SeedRule seed_rule;

    std::size_t layers() const { return widths.size() - 1; }
    std::size_t spatial_rank() const { return seed_extents.size(); }
    std::size_t output_width() const { return widths.back(); }
    LayerKind kind(std::size_t layer) const;
    bool has_batch_norm(std::size_t layer) const { return kind(layer) != LayerKind::output; }

    Shape seed_dims() const;        // seed extents + k_0
    Shape output_spatial() const;   // spatial extents after all upsampling
    Shape output_dims() const;      // output_spatial + k_L

    // Throws SpecError when the description is internally inconsistent.
    void check() const;

    bool operator==(const DecoderSpec &) const = default;

    // Single-UE decoder, spatial order (subcarrier, snapshot); every inner
    // layer upsamples both modes.
    static DecoderSpec single_ue(std::size_t n_sub, std::size_t n_sp, std::size_t n_ant, std::size_t width,
                                 std::size_t inner, std::size_t preoutput, SeedRule rule);

    // Multi-user decoder, spatial order (snapshot, subcarrier, UE). With
    // ue_upsample off the seed carries all M users in its UE mode.
    static DecoderSpec multi_user(std::size_t n_sp, std::size_t n_sub, std::size_t m, std::size_t n_ant,
                                  std::size_t width, std::size_t inner, std::size_t preoutput, bool ue_upsample,
                                  SeedRule rule);
};

nlohmann::json to_json(const DecoderSpec &spec);
DecoderSpec decoder_spec_from_json(const nlohmann::json &j);

// Sum of kernel sizes plus two per normalised filter.
std::size_t param_count(const DecoderSpec &spec);

// Compression ratio against a count of complex channel coefficients.
double compression_ratio(const DecoderSpec &spec, std::size_t complex_coefficients);

struct LayerSlot {
    std::size_t k_in = 0;
    std::size_t k_out = 0;
    std::size_t kernel = 0; // offsets into the flat value array
    std::size_t gamma = 0;
    std::size_t beta = 0;
    bool batch_norm = false;
};

// All trainable values in canonical order: layer ascending, and within a
// layer the kernel (k_in x k_out, row-major), then gamma, then beta.
template <typename T>
class ParamSet {
  public:
    ParamSet() = default;
    explicit ParamSet(const DecoderSpec &spec);

    std::size_t layers() const { return slots_.size(); }
    std::size_t size() const { return values_.size(); }
    const LayerSlot &slot(std::size_t layer) const { return slots_.at(layer); }

    std::span<T> kernel(std::size_t layer);
    std::span<const T> kernel(std::size_t layer) const;
    std::span<T> gamma(std::size_t layer);
    std::span<const T> gamma(std::size_t layer) const;
    std::span<T> beta(std::size_t layer);
    std::span<const T> beta(std::size_t layer) const;

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    // True when both sets describe the same layer widths.
    bool same_layout(const ParamSet &other) const;

    template <typename U>
    ParamSet<U> cast() const
    {
        ParamSet<U> out;
        out.slots_ = slots_;
        out.values_.assign(values_.begin(), values_.end());
        return out;
    }

    bool operator==(const ParamSet &other) const { return values_ == other.values_ && same_layout(other); }

  private:
    template <typename U>
    friend class ParamSet;

    std::vector<LayerSlot> slots_;
    std::vector<T> values_;
};

// Kernels from U(-s, s), s = sqrt(1 / k_in); gamma = 1, beta = 0.
template <typename T>
ParamSet<T> init_params(const DecoderSpec &spec, std::uint64_t seed);

struct SeedTensor {
    Tensor<double> data;
    SeedRule rule;

    template <typename T>
    Tensor<T> as() const
    {
        return Tensor<T>(data.dims(), std::vector<T>(data.values().begin(), data.values().end()));
    }
};

// Row-major fill from a SplitMix64 stream: entry = (2u - 1) a.
SeedTensor generate_seed(const SeedRule &rule, const Shape &dims);
inline SeedTensor generate_seed(const DecoderSpec &spec) { return generate_seed(spec.seed_rule, spec.seed_dims()); }

// Normalises every filter (last mode) over all other positions.
template <typename T>
Tensor<T> batch_norm(const Tensor<T> &x, std::span<const T> gamma, std::span<const T> beta,
                     double eps = kBatchNormEps);

// Stateful evaluator holding the layer plan and the activation tape of the
// last forward call. Not thread-safe; use one per fit.
template <typename T>
class Decoder {
  public:
    explicit Decoder(const DecoderSpec &spec, Backend backend = Backend::openmp);

    const DecoderSpec &spec() const { return spec_; }
    Backend backend() const { return backend_; }

    const Tensor<T> &forward(const ParamSet<T> &params, const Tensor<T> &z0);
    // Reverse pass through the tape of the last forward call.
    void backward(const ParamSet<T> &params, std::span<const T> d_output, ParamSet<T> &grads);

    // MSE against target; gradient of the MSE written into grads.
    double loss_and_gradient(const ParamSet<T> &params, const Tensor<T> &z0, const Tensor<T> &target,
                             ParamSet<T> &grads);
    double loss(const ParamSet<T> &params, const Tensor<T> &z0, const Tensor<T> &target);

  private:
    struct UpsampleStep {
        std::size_t outer = 0;
        std::size_t inner = 0;
        std::size_t size_in = 0;
        std::size_t size_out = 0;
        UpsampleTaps taps;
    };

    struct Layer {
        std::size_t k_in = 0;
        std::size_t k_out = 0;
        std::size_t positions_in = 0;
        std::size_t positions_out = 0;
        LayerKind kind = LayerKind::inner;
        std::vector<UpsampleStep> steps;
        std::vector<T> conv, pre, act, xhat, inv_std, out;
        std::vector<std::vector<T>> stage; // intermediate upsampling buffers
    };

    void check_inputs(const ParamSet<T> &params, const Tensor<T> &z0) const;

    DecoderSpec spec_;
    Backend backend_;
    const kernels::KernelSet<T> *ops_;
    std::vector<Layer> layers_;
    Tensor<T> output_;
    std::vector<T> input_copy_;
    std::vector<T> grad_a_, grad_b_, grad_c_;
};

template <typename T>
Tensor<T> forward(const DecoderSpec &spec, const ParamSet<T> &params, const Tensor<T> &z0,
                  Backend backend = Backend::openmp);

} // namespace unncsi
