// SPDX-License-Identifier: Apache-2.0

#include "unncsi/decoder.hpp"

#include <cmath>
#include <string>

#include "unncsi/rng.hpp"

namespace unncsi {

LayerKind DecoderSpec::kind(std::size_t layer) const
{
    if (layer < inner_layers)
        return LayerKind::inner;
    if (layer + 1 < layers())
        return LayerKind::preoutput;
    return LayerKind::output;
}

Shape DecoderSpec::seed_dims() const
{
    Shape d = seed_extents;
    d.push_back(widths.front());
    return d;
}

Shape DecoderSpec::output_spatial() const
{
    Shape e = seed_extents;
    for (const auto &flags : upsample)
        for (std::size_t m = 0; m < e.size() && m < flags.size(); ++m)
            if (flags[m])
                e[m] *= 2;
    return e;
}

Shape DecoderSpec::output_dims() const
{
    Shape d = output_spatial();
    d.push_back(widths.back());
    return d;
}

void DecoderSpec::check() const
{
    if (seed_extents.empty())
        throw SpecError("decoder needs at least one spatial mode");
    for (auto e : seed_extents)
        if (e == 0)
            throw SpecError("seed extents must be positive");
    if (widths.size() != inner_layers + preoutput_layers + 2)
        throw SpecError("expected " + std::to_string(inner_layers + preoutput_layers + 2) +
                        " widths (k_0..k_L), got " + std::to_string(widths.size()));
    for (auto k : widths)
        if (k == 0)
            throw SpecError("layer widths must be positive");
    if (upsample.size() != inner_layers)
        throw SpecError("upsample flags must list one entry per inner layer");
    for (const auto &flags : upsample)
        if (flags.size() != seed_extents.size())
            throw SpecError("upsample flags must cover every spatial mode");
    if (!(seed_rule.half_range >= 0.0) || !std::isfinite(seed_rule.half_range))
        throw SpecError("seed half-range must be a finite non-negative number");
}

DecoderSpec DecoderSpec::single_ue(std::size_t n_sub, std::size_t n_sp, std::size_t n_ant, std::size_t width,
                                   std::size_t inner, std::size_t preoutput, SeedRule rule)
{
    const std::size_t f = std::size_t{1} << inner;
    DecoderSpec s;
    s.seed_extents = {n_sub / f, n_sp / f};
    s.inner_layers = inner;
    s.preoutput_layers = preoutput;
    s.widths.assign(inner + preoutput + 1, width);
    s.widths.push_back(2 * n_ant);
    s.upsample.assign(inner, std::vector<bool>{true, true});
    s.seed_rule = rule;
    return s;
}

DecoderSpec DecoderSpec::multi_user(std::size_t n_sp, std::size_t n_sub, std::size_t m, std::size_t n_ant,
                                    std::size_t width, std::size_t inner, std::size_t preoutput, bool ue_upsample,
                                    SeedRule rule)
{
    const std::size_t f = std::size_t{1} << inner;
    DecoderSpec s;
    s.seed_extents = {n_sp / f, n_sub / f, ue_upsample ? m / f : m};
    s.inner_layers = inner;
    s.preoutput_layers = preoutput;
    s.widths.assign(inner + preoutput + 1, width);
    s.widths.push_back(2 * n_ant);
    s.upsample.assign(inner, std::vector<bool>{true, true, ue_upsample});
    s.seed_rule = rule;
    return s;
}

nlohmann::json to_json(const DecoderSpec &spec)
{
    nlohmann::json up = nlohmann::json::array();
    for (const auto &flags : spec.upsample) {
        nlohmann::json row = nlohmann::json::array();
        for (bool b : flags)
            row.push_back(b);
        up.push_back(row);
    }
    return {
        {"inner_layers", spec.inner_layers},
        {"preoutput_layers", spec.preoutput_layers},
        {"seed_extents", spec.seed_extents},
        {"seed_rule", {{"seed", spec.seed_rule.seed}, {"half_range", spec.seed_rule.half_range}}},
        {"upsample", up},
        {"widths", spec.widths},
    };
}

DecoderSpec decoder_spec_from_json(const nlohmann::json &j)
{
    DecoderSpec s;
    try {
        s.inner_layers = j.at("inner_layers").get<std::size_t>();
        s.preoutput_layers = j.at("preoutput_layers").get<std::size_t>();
        s.seed_extents = j.at("seed_extents").get<Shape>();
        s.widths = j.at("widths").get<std::vector<std::size_t>>();
        const auto &rule = j.at("seed_rule");
        s.seed_rule.seed = rule.at("seed").get<std::uint64_t>();
        s.seed_rule.half_range = rule.at("half_range").get<double>();
        for (const auto &row : j.at("upsample"))
            s.upsample.push_back(row.get<std::vector<bool>>());
    } catch (const nlohmann::json::exception &e) {
        throw SpecError(std::string("malformed decoder spec: ") + e.what());
    }
    s.check();
    return s;
}

std::size_t param_count(const DecoderSpec &spec)
{
    std::size_t n = 0;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        n += spec.widths[l] * spec.widths[l + 1];
        if (spec.has_batch_norm(l))
            n += 2 * spec.widths[l + 1];
    }
    return n;
}

double compression_ratio(const DecoderSpec &spec, std::size_t complex_coefficients)
{
    return static_cast<double>(param_count(spec)) / static_cast<double>(complex_coefficients);
}

// ---------------------------------------------------------------------------
// ParamSet

template <typename T>
ParamSet<T>::ParamSet(const DecoderSpec &spec)
{
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        LayerSlot s;
        s.k_in = spec.widths[l];
        s.k_out = spec.widths[l + 1];
        s.batch_norm = spec.has_batch_norm(l);
        s.kernel = off;
        off += s.k_in * s.k_out;
        s.gamma = off;
        if (s.batch_norm)
            off += s.k_out;
        s.beta = off;
        if (s.batch_norm)
            off += s.k_out;
        slots_.push_back(s);
    }
    values_.assign(off, T{});
}

template <typename T>
std::span<T> ParamSet<T>::kernel(std::size_t l)
{
    const auto &s = slots_.at(l);
    return std::span<T>(values_).subspan(s.kernel, s.k_in * s.k_out);
}

template <typename T>
std::span<const T> ParamSet<T>::kernel(std::size_t l) const
{
    const auto &s = slots_.at(l);
    return std::span<const T>(values_).subspan(s.kernel, s.k_in * s.k_out);
}

template <typename T>
std::span<T> ParamSet<T>::gamma(std::size_t l)
{
    const auto &s = slots_.at(l);
    return std::span<T>(values_).subspan(s.gamma, s.batch_norm ? s.k_out : 0);
}

template <typename T>
std::span<const T> ParamSet<T>::gamma(std::size_t l) const
{
    const auto &s = slots_.at(l);
    return std::span<const T>(values_).subspan(s.gamma, s.batch_norm ? s.k_out : 0);
}

template <typename T>
std::span<T> ParamSet<T>::beta(std::size_t l)
{
    const auto &s = slots_.at(l);
    return std::span<T>(values_).subspan(s.beta, s.batch_norm ? s.k_out : 0);
}

template <typename T>
std::span<const T> ParamSet<T>::beta(std::size_t l) const
{
    const auto &s = slots_.at(l);
    return std::span<const T>(values_).subspan(s.beta, s.batch_norm ? s.k_out : 0);
}

template <typename T>
bool ParamSet<T>::same_layout(const ParamSet &other) const
{
    if (slots_.size() != other.slots_.size())
        return false;
    for (std::size_t l = 0; l < slots_.size(); ++l) {
        const auto &a = slots_[l];
        const auto &b = other.slots_[l];
        if (a.k_in != b.k_in || a.k_out != b.k_out || a.batch_norm != b.batch_norm)
            return false;
    }
    return true;
}

template <typename T>
ParamSet<T> init_params(const DecoderSpec &spec, std::uint64_t seed)
{
    ParamSet<T> p(spec);
    SplitMix64 rng(seed);
    for (std::size_t l = 0; l < p.layers(); ++l) {
        const double s = std::sqrt(1.0 / static_cast<double>(p.slot(l).k_in));
        for (auto &w : p.kernel(l))
            w = static_cast<T>(rng.uniform(-s, s));
        for (auto &g : p.gamma(l))
            g = T{1};
    }
    return p;
}

SeedTensor generate_seed(const SeedRule &rule, const Shape &dims)
{
    Tensor<double> t(dims);
    SplitMix64 rng(rule.seed);
    for (auto &v : t.data())
        v = (2.0 * rng.uniform() - 1.0) * rule.half_range;
    return {std::move(t), rule};
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T> &x, std::span<const T> gamma, std::span<const T> beta, double eps)
{
    const std::size_t channels = x.dims().back();
    if (gamma.size() != channels || beta.size() != channels)
        throw DimensionError("batch_norm: gamma/beta length must equal the last mode extent");
    const std::size_t positions = x.size() / channels;
    Tensor<T> y(x.dims());
    std::vector<T> xhat(x.size()), inv_std(channels);
    kernels::serial::table<T>().batch_norm(x.data(), positions, channels, gamma, beta, eps, y.data(), xhat,
                                           inv_std);
    return y;
}

// ---------------------------------------------------------------------------
// Decoder

template <typename T>
Decoder<T>::Decoder(const DecoderSpec &spec, Backend backend)
    : spec_(spec), backend_(backend), ops_(&kernels::get<T>(backend))
{
    spec_.check();
    Shape ext = spec_.seed_extents;
    for (std::size_t l = 0; l < spec_.layers(); ++l) {
        Layer layer;
        layer.k_in = spec_.widths[l];
        layer.k_out = spec_.widths[l + 1];
        layer.kind = spec_.kind(l);
        layer.positions_in = shape_size(ext);
        if (layer.kind == LayerKind::inner) {
            for (std::size_t m = 0; m < ext.size(); ++m) {
                if (!spec_.upsample[l][m])
                    continue;
                UpsampleStep step{0, layer.k_out, 0, 0, UpsampleTaps(make_upsampler(ext[m], m))};
                step.outer = 1;
                for (std::size_t d = 0; d < m; ++d)
                    step.outer *= ext[d];
                for (std::size_t d = m + 1; d < ext.size(); ++d)
                    step.inner *= ext[d];
                step.size_in = shape_size(ext) * layer.k_out;
                ext[m] *= 2;
                step.size_out = shape_size(ext) * layer.k_out;
                layer.steps.push_back(std::move(step));
            }
        }
        layer.positions_out = shape_size(ext);
        layer.conv.resize(layer.positions_in * layer.k_out);
        for (const auto &step : layer.steps)
            layer.stage.emplace_back(step.size_out);
        const std::size_t n_out = layer.positions_out * layer.k_out;
        layer.out.resize(n_out);
        if (layer.kind != LayerKind::output) {
            layer.act.resize(n_out);
            layer.xhat.resize(n_out);
            layer.inv_std.resize(layer.k_out);
        }
        layers_.push_back(std::move(layer));
    }
    Shape out_dims = ext;
    out_dims.push_back(spec_.widths.back());
    output_ = Tensor<T>(out_dims);
}

template <typename T>
void Decoder<T>::check_inputs(const ParamSet<T> &params, const Tensor<T> &z0) const
{
    if (z0.dims() != spec_.seed_dims())
        throw DimensionError("seed tensor " + shape_string(z0.dims()) + " does not match spec seed " +
                             shape_string(spec_.seed_dims()));
    if (!params.same_layout(ParamSet<T>(spec_)))
        throw SpecError("parameter set does not match decoder spec");
}

template <typename T>
const Tensor<T> &Decoder<T>::forward(const ParamSet<T> &params, const Tensor<T> &z0)
{
    check_inputs(params, z0);
    input_copy_.assign(z0.data().begin(), z0.data().end());
    std::span<const T> x = input_copy_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Layer &layer = layers_[l];
        ops_->channel_product(x, layer.positions_in, layer.k_in, params.kernel(l), layer.k_out, layer.conv);
        std::span<const T> cur = layer.conv;
        for (std::size_t s = 0; s < layer.steps.size(); ++s) {
            ops_->upsample(cur, layer.steps[s].outer, layer.steps[s].inner, layer.steps[s].taps, layer.stage[s]);
            cur = layer.stage[s];
        }
        if (layer.kind == LayerKind::output) {
            ops_->tanh_forward(cur, layer.out);
        } else {
            ops_->relu(cur, layer.act);
            ops_->batch_norm(layer.act, layer.positions_out, layer.k_out, params.gamma(l), params.beta(l),
                             kBatchNormEps, layer.out, layer.xhat, layer.inv_std);
        }
        x = layer.out;
    }
    std::copy(x.begin(), x.end(), output_.data().begin());
    return output_;
}

template <typename T>
void Decoder<T>::backward(const ParamSet<T> &params, std::span<const T> d_output, ParamSet<T> &grads)
{
    if (!grads.same_layout(params))
        grads = ParamSet<T>(spec_);
    grad_a_.assign(d_output.begin(), d_output.end());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        Layer &layer = layers_[l];
        const std::size_t n_out = layer.positions_out * layer.k_out;
        grad_b_.resize(n_out);
        std::span<T> g_out(grad_a_.data(), n_out);
        std::span<T> g_pre(grad_b_.data(), n_out);
        if (layer.kind == LayerKind::output) {
            ops_->tanh_backward(layer.out, g_out, g_pre);
        } else {
            grad_c_.resize(n_out);
            std::span<T> g_act(grad_c_.data(), n_out);
            ops_->batch_norm_backward(g_out, layer.xhat, layer.inv_std, params.gamma(l), layer.positions_out,
                                      layer.k_out, g_act, grads.gamma(l), grads.beta(l));
            std::span<const T> pre = layer.steps.empty() ? std::span<const T>(layer.conv) : layer.stage.back();
            ops_->relu_backward(pre, g_act, g_pre);
        }
        // Adjoint of the upsampling chain, ping-ponging between buffers.
        std::span<T> g_cur = g_pre;
        bool in_b = true;
        for (std::size_t s = layer.steps.size(); s-- > 0;) {
            const auto &step = layer.steps[s];
            auto &dst_vec = in_b ? grad_a_ : grad_b_;
            dst_vec.resize(std::max(dst_vec.size(), step.size_in));
            std::span<T> dst(dst_vec.data(), step.size_in);
            ops_->upsample_adjoint(g_cur, step.outer, step.inner, step.taps, dst);
            g_cur = dst;
            in_b = !in_b;
        }
        std::span<const T> x = l == 0 ? std::span<const T>(input_copy_) : std::span<const T>(layers_[l - 1].out);
        ops_->channel_product_grad_weight(x, g_cur, layer.positions_in, layer.k_in, layer.k_out, grads.kernel(l));
        if (l > 0) {
            grad_c_.resize(std::max(grad_c_.size(), layer.positions_in * layer.k_in));
            std::span<T> g_in(grad_c_.data(), layer.positions_in * layer.k_in);
            ops_->channel_product_grad_input(g_cur, params.kernel(l), layer.positions_in, layer.k_in, layer.k_out,
                                             g_in);
            grad_a_.assign(g_in.begin(), g_in.end());
        }
    }
}

template <typename T>
double Decoder<T>::loss(const ParamSet<T> &params, const Tensor<T> &z0, const Tensor<T> &target)
{
    const auto &out = forward(params, z0);
    if (target.dims() != out.dims())
        throw DimensionError("target " + shape_string(target.dims()) + " does not match decoder output " +
                             shape_string(out.dims()));
    return ops_->mse(out.data(), target.data());
}

template <typename T>
double Decoder<T>::loss_and_gradient(const ParamSet<T> &params, const Tensor<T> &z0, const Tensor<T> &target,
                                     ParamSet<T> &grads)
{
    const double value = loss(params, z0, target);
    std::vector<T> d_out(output_.size());
    ops_->mse_grad(output_.data(), target.data(), d_out);
    backward(params, d_out, grads);
    return value;
}

template <typename T>
Tensor<T> forward(const DecoderSpec &spec, const ParamSet<T> &params, const Tensor<T> &z0, Backend backend)
{
    Decoder<T> d(spec, backend);
    return d.forward(params, z0);
}

template class ParamSet<float>;
template class ParamSet<double>;
template class Decoder<float>;
template class Decoder<double>;
template ParamSet<float> init_params(const DecoderSpec &, std::uint64_t);
template ParamSet<double> init_params(const DecoderSpec &, std::uint64_t);
template Tensor<float> batch_norm(const Tensor<float> &, std::span<const float>, std::span<const float>, double);
template Tensor<double> batch_norm(const Tensor<double> &, std::span<const double>, std::span<const double>, double);
template Tensor<float> forward(const DecoderSpec &, const ParamSet<float> &, const Tensor<float> &, Backend);
template Tensor<double> forward(const DecoderSpec &, const ParamSet<double> &, const Tensor<double> &, Backend);

} // namespace unncsi
