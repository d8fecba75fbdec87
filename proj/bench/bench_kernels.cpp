// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels, plus a full decoder pass.
// The first argument selects the backend: 0 serial, 1 OpenMP.

#include <benchmark/benchmark.h>

#include <vector>

#include "unncsi/decoder.hpp"
#include "unncsi/fit.hpp"
#include "unncsi/kernels.hpp"
#include "unncsi/rng.hpp"

using namespace unncsi;

namespace {

Backend backend_of(const benchmark::State &state) { return state.range(0) ? Backend::openmp : Backend::serial; }

std::vector<float> random_values(std::size_t n, std::uint64_t seed)
{
    SplitMix64 rng(seed);
    std::vector<float> v(n);
    for (auto &x : v)
        x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

void channel_product(benchmark::State &state)
{
    const auto &k = kernels::get<float>(backend_of(state));
    const std::size_t positions = 64 * 64, k_in = 64, k_out = 64;
    const auto x = random_values(positions * k_in, 1), w = random_values(k_in * k_out, 2);
    std::vector<float> y(positions * k_out);
    for (auto _ : state) {
        k.channel_product(x, positions, k_in, w, k_out, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * positions * k_in * k_out);
}

void channel_product_grad_weight(benchmark::State &state)
{
    const auto &k = kernels::get<float>(backend_of(state));
    const std::size_t positions = 64 * 64, k_in = 64, k_out = 64;
    const auto x = random_values(positions * k_in, 1), dy = random_values(positions * k_out, 3);
    std::vector<float> dw(k_in * k_out);
    for (auto _ : state) {
        k.channel_product_grad_weight(x, dy, positions, k_in, k_out, dw);
        benchmark::DoNotOptimize(dw.data());
    }
    state.SetItemsProcessed(state.iterations() * positions * k_in * k_out);
}

void upsample(benchmark::State &state)
{
    const auto &k = kernels::get<float>(backend_of(state));
    const std::size_t outer = 32, n = 32, inner = 64;
    const UpsampleTaps taps(make_upsampler(n));
    const auto x = random_values(outer * n * inner, 4);
    std::vector<float> y(outer * taps.n_out * inner);
    for (auto _ : state) {
        k.upsample(x, outer, inner, taps, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * y.size());
}

void batch_norm(benchmark::State &state)
{
    const auto &k = kernels::get<float>(backend_of(state));
    const std::size_t positions = 64 * 64, channels = 64;
    const auto x = random_values(positions * channels, 5);
    const std::vector<float> gamma(channels, 1.0f), beta(channels, 0.0f);
    std::vector<float> y(x.size()), xhat(x.size()), inv_std(channels);
    for (auto _ : state) {
        k.batch_norm(x, positions, channels, gamma, beta, kBatchNormEps, y, xhat, inv_std);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * x.size());
}

// One optimiser step's worth of work on a decoder: forward, loss, backward.
void decoder_step(benchmark::State &state, const DecoderSpec &spec)
{
    Decoder<float> d(spec, backend_of(state));
    const auto z0 = generate_seed(spec).as<float>();
    const auto params = init_params<float>(spec, 1);
    ParamSet<float> grads(spec);
    Tensor<float> target(spec.output_dims(), random_values(Tensor<float>(spec.output_dims()).size(), 6));
    for (auto _ : state)
        benchmark::DoNotOptimize(d.loss_and_gradient(params, z0, target, grads));
}

void desk_step(benchmark::State &state) { decoder_step(state, DecoderSpec::single_ue(16, 16, 4, 32, 3, 1, {})); }

void paper_step(benchmark::State &state) { decoder_step(state, DecoderSpec::single_ue(64, 64, 36, 64, 4, 1, {})); }

} // namespace

BENCHMARK(channel_product)->Arg(0)->Arg(1);
BENCHMARK(channel_product_grad_weight)->Arg(0)->Arg(1);
BENCHMARK(upsample)->Arg(0)->Arg(1);
BENCHMARK(batch_norm)->Arg(0)->Arg(1);
BENCHMARK(desk_step)->Arg(0)->Arg(1);
BENCHMARK(paper_step)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
