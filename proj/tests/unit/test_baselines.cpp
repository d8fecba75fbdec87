// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>

#include "data_path.hpp"
#include "unncsi/baselines.hpp"
#include "unncsi/rng.hpp"

using namespace unncsi;
using Catch::Matchers::WithinAbs;

namespace {

Scene desk_scene()
{
    Scene s = load_scene(scene_file());
    const double df = s.subcarrier_spacing();
    s.n_sub = s.n_sp = 16;
    s.ura.rows = s.ura.cols = 2;
    s.bandwidth_hz = df * 16;
    return s;
}

// h[v] = a x_v with unit-modulus a and x_v, so E||h_v||^2 = N_ant exactly.
ChannelTensor rank_one_channel(std::size_t n_ant, std::uint64_t seed)
{
    SplitMix64 rng(seed);
    std::vector<std::complex<double>> a(n_ant);
    for (auto &v : a)
        v = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
    ComplexTensor h({64, 64, n_ant});
    for (std::size_t v = 0; v < 64 * 64; ++v) {
        const auto x = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
        for (std::size_t i = 0; i < n_ant; ++i)
            h[v * n_ant + i] = a[i] * x;
    }
    return {h, ChannelRole::ground_truth, std::nullopt};
}

} // namespace

TEST_CASE("nmse edge cases")
{
    ComplexTensor t({2, 2, 2});
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = {1.0 + static_cast<double>(i), -0.5};
    CHECK(nmse_db(t, t) == kNmseFloorDb);
    CHECK_THAT(nmse_db(ComplexTensor(t.dims()), t), WithinAbs(0.0, 1e-12));
    CHECK_THROWS(nmse_db(t, ComplexTensor(t.dims())));
    CHECK_THROWS_AS(nmse_db(ComplexTensor({2, 2, 1}), t), DimensionError);
    CHECK_THAT(ratio_to_db(0.01), WithinAbs(-20.0, 1e-12));
}

TEST_CASE("raw estimator is the measurement and tracks -SNR")
{
    const auto truth = synthesize(desk_scene(), 4);
    const auto meas = add_noise(truth, 10.0, 3);
    const auto raw = mmse_raw(meas);
    CHECK(raw.data == meas.data);
    CHECK(raw.role == ChannelRole::estimated);
    for (double snr : {0.0, 10.0}) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed)
            sum += nmse_ratio(mmse_raw(add_noise(truth, snr, seed)).data, truth.data);
        CHECK_THAT(ratio_to_db(sum / 5.0), WithinAbs(-snr, 0.5));
    }
}

TEST_CASE("Wiener filter with white covariance scales by 1 / (1 + s)")
{
    const auto truth = rank_one_channel(3, 1);
    const auto meas = add_noise(truth, 5.0, 2);
    const double s = 0.7;
    ComplexTensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i)
        eye.at({i, i}) = 1.0;
    const auto out = wiener_filter(meas, eye, s);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(std::abs(out.data[i] - meas.data[i] / (1.0 + s)) < 1e-13);
}

TEST_CASE("with vanishing noise the filter leaves a channel in the covariance range unchanged")
{
    const auto truth = synthesize(desk_scene(), 2);
    const auto r = antenna_covariance(truth);
    double trace = 0.0;
    for (std::size_t a = 0; a < r.extent(0); ++a)
        trace += r.at({a, a}).real();
    double previous = 1.0;
    for (double rel : {1e-4, 1e-6, 1e-8}) {
        const auto out = wiener_filter(truth, r, rel * trace / static_cast<double>(r.extent(0)));
        const double err = nmse_ratio(out.data, truth.data);
        INFO("relative noise " << rel << " nmse " << err);
        CHECK(err < previous);
        previous = err;
    }
    CHECK(previous < 1e-8);
}

TEST_CASE("genie filter on a rank-one channel reaches the closed-form error")
{
    const std::size_t n = 4;
    const auto truth = rank_one_channel(n, 9);
    for (double snr : {0.0, 10.0}) {
        const double s2 = std::pow(10.0, -snr / 10.0);
        const auto meas = add_noise(truth, snr, 5);
        const double raw = nmse_db(mmse_raw(meas), truth);
        const double genie = nmse_db(mmse_genie(meas, truth, snr), truth);
        INFO("snr " << snr << " raw " << raw << " genie " << genie);
        CHECK(genie < raw);
        // E||e||^2 / E||h||^2 = s2 / (N + s2)
        CHECK_THAT(genie, WithinAbs(ratio_to_db(s2 / (static_cast<double>(n) + s2)), 0.3));
    }
}

TEST_CASE("calibrated noise power matches the per-entry channel power")
{
    const auto truth = rank_one_channel(2, 3);
    CHECK_THAT(calibrated_noise_power(truth, 0.0), WithinAbs(1.0, 1e-12));
    CHECK_THAT(calibrated_noise_power(truth, 20.0), WithinAbs(0.01, 1e-14));
}

TEST_CASE("genie never loses to the raw measurement on the desk grid")
{
    const auto scene = desk_scene();
    for (int ue : scene.ue_ids()) {
        const auto truth = synthesize(scene, ue);
        for (double snr : {0.0, 10.0, 20.0}) {
            const auto meas = add_noise(truth, snr, 100 + static_cast<std::uint64_t>(ue));
            CHECK(nmse_db(mmse_genie(meas, truth, snr), truth) <= nmse_db(mmse_raw(meas), truth));
        }
    }
}
