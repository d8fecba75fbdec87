// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "data_path.hpp"
#include "unncsi/baselines.hpp"
#include "unncsi/channel.hpp"
#include "unncsi/rng.hpp"

using namespace unncsi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

Scene los_scene(Vec3 ue_start, Vec3 velocity, std::size_t rows = 1, std::size_t cols = 1)
{
    Scene s;
    s.bs_position = {0.0, 0.0, 10.0};
    s.ura = {rows, cols, 0.5};
    s.ues = {{1, ue_start, velocity, true}};
    s.n_sub = 8;
    s.n_sp = 6;
    s.timing_sync = false;
    return s;
}

double wrap(double phase) { return std::remainder(phase, 2.0 * kPi); }

ComplexTensor random_complex(Shape dims, std::uint64_t seed)
{
    ComplexTensor t(std::move(dims));
    SplitMix64 rng(seed);
    for (auto &v : t.data())
        v = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    return t;
}

} // namespace

TEST_CASE("single static LOS path: constant over snapshots, linear phase over subcarriers")
{
    const auto s = los_scene({60.0, 20.0, 1.5}, {0.0, 0.0, 0.0});
    const auto h = synthesize(s, 1).data;
    const Vec3 d{60.0, 20.0, -8.5};
    const double dist = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    const double tau = dist / kSpeedOfLight, df = s.subcarrier_spacing();
    for (std::size_t f = 0; f < s.n_sub; ++f)
        for (std::size_t t = 0; t < s.n_sp; ++t) {
            CHECK_THAT(std::abs(h.at({f, t, 0})), WithinRel(1.0 / (4.0 * kPi * dist), 1e-12));
            CHECK(std::abs(h.at({f, t, 0}) - h.at({f, 0, 0})) < 1e-15);
        }
    for (std::size_t f = 0; f + 1 < s.n_sub; ++f) {
        const double step = std::arg(h.at({f + 1, 0, 0}) / h.at({f, 0, 0}));
        CHECK_THAT(step, WithinAbs(wrap(-2.0 * kPi * df * tau), 1e-9));
    }
}

TEST_CASE("radial motion produces the expected Doppler phase advance")
{
    const double v = 3.0;
    auto s = los_scene({80.0, 0.0, 10.0}, {v, 0.0, 0.0});
    s.n_sub = 4;
    const auto paths = trace_paths(s, 1, 0);
    REQUIRE(paths.size() == 1);
    CHECK_THAT(paths[0].doppler_hz, WithinRel(-v / s.wavelength(), 1e-12));
    const auto h = synthesize(s, 1).data;
    // At the centre subcarrier the delay term vanishes.
    const std::size_t fc = s.n_sub / 2;
    for (std::size_t t = 0; t + 1 < s.n_sp; ++t) {
        const double step = std::arg(h.at({fc, t + 1, 0}) / h.at({fc, t, 0}));
        CHECK_THAT(step, WithinAbs(wrap(-2.0 * kPi * v * s.snapshot_interval_s / s.wavelength()), 1e-9));
    }
}

TEST_CASE("broadside UE sees the same phase on every element of a row")
{
    const auto s = los_scene({50.0, 0.0, 10.0}, {0.0, 0.0, 0.0}, 2, 3);
    const auto h = synthesize(s, 1).data;
    for (std::size_t f = 0; f < s.n_sub; ++f)
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 1; c < 3; ++c)
                CHECK(std::abs(h.at({f, 0, r * 3 + c}) - h.at({f, 0, r * 3})) < 1e-15);
}

TEST_CASE("steering vector follows the array geometry")
{
    const Ura ura{2, 2, 0.5};
    const Vec3 u{0.6, 0.8, 0.0};
    const auto a = steering_vector(ura, u);
    CHECK_THAT(std::arg(a[1]), WithinAbs(wrap(kPi * 0.8), 1e-12));
    CHECK(std::abs(a[2] - a[0]) < 1e-15);
    CHECK(std::abs(a[3] - a[1]) < 1e-15);
}

TEST_CASE("two paths with opposite Doppler give a symmetric envelope")
{
    Scene grid;
    grid.n_sub = 4;
    grid.n_sp = 11;
    grid.ura = {1, 1, 0.5};
    const double nu = 7.0, dt = grid.snapshot_interval_s, tc = 5.0 * dt;
    // Phases align at the centre snapshot.
    const PathComponent a{std::polar(1.0, -2.0 * kPi * nu * tc), 1e-7, nu, {1.0, 0.0, 0.0}};
    const PathComponent b{std::polar(1.0, 2.0 * kPi * nu * tc), 3e-7, -nu, {1.0, 0.0, 0.0}};
    const auto h = render_paths(grid, std::vector<std::vector<PathComponent>>(grid.n_sp, {a, b})).data;
    for (std::size_t f = 0; f < grid.n_sub; ++f)
        for (std::size_t k = 1; k <= 5; ++k)
            CHECK_THAT(std::abs(h.at({f, 5 + k, 0})), WithinAbs(std::abs(h.at({f, 5 - k, 0})), 1e-12));
}

TEST_CASE("timing reference removes the shortest initial delay")
{
    auto s = los_scene({60.0, 20.0, 1.5}, {1.0, 0.0, 0.0});
    s.timing_sync = true;
    s.scatterers = {{{30.0, -10.0, 5.0}, {0.5, 0.0}}};
    const auto p0 = trace_paths(s, 1, 0);
    const double shortest = std::min(p0[0].delay_s, p0[1].delay_s);
    CHECK(std::abs(shortest) < 1e-18);
    CHECK(p0[1].delay_s > 0.0);
}

TEST_CASE("synthesis is deterministic and fails on degenerate geometry")
{
    const Scene s = load_scene(scene_file());
    CHECK(s.ue_ids().size() == 7);
    CHECK(synthesize(s, 3).data == synthesize(s, 3).data);
    auto bad = los_scene({0.0, 0.0, 10.0}, {0.0, 0.0, 0.0});
    CHECK_THROWS_AS(synthesize(bad, 1), GeometryError);
    CHECK_THROWS(s.ue(99));
}

TEST_CASE("scene JSON round-trip")
{
    const Scene s = load_scene(scene_file());
    const auto j = to_json(s);
    CHECK(to_json(scene_from_json(j)) == j);
}

TEST_CASE("noise is calibrated to the requested SNR")
{
    Scene s = load_scene(scene_file());
    s.n_sub = s.n_sp = 16;
    s.ura.rows = s.ura.cols = 2;
    const auto truth = synthesize(s, 2);
    for (double snr : {0.0, 20.0}) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed)
            sum += nmse_ratio(add_noise(truth, snr, seed).data, truth.data);
        CHECK_THAT(ratio_to_db(sum / 10.0), WithinAbs(-snr, 0.3));
    }
    CHECK(add_noise(truth, INFINITY, 1).data == truth.data);
    CHECK(add_noise(truth, 10.0, 4).data == add_noise(truth, 10.0, 4).data);
    CHECK_FALSE(add_noise(truth, 10.0, 4).data == add_noise(truth, 10.0, 5).data);
    CHECK_THROWS(add_noise(add_noise(truth, 10.0, 1), 10.0, 2));
}

TEST_CASE("preprocess of a constant 2x1x2 channel")
{
    ComplexTensor ones({2, 1, 2}, std::vector<std::complex<double>>(4, {1.0, 0.0}));
    const auto p = preprocess({ones, ChannelRole::measured, 0.0}, 1.0);
    REQUIRE(p.norms.size() == 1);
    CHECK(p.norms[0] == 2.0);
    CHECK(p.data.dims() == Shape{2, 1, 4});
    for (std::size_t f = 0; f < 2; ++f) {
        CHECK(p.data.at({f, 0, 0}) == 0.5);
        CHECK(p.data.at({f, 0, 1}) == 0.5);
        CHECK(p.data.at({f, 0, 2}) == 0.0);
        CHECK(p.data.at({f, 0, 3}) == 0.0);
    }
    ComplexTensor both({2, 1, 2}, std::vector<std::complex<double>>(4, {1.0, 1.0}));
    const auto q = preprocess({both, ChannelRole::measured, 0.0}, 1.0);
    CHECK_THAT(q.norms[0], WithinRel(2.0 * std::sqrt(2.0), 1e-15));
    for (double v : q.data.data())
        CHECK_THAT(v, WithinRel(1.0 / (2.0 * std::sqrt(2.0)), 1e-15));
}

TEST_CASE("default scale puts the peak at 0.9 and postprocess inverts")
{
    const ComplexTensor h = random_complex({4, 3, 2}, 8);
    const auto p = preprocess({h, ChannelRole::measured, 5.0});
    double peak = 0.0;
    for (double v : p.data.data())
        peak = std::max(peak, std::abs(v));
    CHECK_THAT(peak, WithinRel(kDefaultTargetPeak, 1e-15));
    const auto back = postprocess(p).data;
    for (std::size_t i = 0; i < h.size(); ++i)
        CHECK(std::abs(back[i] - h[i]) <= 1e-15 * std::abs(h[i]) + 1e-300);
    const auto back32 = postprocess(Tensor<float>(p.data.dims(), {p.data.values().begin(), p.data.values().end()}),
                                    p.norms, p.scale)
                            .data;
    for (std::size_t i = 0; i < h.size(); ++i)
        CHECK(std::abs(back32[i] - h[i]) <= 1e-6 * std::abs(h[i]) * 2);
}

TEST_CASE("postprocess with unit metadata merges real and imaginary halves")
{
    RealTensor x({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
    const auto h = postprocess(x, {1.0, 1.0}, 1.0).data;
    CHECK(h.at({0, 0, 0}) == std::complex<double>(1, 3));
    CHECK(h.at({0, 0, 1}) == std::complex<double>(2, 4));
    CHECK(h.at({0, 1, 1}) == std::complex<double>(6, 8));
    CHECK(postprocess(RealTensor({2, 2, 2}), {1.0, 3.0}, 2.0).data == ComplexTensor({2, 2, 1}));
    CHECK_THROWS_AS(postprocess(RealTensor({2, 2, 3}), {1.0, 1.0}, 1.0), DimensionError);
}

TEST_CASE("tensor files round-trip through float32")
{
    const auto dir = std::filesystem::temp_directory_path() / "unncsi_tensor_test";
    std::filesystem::create_directories(dir);
    const ComplexTensor h = random_complex({3, 2, 2}, 4);
    write_tensor(dir / "h.csit", h);
    const auto back = read_complex_tensor(dir / "h.csit");
    REQUIRE(back.dims() == h.dims());
    for (std::size_t i = 0; i < h.size(); ++i) {
        CHECK(back[i].real() == static_cast<double>(static_cast<float>(h[i].real())));
        CHECK(back[i].imag() == static_cast<double>(static_cast<float>(h[i].imag())));
    }
    RealTensor r({2, 5});
    r[3] = 1.25;
    write_tensor(dir / "r.csit", r);
    CHECK(read_real_tensor(dir / "r.csit") == r);
    CHECK_THROWS(read_complex_tensor(dir / "r.csit"));
    std::filesystem::remove_all(dir);
}
