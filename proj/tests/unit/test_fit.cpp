// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include <cmath>
#include <limits>

#include "data_path.hpp"
#include "tiny_specs.hpp"
#include "unncsi/channel.hpp"
#include "unncsi/fit.hpp"

using namespace unncsi;
using Catch::Matchers::WithinAbs;

TEST_CASE("reverse-mode gradients match fine central differences")
{
    for (const auto &c : tiny::cases()) {
        for (std::uint64_t start : {17, 18, 19}) {
            INFO(c.name << ", start seed " << start);
            const auto z0 = generate_seed(c.spec).as<double>();
            const auto target = tiny::random_target(c.spec, start + 100);
            auto p = tiny::check_point(c.spec, tiny::kink_free_seed(c.spec, start, 1e-3));
            const auto g = gradient(c.spec, p, z0, target, Backend::serial);
            REQUIRE(g.size() == param_count(c.spec));
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double fd = tiny::central_difference(c.spec, p, z0, target, i, 1e-5);
                INFO("parameter " << i << " analytic " << g.values()[i] << " fd " << fd);
                CHECK(std::abs(fd - g.values()[i]) <= 1e-5 * std::max(std::abs(g.values()[i]), 1e-6));
            }
        }
    }
}

TEST_CASE("central-difference error against the gradient is second order in h")
{
    for (const auto &c : tiny::cases()) {
        INFO(c.name);
        const auto z0 = generate_seed(c.spec).as<double>();
        const auto target = tiny::random_target(c.spec, 117);
        auto p = tiny::check_point(c.spec, tiny::kink_free_seed(c.spec, 17, 1e-3));
        const auto g = gradient(c.spec, p, z0, target, Backend::serial);
        std::size_t measured = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double e1 = std::abs(tiny::central_difference(c.spec, p, z0, target, i, 1e-3) - g.values()[i]);
            const double e2 = std::abs(tiny::central_difference(c.spec, p, z0, target, i, 5e-4) - g.values()[i]);
            if (e1 < 1e-9)
                continue;
            ++measured;
            INFO("parameter " << i);
            CHECK(e1 / e2 > 3.5);
            CHECK(e1 / e2 < 4.5);
        }
        CHECK(measured > 0);
    }
}

TEST_CASE("gradient vanishes when the target is the decoder's own output")
{
    for (const auto &c : tiny::cases()) {
        INFO(c.name);
        const auto z0 = generate_seed(c.spec).as<double>();
        const auto p = init_params<double>(c.spec, 4);
        const auto target = forward(c.spec, p, z0);
        CHECK(loss(c.spec, p, z0, target) == 0.0);
        const auto g = gradient(c.spec, p, z0, target);
        for (double v : g.values())
            CHECK(v == 0.0);
    }
}

TEST_CASE("a filter that never fires gets no kernel or scale gradient")
{
    const auto spec = tiny::cases()[0].spec;
    const auto z0 = generate_seed(spec).as<double>();
    auto p = init_params<double>(spec, 2);
    const std::size_t k_out = p.slot(0).k_out, dead = 1;
    for (std::size_t i = 0; i < p.slot(0).k_in; ++i)
        p.kernel(0)[i * k_out + dead] = 0.0;
    const auto g = gradient(spec, p, z0, tiny::random_target(spec, 3));
    for (std::size_t i = 0; i < p.slot(0).k_in; ++i)
        CHECK(g.kernel(0)[i * k_out + dead] == 0.0);
    CHECK(g.gamma(0)[dead] == 0.0);
    CHECK(g.beta(0)[dead] != 0.0);
}

TEST_CASE("serial and OpenMP gradients agree bit for bit")
{
    const auto spec = DecoderSpec::single_ue(16, 16, 4, 32, 3, 1, {3, 0.15});
    const auto z0 = generate_seed(spec).as<float>();
    const auto target = to_float(tiny::random_target(spec, 5));
    const auto p = init_params<float>(spec, 6);
    CHECK(gradient(spec, p, z0, target, Backend::serial) == gradient(spec, p, z0, target, Backend::openmp));
}

namespace {

struct Problem {
    DecoderSpec spec = DecoderSpec::single_ue(8, 8, 2, 8, 2, 1, {1, 0.15});
    Tensor<float> z0 = generate_seed(spec).as<float>();
    Tensor<float> target = to_float(tiny::random_target(spec, 9));
};

} // namespace

TEST_CASE("the first Adam step moves every parameter by at most the learning rate")
{
    Problem pb;
    FitConfig c;
    c.iterations = 1;
    c.learning_rate = 1e-2;
    const auto r = fit(pb.spec, pb.z0, pb.target, c);
    const auto start = init_params<float>(pb.spec, c.init_seed);
    for (std::size_t i = 0; i < start.size(); ++i)
        CHECK(std::abs(static_cast<double>(r.params.values()[i]) - start.values()[i]) <= 1e-2 * (1 + 1e-5));
}

TEST_CASE("fits are deterministic and backend independent")
{
    Problem pb;
    FitConfig c;
    c.iterations = 60;
    c.trace_period = 25;
    const auto a = fit(pb.spec, pb.z0, pb.target, c);
    const auto b = fit(pb.spec, pb.z0, pb.target, c);
    CHECK(a.params == b.params);
    CHECK(a.trace == b.trace);
    c.backend = Backend::serial;
    const auto s = fit(pb.spec, pb.z0, pb.target, c);
    CHECK(s.params == a.params);
    CHECK(s.final_mse == a.final_mse);
}

TEST_CASE("trace records iteration 0, every period and the final loss")
{
    Problem pb;
    FitConfig c;
    c.iterations = 55;
    c.trace_period = 20;
    const auto r = fit(pb.spec, pb.z0, pb.target, c);
    REQUIRE(r.trace.size() == 4);
    CHECK(r.trace[0].iteration == 0);
    CHECK(r.trace[1].iteration == 20);
    CHECK(r.trace[2].iteration == 40);
    CHECK(r.trace[3].iteration == 55);
    CHECK(r.trace[3].mse == r.final_mse);
    CHECK(r.final_mse < r.trace[0].mse);
    CHECK(r.iterations == 55);
    CHECK(trace_csv(r).rfind("iteration,mse\n0,", 0) == 0);
}

TEST_CASE("warm start continues from the given parameters")
{
    Problem pb;
    FitConfig c;
    c.iterations = 30;
    const auto first = fit(pb.spec, pb.z0, pb.target, c);
    const auto again = fit(pb.spec, pb.z0, pb.target, c, first.params);
    CHECK(again.warm_start);
    CHECK(again.trace.front().mse == Catch::Approx(first.final_mse).epsilon(1e-6));
    CHECK(again.final_mse < first.final_mse);
    CHECK_THROWS_AS(fit(pb.spec, pb.z0, pb.target, c, init_params<float>(tiny::cases()[0].spec, 1)), SpecError);
}

TEST_CASE("an exploding fit is reported as diverged")
{
    Problem pb;
    FitConfig c;
    c.optimizer = Optimizer::sgd;
    c.learning_rate = 1e38;
    c.iterations = 50;
    CHECK_THROWS_AS(fit(pb.spec, pb.z0, pb.target, c), FitDiverged);

    auto bad = pb.target;
    bad.data()[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(fit(pb.spec, pb.z0, bad, FitConfig{}), FitDiverged);
}

TEST_CASE("fit config validation and JSON")
{
    FitConfig c;
    c.learning_rate = 0.0;
    CHECK_THROWS(c.check());
    c = {};
    c.iterations = 0;
    CHECK_THROWS(c.check());
    c = {};
    c.iterations = 123;
    c.optimizer = Optimizer::sgd;
    c.backend = Backend::serial;
    const auto back = fit_config_from_json(to_json(c));
    CHECK(back.iterations == 123);
    CHECK(back.optimizer == Optimizer::sgd);
    CHECK(back.backend == Backend::serial);
    CHECK(fit_config_from_json({{"learning_rate", 0.01}}).iterations == FitConfig{}.iterations);
    CHECK_THROWS(fit_config_from_json({{"optimizer", "lbfgs"}}));
}

TEST_CASE("noiseless desk-scale channel is fitted to a small relative error")
{
    Scene scene = load_scene(scene_file());
    const double df = scene.subcarrier_spacing();
    scene.n_sub = scene.n_sp = 16;
    scene.ura.rows = scene.ura.cols = 2;
    scene.bandwidth_hz = df * 16;
    const auto target = preprocess(synthesize(scene, 3));
    const auto spec = DecoderSpec::single_ue(16, 16, 4, 32, 3, 1, {});
    double power = 0.0;
    for (double v : target.data.data())
        power += v * v;
    power /= static_cast<double>(target.data.size());
    const auto r = fit(spec, generate_seed(spec).as<float>(), to_float(target.data), FitConfig{});
    INFO("relative mse " << r.final_mse / power);
    CHECK(r.final_mse / power <= 1e-3);
}
