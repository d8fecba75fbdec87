// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include "small_problem.hpp"
#include "unncsi/baselines.hpp"
#include "unncsi/multiuser.hpp"

using namespace unncsi;

TEST_CASE("group stacking puts the UE mode third")
{
    const auto s = small::scene();
    const auto data = small::measurements(s, 10.0, 1);
    const std::vector<int> ids{2, 3, 4};
    std::vector<PreprocessedTarget> targets;
    for (int ue : ids)
        targets.push_back(data.at(ue).target);
    const auto g = build_group(ids, targets);
    CHECK(g.data.dims() == Shape{8, 8, 3, 4});
    CHECK(g.data.at({5, 1, 2, 3}) == targets[2].data.at({1, 5, 3}));
    CHECK(g.data.at({0, 7, 1, 0}) == targets[1].data.at({7, 0, 0}));
    const auto back = split_group(g);
    REQUIRE(back.size() == 3);
    for (std::size_t u = 0; u < 3; ++u) {
        CHECK(back[u].data == targets[u].data);
        CHECK(back[u].norms == targets[u].norms);
        CHECK(back[u].scale == targets[u].scale);
    }
    CHECK_THROWS(build_group({1, 2}, {targets[0]}));
    CHECK_THROWS_AS(build_group({1, 2}, {targets[0], PreprocessedTarget{RealTensor({8, 4, 4}), {}, 1.0}}),
                    DimensionError);
}

TEST_CASE("parameter count does not depend on the number of UEs")
{
    const auto base = param_count(DecoderSpec::multi_user(16, 16, 1, 4, 32, 3, 1, false, {}));
    for (std::size_t m = 2; m <= 4; ++m)
        CHECK(param_count(DecoderSpec::multi_user(16, 16, m, 4, 32, 3, 1, false, {})) == base);
    CHECK(base == param_count(DecoderSpec::single_ue(16, 16, 4, 32, 3, 1, {})));
}

TEST_CASE("upsampling along the UE mode")
{
    const auto spec = DecoderSpec::multi_user(8, 8, 4, 2, 6, 2, 1, true, {});
    CHECK(spec.seed_dims() == Shape{2, 2, 1, 6});
    CHECK(spec.output_dims() == Shape{8, 8, 4, 4});
}

TEST_CASE("a one-UE group fit is bit-identical to the 3-way fit on the same data")
{
    const auto s = small::scene();
    const auto data = small::measurements(s, 10.0, 2);
    const auto g = build_group({3}, {data.at(3).target});
    const SeedRule rule{8, 0.15};
    const auto four = DecoderSpec::multi_user(8, 8, 1, 2, 6, 2, 1, false, rule);
    const auto three = DecoderSpec::single_ue(8, 8, 2, 6, 2, 1, rule);
    // The 3-way decoder reads its first spatial mode as snapshots here.
    const auto target3 = g.data.reshape({8, 8, 4});
    const auto cfg = small::config(60);
    const auto a = fit(four, generate_seed(four).as<float>(), to_float(g.data), cfg);
    const auto b = fit(three, generate_seed(three).as<float>(), to_float(target3), cfg);
    CHECK(a.params == b.params);
    CHECK(a.trace == b.trace);
}

TEST_CASE("joint fit reports one estimate per UE")
{
    const auto s = small::scene();
    const auto data = small::measurements(s, 10.0, 3);
    const std::vector<int> ids{2, 3, 4};
    std::vector<PreprocessedTarget> targets;
    std::vector<ChannelTensor> truths;
    for (int ue : ids) {
        targets.push_back(data.at(ue).target);
        truths.push_back(data.at(ue).truth);
    }
    const auto g = build_group(ids, targets);
    const auto spec = DecoderSpec::multi_user(8, 8, 3, 2, 6, 2, 1, false, {});
    const auto r = fit_group(spec, g, small::config(120), truths);
    REQUIRE(r.estimates.size() == 3);
    for (std::size_t u = 0; u < 3; ++u) {
        CHECK(r.estimates[u].data.dims() == truths[u].data.dims());
        CHECK(r.nmse_db[u] == nmse_db(r.estimates[u], truths[u]));
        CHECK(r.nmse_db[u] < 0.0);
    }
    CHECK_THROWS_AS(fit_group(DecoderSpec::multi_user(8, 8, 2, 2, 6, 2, 1, false, {}), g, small::config(5), truths),
                    SpecError);
    CHECK_THROWS(fit_group(spec, g, small::config(5), {truths[0]}));
}
