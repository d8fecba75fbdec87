// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include <filesystem>

#include "small_problem.hpp"
#include "unncsi/codec.hpp"
#include "unncsi/multiuser.hpp"

using namespace unncsi;

namespace {

struct Fitted {
    CsiReport report;
    ChannelTensor estimate;
};

Fitted fitted_report()
{
    const auto s = small::scene();
    const auto data = small::measurements(s, 15.0, 4);
    const auto &d = data.at(3);
    const auto spec = small::spec();
    const auto z0 = generate_seed(spec).as<float>();
    const auto r = fit(spec, z0, to_float(d.target.data), small::config(50));
    return {{spec, r.params, {{d.target.norms, d.target.scale}}},
            postprocess(forward(spec, r.params, z0), d.target.norms, d.target.scale)};
}

} // namespace

TEST_CASE("report layout and sizes")
{
    const auto f = fitted_report();
    const auto bytes = encode(f.report);
    CHECK(bytes == encode(f.report));
    REQUIRE(bytes.size() > kReportPreambleBytes);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CSIR");
    const auto u32 = [&](std::size_t at) {
        return static_cast<std::uint32_t>(bytes[at]) | static_cast<std::uint32_t>(bytes[at + 1]) << 8 |
               static_cast<std::uint32_t>(bytes[at + 2]) << 16 | static_cast<std::uint32_t>(bytes[at + 3]) << 24;
    };
    CHECK((bytes[4] | bytes[5] << 8) == kReportVersion);
    const auto header_len = u32(8), payload_len = u32(12);
    CHECK(payload_len == 4 * param_count(f.report.spec));
    CHECK(bytes.size() == kReportPreambleBytes + header_len + payload_len);
    const auto header = nlohmann::json::parse(bytes.begin() + kReportPreambleBytes,
                                              bytes.begin() + kReportPreambleBytes + header_len);
    CHECK(header.at("decoder") == to_json(f.report.spec));
    CHECK(header.at("normalization").size() == 1);
}

TEST_CASE("decode inverts encode and the receiver rebuilds the same channel")
{
    const auto f = fitted_report();
    const auto back = decode(encode(f.report));
    CHECK(back == f.report);
    const auto rebuilt = reconstruct(back);
    REQUIRE(rebuilt.size() == 1);
    CHECK(rebuilt[0].data == f.estimate.data);
    CHECK(reconstruct(back, Backend::serial)[0].data == f.estimate.data);
}

TEST_CASE("every single-bit corruption is detected")
{
    const auto bytes = encode(fitted_report().report);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        auto bad = bytes;
        bad[i] ^= 0x10;
        INFO("byte " << i);
        CHECK_THROWS_AS(decode(bad), CodecError);
    }
}

TEST_CASE("malformed reports are rejected with a reason")
{
    const auto bytes = encode(fitted_report().report);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode(truncated), CodecError);
    CHECK_THROWS_AS(decode(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10)), CodecError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_WITH(decode(magic), Catch::Matchers::ContainsSubstring("magic"));
    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_WITH(decode(version), Catch::Matchers::ContainsSubstring("version"));
    auto payload = bytes;
    payload.back() ^= 1;
    CHECK_THROWS_WITH(decode(payload), Catch::Matchers::ContainsSubstring("payload checksum"));
}

TEST_CASE("encoder refuses inconsistent reports")
{
    auto r = fitted_report().report;
    r.normalization.push_back(r.normalization[0]);
    CHECK_THROWS_AS(encode(r), CodecError);
    r.normalization.pop_back();
    r.normalization[0].norms.pop_back();
    CHECK_THROWS_AS(encode(r), CodecError);
    auto wrong = fitted_report().report;
    wrong.params = init_params<float>(DecoderSpec::single_ue(8, 8, 2, 5, 2, 1, {}), 1);
    CHECK_THROWS_AS(encode(wrong), CodecError);
}

TEST_CASE("group reports carry one normalisation per UE")
{
    const auto s = small::scene();
    const auto data = small::measurements(s, 10.0, 5);
    const auto g = build_group({2, 3}, {data.at(2).target, data.at(3).target});
    const auto spec = DecoderSpec::multi_user(8, 8, 2, 2, 6, 2, 1, false, {});
    const auto r = fit_group(spec, g, small::config(40), {data.at(2).truth, data.at(3).truth});
    const CsiReport rep{spec, r.report.params, {{g.norms[0], g.scales[0]}, {g.norms[1], g.scales[1]}}};
    const auto rebuilt = reconstruct(decode(encode(rep)));
    REQUIRE(rebuilt.size() == 2);
    CHECK(rebuilt[0].data == r.estimates[0].data);
    CHECK(rebuilt[1].data == r.estimates[1].data);
}

TEST_CASE("report files")
{
    const auto f = fitted_report();
    const auto path = std::filesystem::temp_directory_path() / "unncsi_codec_test.csir";
    write_report(path, f.report);
    CHECK(read_report(path) == f.report);
    CHECK(std::filesystem::file_size(path) == encode(f.report).size());
    std::filesystem::remove(path);
}

TEST_CASE("weight delta statistics")
{
    const auto f = fitted_report();
    const auto same = weight_delta_stats(f.report, f.report);
    CHECK(same.zero_deltas == same.parameters);
    CHECK(same.entropy_bits == 0.0);
    CHECK(same.mean_abs_delta == 0.0);
    for (double d : same.layer_distance)
        CHECK(d == 0.0);

    auto moved = f.report;
    auto v = moved.params.values();
    // half the parameters move by one quantisation step
    for (std::size_t i = 0; i < v.size(); i += 2)
        v[i] = static_cast<float>(static_cast<double>(v[i]) + 1e-3);
    const auto st = weight_delta_stats(f.report, moved);
    CHECK(st.zero_deltas == st.parameters / 2);
    CHECK(st.entropy_bits == Catch::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS(weight_delta_stats(f.report, moved, 0.0));
}
