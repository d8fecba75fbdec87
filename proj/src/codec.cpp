// SPDX-License-Identifier: Apache-2.0

#include "unncsi/codec.hpp"

#include <bit>
#include <cmath>
#include <map>

#include <zlib.h>

#include "byte_io.hpp"
#include "unncsi/multiuser.hpp"

namespace unncsi {

namespace {

constexpr char kMagic[] = "CSIR";
constexpr std::uint8_t kFloat32 = 0;

std::uint32_t crc(std::span<const std::uint8_t> b)
{
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), b.data(), static_cast<uInt>(b.size())));
}

nlohmann::json header_json(const CsiReport &r)
{
    nlohmann::json norm = nlohmann::json::array();
    for (const auto &n : r.normalization)
        norm.push_back({{"norms", n.norms}, {"scale", n.scale}});
    return {{"decoder", to_json(r.spec)}, {"normalization", norm}};
}

std::size_t ue_count(const DecoderSpec &spec)
{
    // Multi-user decoders carry the UE count in the third spatial mode.
    return spec.spatial_rank() == 3 ? spec.output_spatial()[2] : 1;
}

std::size_t snapshot_count(const DecoderSpec &spec)
{
    return spec.spatial_rank() == 3 ? spec.output_spatial()[0] : spec.output_spatial()[1];
}

void check_report(const CsiReport &r)
{
    r.spec.check();
    if (r.params.size() != param_count(r.spec) || !r.params.same_layout(ParamSet<float>(r.spec)))
        throw CodecError("parameter layout does not match the decoder description");
    if (r.normalization.size() != ue_count(r.spec))
        throw CodecError("expected " + std::to_string(ue_count(r.spec)) + " normalisation entries, got " +
                         std::to_string(r.normalization.size()));
    for (const auto &n : r.normalization) {
        if (n.norms.size() != snapshot_count(r.spec))
            throw CodecError("normalisation needs one norm per snapshot");
        if (!(n.scale > 0.0) || !std::isfinite(n.scale))
            throw CodecError("normalisation scale must be positive and finite");
    }
}

} // namespace

std::vector<std::uint8_t> encode(const CsiReport &report)
{
    check_report(report);
    const std::string header = header_json(report).dump();
    detail::ByteWriter payload;
    for (float v : report.params.values())
        payload.f32(v);
    const auto &p = payload.buffer();
    const std::span<const std::uint8_t> hb(reinterpret_cast<const std::uint8_t *>(header.data()), header.size());

    detail::ByteWriter w;
    w.text(kMagic);
    w.u16(kReportVersion);
    w.u8(kFloat32);
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(header.size()));
    w.u32(static_cast<std::uint32_t>(p.size()));
    w.u32(crc(hb));
    w.u32(crc(p));
    w.text(header);
    w.bytes(p);
    return w.take();
}

CsiReport decode(std::span<const std::uint8_t> bytes)
{
    detail::ByteReader r(bytes);
    try {
        if (r.text(4) != kMagic)
            throw CodecError("not a CSIR report (bad magic)");
        if (const auto v = r.u16(); v != kReportVersion)
            throw CodecError("unsupported CSIR version " + std::to_string(v));
        if (r.u8() != kFloat32)
            throw CodecError("unsupported CSIR value type");
        if (r.u8() != 0)
            throw CodecError("CSIR reserved byte must be zero");
        const auto header_len = r.u32(), payload_len = r.u32();
        const auto header_crc = r.u32(), payload_crc = r.u32();
        if (r.remaining() != static_cast<std::size_t>(header_len) + payload_len)
            throw CodecError("CSIR length fields do not match the file size");
        const auto hb = r.bytes(header_len);
        const auto pb = r.bytes(payload_len);
        if (crc(hb) != header_crc)
            throw CodecError("CSIR header checksum mismatch");
        if (crc(pb) != payload_crc)
            throw CodecError("CSIR payload checksum mismatch");

        CsiReport out;
        const auto j = nlohmann::json::parse(hb.begin(), hb.end());
        out.spec = decoder_spec_from_json(j.at("decoder"));
        for (const auto &n : j.at("normalization"))
            out.normalization.push_back({n.at("norms").get<std::vector<double>>(), n.at("scale").get<double>()});
        out.params = ParamSet<float>(out.spec);
        if (payload_len != out.params.size() * 4)
            throw CodecError("CSIR payload holds " + std::to_string(payload_len / 4) + " values, decoder needs " +
                             std::to_string(out.params.size()));
        detail::ByteReader pr(pb);
        for (auto &v : out.params.values())
            v = pr.f32();
        check_report(out);
        return out;
    } catch (const CodecError &) {
        throw;
    } catch (const std::exception &e) {
        throw CodecError(std::string("malformed CSIR report: ") + e.what());
    }
}

void write_report(const std::filesystem::path &path, const CsiReport &report)
{
    detail::write_file_atomic(path.string(), encode(report));
}

CsiReport read_report(const std::filesystem::path &path) { return decode(detail::read_file(path.string())); }

std::vector<ChannelTensor> reconstruct(const CsiReport &report, Backend backend)
{
    check_report(report);
    const auto z0 = generate_seed(report.spec).as<float>();
    const auto out = forward(report.spec, report.params, z0, backend);
    std::vector<ChannelTensor> h;
    if (report.spec.spatial_rank() == 3) {
        const auto slices = split_ue_slices(out);
        for (std::size_t u = 0; u < slices.size(); ++u)
            h.push_back(postprocess(slices[u], report.normalization[u].norms, report.normalization[u].scale));
    } else {
        h.push_back(postprocess(out, report.normalization[0].norms, report.normalization[0].scale));
    }
    return h;
}

DeltaStats weight_delta_stats(const CsiReport &earlier, const CsiReport &later, double quant_step)
{
    if (!(quant_step > 0.0))
        throw std::invalid_argument("quantisation step must be positive");
    if (!(earlier.spec == later.spec))
        throw SpecError("weight_delta_stats: reports use different decoders");
    DeltaStats s;
    s.quant_step = quant_step;
    s.parameters = earlier.params.size();
    for (std::size_t l = 0; l < earlier.params.layers(); ++l) {
        const auto a = earlier.params.kernel(l), b = later.params.kernel(l);
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(b[i]) - static_cast<double>(a[i]);
            sum += d * d;
        }
        s.layer_distance.push_back(std::sqrt(sum));
    }
    std::map<long long, std::size_t> histogram;
    const auto a = earlier.params.values(), b = later.params.values();
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(b[i]) - static_cast<double>(a[i]);
        abs_sum += std::abs(d);
        if (d == 0.0)
            ++s.zero_deltas;
        ++histogram[std::llround(d / quant_step)];
    }
    s.mean_abs_delta = abs_sum / static_cast<double>(s.parameters);
    for (const auto &[bin, count] : histogram) {
        const double p = static_cast<double>(count) / static_cast<double>(s.parameters);
        s.entropy_bits -= p * std::log2(p);
    }
    return s;
}

} // namespace unncsi
