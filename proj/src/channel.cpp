// SPDX-License-Identifier: Apache-2.0

#include "unncsi/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "byte_io.hpp"
#include "unncsi/rng.hpp"

namespace unncsi {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinDistance = 1e-3;

Vec3 sub(const Vec3 &a, const Vec3 &b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3 &a, const Vec3 &b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3 &a) { return std::sqrt(dot(a, a)); }
Vec3 scaled(const Vec3 &a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

Vec3 vec3_from_json(const nlohmann::json &j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

} // namespace

const UeTrack &Scene::ue(int id) const
{
    for (const auto &u : ues)
        if (u.id == id)
            return u;
    throw std::out_of_range("scene has no UE with id " + std::to_string(id));
}

std::vector<int> Scene::ue_ids() const
{
    std::vector<int> ids;
    for (const auto &u : ues)
        ids.push_back(u.id);
    return ids;
}

void Scene::check() const
{
    if (ura.rows == 0 || ura.cols == 0)
        throw GeometryError("URA needs at least one row and column");
    if (n_sub == 0 || n_sp == 0)
        throw GeometryError("subcarrier and snapshot counts must be positive");
    if (!(carrier_hz > 0.0) || !(bandwidth_hz > 0.0) || !(snapshot_interval_s >= 0.0))
        throw GeometryError("carrier, bandwidth and snapshot interval must be positive");
    for (const auto &u : ues)
        if (!u.los && scatterers.empty())
            throw GeometryError("UE " + std::to_string(u.id) + " has no propagation path");
}

Scene scene_from_json(const nlohmann::json &j)
{
    Scene s;
    try {
        s.carrier_hz = j.at("carrier_hz").get<double>();
        s.bandwidth_hz = j.at("bandwidth_hz").get<double>();
        s.snapshot_interval_s = j.at("snapshot_interval_s").get<double>();
        s.n_sub = j.at("n_sub").get<std::size_t>();
        s.n_sp = j.at("n_sp").get<std::size_t>();
        s.timing_sync = j.value("timing_sync", true);
        const auto &bs = j.at("bs");
        s.bs_position = vec3_from_json(bs.at("position"));
        const auto &ura = bs.at("ura");
        s.ura.rows = ura.at("rows").get<std::size_t>();
        s.ura.cols = ura.at("cols").get<std::size_t>();
        s.ura.spacing_wavelengths = ura.value("spacing_wavelengths", 0.5);
        for (const auto &sc : j.at("scatterers")) {
            const auto &g = sc.at("gain");
            s.scatterers.push_back({vec3_from_json(sc.at("position")), {g.at(0).get<double>(), g.at(1).get<double>()}});
        }
        for (const auto &u : j.at("ues"))
            s.ues.push_back({u.at("id").get<int>(), vec3_from_json(u.at("start")), vec3_from_json(u.at("velocity")),
                             u.value("los", true)});
    } catch (const nlohmann::json::exception &e) {
        throw GeometryError(std::string("malformed scene: ") + e.what());
    }
    s.check();
    return s;
}

nlohmann::json to_json(const Scene &s)
{
    nlohmann::json sc = nlohmann::json::array();
    for (const auto &x : s.scatterers)
        sc.push_back({{"position", x.position}, {"gain", {x.gain.real(), x.gain.imag()}}});
    nlohmann::json ues = nlohmann::json::array();
    for (const auto &u : s.ues)
        ues.push_back({{"id", u.id}, {"start", u.start}, {"velocity", u.velocity}, {"los", u.los}});
    return {
        {"carrier_hz", s.carrier_hz},
        {"bandwidth_hz", s.bandwidth_hz},
        {"snapshot_interval_s", s.snapshot_interval_s},
        {"n_sub", s.n_sub},
        {"n_sp", s.n_sp},
        {"timing_sync", s.timing_sync},
        {"bs",
         {{"position", s.bs_position},
          {"ura", {{"rows", s.ura.rows}, {"cols", s.ura.cols}, {"spacing_wavelengths", s.ura.spacing_wavelengths}}}}},
        {"scatterers", sc},
        {"ues", ues},
    };
}

Scene load_scene(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open scene file " + path.string());
    return scene_from_json(nlohmann::json::parse(in));
}

std::vector<std::complex<double>> steering_vector(const Ura &ura, const Vec3 &u)
{
    std::vector<std::complex<double>> a(ura.rows * ura.cols);
    for (std::size_t r = 0; r < ura.rows; ++r)
        for (std::size_t c = 0; c < ura.cols; ++c) {
            const double phase = kTwoPi * ura.spacing_wavelengths *
                                 (static_cast<double>(c) * u[1] + static_cast<double>(r) * u[2]);
            a[r * ura.cols + c] = std::polar(1.0, phase);
        }
    return a;
}

namespace {

struct RawPath {
    double length;       // total path length, m
    double rate;         // d(length)/dt, m/s
    Vec3 direction;      // from BS to last interaction point
    std::complex<double> reflection;
};

std::vector<RawPath> raw_paths(const Scene &scene, const UeTrack &ue, double t)
{
    const Vec3 pos = {ue.start[0] + ue.velocity[0] * t, ue.start[1] + ue.velocity[1] * t,
                      ue.start[2] + ue.velocity[2] * t};
    std::vector<RawPath> paths;
    if (ue.los) {
        const Vec3 d = sub(pos, scene.bs_position);
        const double len = norm(d);
        if (len < kMinDistance)
            throw GeometryError("UE " + std::to_string(ue.id) + " coincides with the BS");
        paths.push_back({len, dot(ue.velocity, d) / len, scaled(d, 1.0 / len), {1.0, 0.0}});
    }
    for (const auto &s : scene.scatterers) {
        const Vec3 d1 = sub(s.position, scene.bs_position);
        const Vec3 d2 = sub(pos, s.position);
        const double l1 = norm(d1), l2 = norm(d2);
        if (l1 < kMinDistance)
            throw GeometryError("scatterer coincides with the BS");
        if (l2 < kMinDistance)
            throw GeometryError("UE " + std::to_string(ue.id) + " coincides with a scatterer");
        paths.push_back({l1 + l2, dot(ue.velocity, d2) / l2, scaled(d1, 1.0 / l1), s.gain});
    }
    return paths;
}

} // namespace

std::vector<PathComponent> trace_paths(const Scene &scene, int ue_id, std::size_t snapshot)
{
    const UeTrack &ue = scene.ue(ue_id);
    const double t = static_cast<double>(snapshot) * scene.snapshot_interval_s;
    const auto now = raw_paths(scene, ue, t);
    const auto initial = snapshot == 0 ? now : raw_paths(scene, ue, 0.0);
    double reference = 0.0;
    if (scene.timing_sync) {
        reference = std::numeric_limits<double>::infinity();
        for (const auto &p : initial)
            reference = std::min(reference, p.length / kSpeedOfLight);
    }
    const double lambda = scene.wavelength();
    std::vector<PathComponent> out;
    for (std::size_t i = 0; i < now.size(); ++i) {
        const double carrier_phase = -kTwoPi * initial[i].length / lambda;
        const double amplitude = 1.0 / (4.0 * std::numbers::pi * now[i].length);
        out.push_back({now[i].reflection * std::polar(amplitude, carrier_phase),
                       now[i].length / kSpeedOfLight - reference, -initial[i].rate / lambda, now[i].direction});
    }
    return out;
}

ChannelTensor render_paths(const Scene &grid, const std::vector<std::vector<PathComponent>> &per_snapshot)
{
    if (per_snapshot.size() != grid.n_sp)
        throw DimensionError("render_paths: expected one path list per snapshot");
    const std::size_t n_ant = grid.n_ant();
    ComplexTensor h({grid.n_sub, grid.n_sp, n_ant});
    const double df = grid.subcarrier_spacing();
    const double half = static_cast<double>(grid.n_sub / 2);
    for (std::size_t t = 0; t < grid.n_sp; ++t) {
        const double time = static_cast<double>(t) * grid.snapshot_interval_s;
        for (const auto &p : per_snapshot[t]) {
            const auto steer = steering_vector(grid.ura, p.direction);
            const auto g = p.gain * std::polar(1.0, kTwoPi * p.doppler_hz * time);
            for (std::size_t f = 0; f < grid.n_sub; ++f) {
                const double f_sub = (static_cast<double>(f) - half) * df;
                const auto gf = g * std::polar(1.0, -kTwoPi * f_sub * p.delay_s);
                for (std::size_t a = 0; a < n_ant; ++a)
                    h.at({f, t, a}) += gf * steer[a];
            }
        }
    }
    return {std::move(h), ChannelRole::ground_truth, std::nullopt};
}

ChannelTensor synthesize(const Scene &scene, int ue_id)
{
    scene.check();
    std::vector<std::vector<PathComponent>> paths;
    paths.reserve(scene.n_sp);
    for (std::size_t t = 0; t < scene.n_sp; ++t)
        paths.push_back(trace_paths(scene, ue_id, t));
    return render_paths(scene, paths);
}

ChannelTensor add_noise(const ChannelTensor &h, double snr_db, std::uint64_t seed)
{
    if (h.role != ChannelRole::ground_truth)
        throw std::invalid_argument("add_noise expects a ground-truth channel");
    ChannelTensor out{h.data, ChannelRole::measured, snr_db};
    if (std::isinf(snr_db) && snr_db > 0)
        return out;
    double energy = 0.0;
    for (const auto &v : h.data.data())
        energy += std::norm(v);
    const double per_entry = energy / static_cast<double>(h.data.size()) / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(per_entry / 2.0);
    SplitMix64 rng(seed);
    for (auto &v : out.data.data()) {
        const double re = rng.normal();
        const double im = rng.normal();
        v += std::complex<double>(sigma * re, sigma * im);
    }
    return out;
}

PreprocessedTarget preprocess(const ChannelTensor &h, std::optional<double> scale)
{
    if (h.data.rank() != 3)
        throw DimensionError("preprocess expects an (N_sub, N_sp, N_ant) channel");
    const std::size_t n_sub = h.data.extent(0), n_sp = h.data.extent(1), n_ant = h.data.extent(2);
    PreprocessedTarget p;
    p.norms.assign(n_sp, 0.0);
    for (std::size_t f = 0; f < n_sub; ++f)
        for (std::size_t t = 0; t < n_sp; ++t)
            for (std::size_t a = 0; a < n_ant; ++a)
                p.norms[t] += std::norm(h.data.at({f, t, a}));
    for (std::size_t t = 0; t < n_sp; ++t) {
        p.norms[t] = std::sqrt(p.norms[t]);
        if (!(p.norms[t] > 0.0))
            throw std::domain_error("snapshot " + std::to_string(t) + " has zero norm");
    }
    p.data = RealTensor({n_sub, n_sp, 2 * n_ant});
    double peak = 0.0;
    for (std::size_t f = 0; f < n_sub; ++f)
        for (std::size_t t = 0; t < n_sp; ++t)
            for (std::size_t a = 0; a < n_ant; ++a) {
                const auto v = h.data.at({f, t, a});
                const double re = v.real() / p.norms[t], im = v.imag() / p.norms[t];
                p.data.at({f, t, a}) = re;
                p.data.at({f, t, n_ant + a}) = im;
                peak = std::max({peak, std::abs(re), std::abs(im)});
            }
    p.scale = scale.value_or(kDefaultTargetPeak / peak);
    for (auto &v : p.data.data())
        v *= p.scale;
    return p;
}

template <typename T>
ChannelTensor postprocess(const Tensor<T> &real, const std::vector<double> &norms, double scale)
{
    if (real.rank() != 3 || real.extent(2) % 2 != 0)
        throw DimensionError("postprocess expects (N_sub, N_sp, 2 N_ant) with an even last extent");
    const std::size_t n_sub = real.extent(0), n_sp = real.extent(1), n_ant = real.extent(2) / 2;
    if (norms.size() != n_sp)
        throw DimensionError("postprocess: one norm per snapshot required");
    ComplexTensor h({n_sub, n_sp, n_ant});
    for (std::size_t f = 0; f < n_sub; ++f)
        for (std::size_t t = 0; t < n_sp; ++t)
            for (std::size_t a = 0; a < n_ant; ++a) {
                const double re = static_cast<double>(real.at({f, t, a})) / scale * norms[t];
                const double im = static_cast<double>(real.at({f, t, n_ant + a})) / scale * norms[t];
                h.at({f, t, a}) = {re, im};
            }
    return {std::move(h), ChannelRole::estimated, std::nullopt};
}

template ChannelTensor postprocess(const Tensor<float> &, const std::vector<double> &, double);
template ChannelTensor postprocess(const Tensor<double> &, const std::vector<double> &, double);

// ---------------------------------------------------------------------------
// CSIT files

namespace {

constexpr std::uint16_t kTensorVersion = 1;
enum : std::uint8_t { kReal = 0, kComplex = 1 };

void write_header(detail::ByteWriter &w, std::uint8_t kind, const Shape &dims)
{
    w.text("CSIT");
    w.u16(kTensorVersion);
    w.u8(kind);
    w.u8(static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims)
        w.u32(static_cast<std::uint32_t>(d));
}

Shape read_header(detail::ByteReader &r, std::uint8_t expected_kind)
{
    if (r.text(4) != "CSIT")
        throw std::runtime_error("not a CSIT tensor file");
    if (r.u16() != kTensorVersion)
        throw std::runtime_error("unsupported CSIT version");
    if (r.u8() != expected_kind)
        throw std::runtime_error("CSIT scalar kind mismatch");
    const auto rank = r.u8();
    Shape dims(rank);
    for (auto &d : dims)
        d = r.u32();
    return dims;
}

} // namespace

void write_tensor(const std::filesystem::path &path, const ComplexTensor &t)
{
    detail::ByteWriter w;
    write_header(w, kComplex, t.dims());
    for (const auto &v : t.data()) {
        w.f32(static_cast<float>(v.real()));
        w.f32(static_cast<float>(v.imag()));
    }
    detail::write_file_atomic(path.string(), w.buffer());
}

void write_tensor(const std::filesystem::path &path, const RealTensor &t)
{
    detail::ByteWriter w;
    write_header(w, kReal, t.dims());
    for (const auto v : t.data())
        w.f32(static_cast<float>(v));
    detail::write_file_atomic(path.string(), w.buffer());
}

ComplexTensor read_complex_tensor(const std::filesystem::path &path)
{
    const auto bytes = detail::read_file(path.string());
    detail::ByteReader r(bytes);
    ComplexTensor t(read_header(r, kComplex));
    for (auto &v : t.data()) {
        const float re = r.f32();
        const float im = r.f32();
        v = {re, im};
    }
    return t;
}

RealTensor read_real_tensor(const std::filesystem::path &path)
{
    const auto bytes = detail::read_file(path.string());
    detail::ByteReader r(bytes);
    RealTensor t(read_header(r, kReal));
    for (auto &v : t.data())
        v = r.f32();
    return t;
}

} // namespace unncsi
