// SPDX-License-Identifier: Apache-2.0

#include "unncsi/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "format.hpp"
#include "pool.hpp"
#include "unncsi/baselines.hpp"
#include "unncsi/rng.hpp"
#include "unncsi/transfer.hpp"

namespace unncsi {

namespace {

std::int64_t snr_tag(double snr_db)
{
    return std::isfinite(snr_db) ? std::llround(snr_db * 1000.0) : INT64_MAX;
}

nlohmann::json snr_value(double snr_db)
{
    return std::isfinite(snr_db) ? nlohmann::json(snr_db) : nlohmann::json("inf");
}

} // namespace

std::uint64_t noise_seed(std::uint64_t seed, int ue, double snr_db) { return derive_seed(seed, {ue, snr_tag(snr_db)}); }

std::uint64_t cell_init_seed(std::uint64_t base, int ue, std::uint64_t seed)
{
    return derive_seed(ue_init_seed(base, ue), {static_cast<std::int64_t>(seed)});
}

std::vector<SweepCell> run_sweep_cells(const SweepSetup &s)
{
    for (const auto &e : s.estimators)
        if (std::find(kEstimators.begin(), kEstimators.end(), e) == kEstimators.end())
            throw std::invalid_argument("unknown estimator '" + e + "'");
    if (s.seeds.empty())
        throw std::invalid_argument("sweep needs at least one seed");

    std::map<int, ChannelTensor> truths;
    for (int ue : s.ues)
        truths.emplace(ue, synthesize(s.scene, ue));

    struct Key {
        int ue;
        double snr;
        std::uint64_t seed;
    };
    std::vector<Key> keys;
    for (int ue : s.ues)
        for (double snr : s.snrs_db)
            for (auto seed : s.seeds)
                keys.push_back({ue, snr, seed});

    const bool need_unn = std::find(s.estimators.begin(), s.estimators.end(), "unn") != s.estimators.end();
    const auto z0 = generate_seed(s.spec).as<float>();
    std::vector<std::vector<SweepCell>> per_key(keys.size());
    detail::parallel_for(keys.size(), s.workers, [&](std::size_t i) {
        const Key &k = keys[i];
        const ChannelTensor &truth = truths.at(k.ue);
        const ChannelTensor meas = add_noise(truth, k.snr, noise_seed(k.seed, k.ue, k.snr));
        const double meas_nmse = nmse_ratio(meas.data, truth.data);
        for (const auto &e : s.estimators) {
            SweepCell c{e, k.ue, k.snr, k.seed, meas_nmse, 0.0, std::nullopt};
            if (e == "mmse_raw") {
                c.estimate_nmse = nmse_ratio(mmse_raw(meas).data, truth.data);
            } else if (e == "mmse_genie") {
                c.estimate_nmse = nmse_ratio(mmse_genie(meas, truth, k.snr).data, truth.data);
            } else if (need_unn) {
                const auto target = preprocess(meas);
                FitConfig cfg = s.fit;
                cfg.init_seed = cell_init_seed(s.fit.init_seed, k.ue, k.seed);
                try {
                    c.fit = fit(s.spec, z0, to_float(target.data), cfg);
                    const auto est = postprocess(forward(s.spec, c.fit->params, z0, cfg.backend), target.norms,
                                                 target.scale);
                    c.estimate_nmse = nmse_ratio(est.data, truth.data);
                } catch (const FitDiverged &) {
                    c.estimate_nmse = std::nan("");
                }
            }
            per_key[i].push_back(std::move(c));
        }
    });
    std::vector<SweepCell> cells;
    for (auto &v : per_key)
        for (auto &c : v)
            cells.push_back(std::move(c));
    return cells;
}

std::vector<EvalRecord> aggregate(const std::vector<SweepCell> &cells)
{
    struct Acc {
        double meas = 0.0, est = 0.0;
        std::size_t n = 0;
    };
    // Estimator order follows first appearance; UE and SNR ascending.
    std::vector<std::string> order;
    std::map<std::tuple<std::string, int, double>, Acc> acc;
    for (const auto &c : cells) {
        if (std::find(order.begin(), order.end(), c.estimator) == order.end())
            order.push_back(c.estimator);
        auto &a = acc[{c.estimator, c.ue, c.snr_db}];
        if (std::isnan(c.estimate_nmse))
            continue;
        a.meas += c.measurement_nmse;
        a.est += c.estimate_nmse;
        ++a.n;
    }
    std::vector<EvalRecord> out;
    for (const auto &e : order)
        for (const auto &[key, a] : acc) {
            if (std::get<0>(key) != e)
                continue;
            EvalRecord r{e, std::get<1>(key), std::get<2>(key), a.n, std::nan(""), std::nan("")};
            if (a.n > 0) {
                const double n = static_cast<double>(a.n);
                r.nmse_db = ratio_to_db(a.est / n);
                r.gain_db = ratio_to_db(a.meas / n) - r.nmse_db;
            }
            out.push_back(r);
        }
    return out;
}

std::string eval_csv(const std::vector<EvalRecord> &records)
{
    std::ostringstream os;
    os << "estimator,ue,snr_db,seed_count,nmse_db,gain_db\n";
    for (const auto &r : records)
        os << r.estimator << ',' << r.ue << ',' << detail::format_double(r.snr_db) << ',' << r.seed_count << ','
           << detail::format_double(r.nmse_db) << ',' << detail::format_double(r.gain_db) << '\n';
    return os.str();
}

nlohmann::json curves_json(const std::vector<EvalRecord> &records)
{
    nlohmann::json series = nlohmann::json::array();
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (const auto &r : records) {
        const auto key = std::make_pair(r.estimator, r.ue);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, series.size()).first;
            series.push_back({{"estimator", r.estimator},
                              {"ue", r.ue},
                              {"snr_db", nlohmann::json::array()},
                              {"nmse_db", nlohmann::json::array()}});
        }
        auto &s = series[it->second];
        s["snr_db"].push_back(snr_value(r.snr_db));
        s["nmse_db"].push_back(std::isfinite(r.nmse_db) ? nlohmann::json(r.nmse_db) : nlohmann::json());
    }
    return {{"x_axis", "snr_db"}, {"y_axis", "nmse_db"}, {"series", series}};
}

} // namespace unncsi
