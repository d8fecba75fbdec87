// SPDX-License-Identifier: Apache-2.0

#include "unncsi/transfer.hpp"

#include <cmath>
#include <future>
#include <set>

#include "unncsi/baselines.hpp"
#include "unncsi/rng.hpp"

namespace unncsi {

void TransferPlan::check() const
{
    std::set<int> fitted{base_ue};
    for (const auto &s : chain) {
        if (fitted.count(s.target_ue))
            throw std::invalid_argument("plan '" + name + "': UE " + std::to_string(s.target_ue) +
                                        " is fitted more than once");
        if (s.init_from != kRandomInit && !fitted.count(s.init_from))
            throw std::invalid_argument("plan '" + name + "': UE " + std::to_string(s.target_ue) +
                                        " initialises from UE " + std::to_string(s.init_from) +
                                        " which is not fitted earlier in the plan");
        fitted.insert(s.target_ue);
    }
}

std::vector<int> TransferPlan::ues() const
{
    std::vector<int> out{base_ue};
    for (const auto &s : chain)
        out.push_back(s.target_ue);
    return out;
}

TransferPlan transfer_plan_from_json(const nlohmann::json &j)
{
    TransferPlan p;
    p.name = j.value("name", std::string("plan"));
    p.base_ue = j.at("base").get<int>();
    for (const auto &s : j.value("chain", nlohmann::json::array())) {
        const auto &from = s.at("from");
        const int init = from.is_string() && from.get<std::string>() == "random" ? kRandomInit : from.get<int>();
        p.chain.push_back({s.at("ue").get<int>(), init});
    }
    p.check();
    return p;
}

nlohmann::json to_json(const TransferPlan &plan)
{
    nlohmann::json chain = nlohmann::json::array();
    for (const auto &s : plan.chain)
        chain.push_back({{"ue", s.target_ue},
                         {"from", s.init_from == kRandomInit ? nlohmann::json("random") : nlohmann::json(s.init_from)}});
    return {{"name", plan.name}, {"base", plan.base_ue}, {"chain", chain}};
}

std::uint64_t ue_init_seed(std::uint64_t base, int ue) { return derive_seed(base, {ue}); }

ChannelTensor estimate_channel(const DecoderSpec &spec, const ParamSet<float> &params, const PreprocessedTarget &meta,
                               Backend backend)
{
    const auto z0 = generate_seed(spec).as<float>();
    return postprocess(forward(spec, params, z0, backend), meta.norms, meta.scale);
}

std::map<int, TransferResult> run_transfer(const TransferPlan &plan, const DecoderSpec &spec, const FitConfig &config,
                                           const std::map<int, UeData> &ues, std::size_t workers)
{
    plan.check();
    for (int ue : plan.ues())
        if (!ues.count(ue))
            throw std::invalid_argument("plan '" + plan.name + "' references UE " + std::to_string(ue) +
                                        " with no measurement");
    const auto z0 = generate_seed(spec).as<float>();

    auto run_one = [&](int ue, int init_from, const ParamSet<float> *init) {
        const UeData &d = ues.at(ue);
        FitConfig c = config;
        c.init_seed = ue_init_seed(config.init_seed, ue);
        TransferResult r;
        r.ue = ue;
        r.init_from = init_from;
        r.report = init ? fit(spec, z0, to_float(d.target.data), c, *init) : fit(spec, z0, to_float(d.target.data), c);
        r.estimate = postprocess(forward(spec, r.report.params, z0, config.backend), d.target.norms, d.target.scale);
        r.nmse_db = nmse_db(r.estimate, d.truth);
        return r;
    };

    std::map<int, TransferResult> results;
    results.emplace(plan.base_ue, run_one(plan.base_ue, kRandomInit, nullptr));

    // Group chain entries by depth; an entry depends only on shallower ones.
    std::map<int, int> depth{{plan.base_ue, 0}};
    std::map<int, std::vector<TransferStep>> levels;
    for (const auto &s : plan.chain) {
        const int d = s.init_from == kRandomInit ? 1 : depth.at(s.init_from) + 1;
        depth[s.target_ue] = d;
        levels[d].push_back(s);
    }
    for (const auto &[d, steps] : levels) {
        if (workers <= 1 || steps.size() == 1) {
            for (const auto &s : steps) {
                const ParamSet<float> *init = s.init_from == kRandomInit ? nullptr : &results.at(s.init_from).report.params;
                results.emplace(s.target_ue, run_one(s.target_ue, s.init_from, init));
            }
            continue;
        }
        std::vector<std::future<TransferResult>> pending;
        for (const auto &s : steps) {
            const ParamSet<float> *init = s.init_from == kRandomInit ? nullptr : &results.at(s.init_from).report.params;
            pending.push_back(std::async(std::launch::async, run_one, s.target_ue, s.init_from, init));
        }
        for (std::size_t i = 0; i < steps.size(); ++i)
            results.emplace(steps[i].target_ue, pending[i].get());
    }
    return results;
}

WeightDistance weight_distance(const ParamSet<float> &a, const ParamSet<float> &b)
{
    if (!a.same_layout(b))
        throw SpecError("weight_distance: parameter sets describe different decoders");
    WeightDistance d;
    double total = 0.0;
    for (std::size_t l = 0; l < a.layers(); ++l) {
        const auto ka = a.kernel(l), kb = b.kernel(l);
        double s = 0.0;
        for (std::size_t i = 0; i < ka.size(); ++i) {
            const double diff = static_cast<double>(ka[i]) - static_cast<double>(kb[i]);
            s += diff * diff;
        }
        d.per_layer.push_back(std::sqrt(s));
        total += s;
    }
    d.total = std::sqrt(total);
    return d;
}

} // namespace unncsi
