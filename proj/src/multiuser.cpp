// SPDX-License-Identifier: Apache-2.0

#include "unncsi/multiuser.hpp"

#include "unncsi/baselines.hpp"

namespace unncsi {

GroupTarget build_group(const std::vector<int> &ue_ids, const std::vector<PreprocessedTarget> &targets)
{
    if (ue_ids.empty() || ue_ids.size() != targets.size())
        throw std::invalid_argument("build_group: need one target per UE id and at least one UE");
    const Shape &d = targets.front().data.dims();
    for (const auto &t : targets)
        if (t.data.dims() != d)
            throw DimensionError("build_group: targets " + shape_string(t.data.dims()) + " and " + shape_string(d) +
                                 " are on different grids");
    const std::size_t n_sub = d[0], n_sp = d[1], ch = d[2], m = targets.size();
    GroupTarget g;
    g.ue_ids = ue_ids;
    g.data = RealTensor({n_sp, n_sub, m, ch});
    for (std::size_t u = 0; u < m; ++u) {
        for (std::size_t f = 0; f < n_sub; ++f)
            for (std::size_t t = 0; t < n_sp; ++t)
                for (std::size_t c = 0; c < ch; ++c)
                    g.data.at({t, f, u, c}) = targets[u].data.at({f, t, c});
        g.norms.push_back(targets[u].norms);
        g.scales.push_back(targets[u].scale);
    }
    return g;
}

template <typename T>
std::vector<Tensor<T>> split_ue_slices(const Tensor<T> &g)
{
    if (g.rank() != 4)
        throw DimensionError("split_ue_slices expects (N_sp, N_sub, M, C), got " + shape_string(g.dims()));
    const std::size_t n_sp = g.extent(0), n_sub = g.extent(1), m = g.extent(2), ch = g.extent(3);
    std::vector<Tensor<T>> out;
    for (std::size_t u = 0; u < m; ++u) {
        Tensor<T> s({n_sub, n_sp, ch});
        for (std::size_t f = 0; f < n_sub; ++f)
            for (std::size_t t = 0; t < n_sp; ++t)
                for (std::size_t c = 0; c < ch; ++c)
                    s.at({f, t, c}) = g.at({t, f, u, c});
        out.push_back(std::move(s));
    }
    return out;
}

template std::vector<Tensor<float>> split_ue_slices(const Tensor<float> &);
template std::vector<Tensor<double>> split_ue_slices(const Tensor<double> &);

std::vector<PreprocessedTarget> split_group(const GroupTarget &group)
{
    auto slices = split_ue_slices(group.data);
    std::vector<PreprocessedTarget> out;
    for (std::size_t u = 0; u < slices.size(); ++u)
        out.push_back({std::move(slices[u]), group.norms.at(u), group.scales.at(u)});
    return out;
}

GroupFitResult fit_group(const DecoderSpec &spec, const GroupTarget &group, const FitConfig &config,
                         const std::vector<ChannelTensor> &truths)
{
    if (truths.size() != group.ue_ids.size())
        throw std::invalid_argument("fit_group: one ground truth per UE required");
    if (spec.output_dims() != group.data.dims())
        throw SpecError("fit_group: decoder output " + shape_string(spec.output_dims()) + " does not match group " +
                        shape_string(group.data.dims()));
    const auto z0 = generate_seed(spec).as<float>();
    GroupFitResult r;
    r.report = fit(spec, z0, to_float(group.data), config);
    const auto slices = split_ue_slices(forward(spec, r.report.params, z0, config.backend));
    for (std::size_t u = 0; u < slices.size(); ++u) {
        r.estimates.push_back(postprocess(slices[u], group.norms[u], group.scales[u]));
        r.nmse_db.push_back(nmse_db(r.estimates.back(), truths[u]));
    }
    return r;
}

} // namespace unncsi
