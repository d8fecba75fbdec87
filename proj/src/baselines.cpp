// SPDX-License-Identifier: Apache-2.0

#include "unncsi/baselines.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace unncsi {

double nmse_ratio(const ComplexTensor &est, const ComplexTensor &truth)
{
    if (est.dims() != truth.dims())
        throw DimensionError("nmse: estimate " + shape_string(est.dims()) + " vs truth " + shape_string(truth.dims()));
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        err += std::norm(est[i] - truth[i]);
        ref += std::norm(truth[i]);
    }
    if (!(ref > 0.0))
        throw std::domain_error("nmse: truth has zero norm");
    return err / ref;
}

double ratio_to_db(double ratio)
{
    if (!(ratio > 0.0))
        return kNmseFloorDb;
    return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

double nmse_db(const ComplexTensor &est, const ComplexTensor &truth) { return ratio_to_db(nmse_ratio(est, truth)); }

ChannelTensor mmse_raw(const ChannelTensor &meas) { return {meas.data, ChannelRole::estimated, meas.snr_db}; }

double calibrated_noise_power(const ChannelTensor &truth, double snr_db)
{
    double energy = 0.0;
    for (const auto &v : truth.data.data())
        energy += std::norm(v);
    return energy / static_cast<double>(truth.data.size()) / std::pow(10.0, snr_db / 10.0);
}

ComplexTensor antenna_covariance(const ChannelTensor &h)
{
    const std::size_t n_ant = h.data.dims().back();
    const std::size_t vectors = h.data.size() / n_ant;
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n_ant), static_cast<Eigen::Index>(n_ant));
    for (std::size_t v = 0; v < vectors; ++v) {
        Eigen::Map<const Eigen::VectorXcd> x(h.data.data().data() + v * n_ant, static_cast<Eigen::Index>(n_ant));
        r.noalias() += x * x.adjoint();
    }
    r /= static_cast<double>(vectors);
    ComplexTensor out({n_ant, n_ant});
    for (std::size_t i = 0; i < n_ant; ++i)
        for (std::size_t j = 0; j < n_ant; ++j)
            out.at({i, j}) = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return out;
}

ChannelTensor wiener_filter(const ChannelTensor &meas, const ComplexTensor &covariance, double noise_power)
{
    const std::size_t n_ant = meas.data.dims().back();
    if (covariance.dims() != Shape{n_ant, n_ant})
        throw DimensionError("wiener_filter: covariance must be N_ant x N_ant");
    const auto n = static_cast<Eigen::Index>(n_ant);
    Eigen::MatrixXcd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            r(i, j) = covariance.at({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
    const Eigen::MatrixXcd regularised = r + noise_power * Eigen::MatrixXcd::Identity(n, n);
    // F = R (R + s I)^-1 = ((R + s I)^-H R^H)^H; R is Hermitian.
    const Eigen::MatrixXcd filter = regularised.adjoint().ldlt().solve(r.adjoint()).adjoint();

    ChannelTensor out{meas.data, ChannelRole::estimated, meas.snr_db};
    const std::size_t vectors = meas.data.size() / n_ant;
    for (std::size_t v = 0; v < vectors; ++v) {
        Eigen::Map<const Eigen::VectorXcd> x(meas.data.data().data() + v * n_ant, n);
        Eigen::Map<Eigen::VectorXcd> y(out.data.data().data() + v * n_ant, n);
        y = filter * x;
    }
    return out;
}

ChannelTensor mmse_genie(const ChannelTensor &meas, const ChannelTensor &truth, double snr_db)
{
    if (meas.data.dims() != truth.data.dims())
        throw DimensionError("mmse_genie: measurement and truth shapes differ");
    return wiener_filter(meas, antenna_covariance(truth), calibrated_noise_power(truth, snr_db));
}

} // namespace unncsi
