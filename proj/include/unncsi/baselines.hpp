// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "unncsi/channel.hpp"

namespace unncsi {

// Returned by nmse_db when the estimate is exact.
inline constexpr double kNmseFloorDb = -300.0;

// ||est - truth||^2 / ||truth||^2 (linear).
double nmse_ratio(const ComplexTensor &est, const ComplexTensor &truth);
double nmse_db(const ComplexTensor &est, const ComplexTensor &truth);
inline double nmse_db(const ChannelTensor &est, const ChannelTensor &truth) { return nmse_db(est.data, truth.data); }

double ratio_to_db(double ratio);

// Direct observation: the measurement itself.
ChannelTensor mmse_raw(const ChannelTensor &meas);

// Antenna-domain Wiener filter R (R + sigma^2 I)^-1 applied to every
// (subcarrier, snapshot) vector, with R the sample covariance of the true
// antenna vectors and sigma^2 the calibrated per-coefficient noise power.
ChannelTensor mmse_genie(const ChannelTensor &meas, const ChannelTensor &truth, double snr_db);

// Same filter with an explicit covariance and noise power.
ChannelTensor wiener_filter(const ChannelTensor &meas, const ComplexTensor &covariance, double noise_power);

// Sample covariance of the antenna vectors, (N_ant, N_ant).
ComplexTensor antenna_covariance(const ChannelTensor &h);

// Expected per-coefficient noise power add_noise uses for this SNR.
double calibrated_noise_power(const ChannelTensor &truth, double snr_db);

} // namespace unncsi
