// SPDX-License-Identifier: Apache-2.0

#include "unncsi/fit.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "format.hpp"

namespace unncsi {

void FitConfig::check() const
{
    if (iterations < 1)
        throw std::invalid_argument("fit needs at least one iteration");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("learning rate must be positive");
    if (optimizer == Optimizer::adam && !(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("adam betas must lie in (0, 1)");
    if (trace_period < 1)
        throw std::invalid_argument("trace period must be at least 1");
}

nlohmann::json to_json(const FitConfig &c)
{
    return {
        {"iterations", c.iterations},
        {"learning_rate", c.learning_rate},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"adam_eps", c.adam_eps},
        {"trace_period", c.trace_period},
        {"init_seed", c.init_seed},
        {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "sgd"},
        {"backend", to_string(c.backend)},
    };
}

FitConfig fit_config_from_json(const nlohmann::json &j, FitConfig c)
{
    c.iterations = j.value("iterations", c.iterations);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.trace_period = j.value("trace_period", c.trace_period);
    c.init_seed = j.value("init_seed", c.init_seed);
    if (j.contains("optimizer")) {
        const auto name = j.at("optimizer").get<std::string>();
        if (name == "adam")
            c.optimizer = Optimizer::adam;
        else if (name == "sgd")
            c.optimizer = Optimizer::sgd;
        else
            throw std::invalid_argument("unknown optimizer '" + name + "'");
    }
    if (j.contains("backend"))
        c.backend = backend_from_string(j.at("backend").get<std::string>());
    c.check();
    return c;
}

template <typename T>
double loss(const DecoderSpec &spec, const ParamSet<T> &params, const Tensor<T> &z0, const Tensor<T> &target,
            Backend backend)
{
    Decoder<T> d(spec, backend);
    return d.loss(params, z0, target);
}

template <typename T>
ParamSet<T> gradient(const DecoderSpec &spec, const ParamSet<T> &params, const Tensor<T> &z0,
                     const Tensor<T> &target, Backend backend)
{
    Decoder<T> d(spec, backend);
    ParamSet<T> g(spec);
    d.loss_and_gradient(params, z0, target, g);
    return g;
}

template double loss(const DecoderSpec &, const ParamSet<float> &, const Tensor<float> &, const Tensor<float> &,
                     Backend);
template double loss(const DecoderSpec &, const ParamSet<double> &, const Tensor<double> &, const Tensor<double> &,
                     Backend);
template ParamSet<float> gradient(const DecoderSpec &, const ParamSet<float> &, const Tensor<float> &,
                                  const Tensor<float> &, Backend);
template ParamSet<double> gradient(const DecoderSpec &, const ParamSet<double> &, const Tensor<double> &,
                                   const Tensor<double> &, Backend);

FitReport fit(const DecoderSpec &spec, const Tensor<float> &z0, const Tensor<float> &target, const FitConfig &config,
              const std::optional<ParamSet<float>> &init)
{
    config.check();
    const auto start = std::chrono::steady_clock::now();

    FitReport report;
    report.init_seed = config.init_seed;
    report.warm_start = init.has_value();
    report.iterations = config.iterations;
    ParamSet<float> params = init ? *init : init_params<float>(spec, config.init_seed);
    if (!params.same_layout(ParamSet<float>(spec)))
        throw SpecError("initial parameters do not match the decoder spec");

    Decoder<float> decoder(spec, config.backend);
    ParamSet<float> grads(spec);
    std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);
    double initial = 0.0;

    for (std::size_t it = 0; it < config.iterations; ++it) {
        const double value = decoder.loss_and_gradient(params, z0, target, grads);
        if (it == 0)
            initial = value;
        if (!std::isfinite(value) || value > kDivergenceFactor * std::max(initial, 1e-30))
            throw FitDiverged("fit diverged at iteration " + std::to_string(it) + ": loss " + std::to_string(value) +
                              " (initial " + std::to_string(initial) + ")");
        if (it % config.trace_period == 0)
            report.trace.push_back({it, value});

        auto p = params.values();
        auto g = grads.values();
        if (config.optimizer == Optimizer::adam) {
            const double step = static_cast<double>(it + 1);
            const double c1 = 1.0 - std::pow(config.beta1, step);
            const double c2 = 1.0 - std::pow(config.beta2, step);
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double gi = g[i];
                m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * gi;
                m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * gi * gi;
                const double upd = config.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + config.adam_eps);
                p[i] = static_cast<float>(static_cast<double>(p[i]) - upd);
            }
        } else {
            for (std::size_t i = 0; i < p.size(); ++i)
                p[i] = static_cast<float>(static_cast<double>(p[i]) - config.learning_rate * g[i]);
        }
    }

    report.final_mse = decoder.loss(params, z0, target);
    if (!std::isfinite(report.final_mse))
        throw FitDiverged("fit ended with a non-finite loss");
    report.trace.push_back({config.iterations, report.final_mse});
    report.params = std::move(params);
    report.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string trace_csv(const FitReport &report)
{
    std::ostringstream os;
    os << "iteration,mse\n";
    for (const auto &p : report.trace)
        os << p.iteration << ',' << detail::format_double(p.mse) << '\n';
    return os.str();
}

nlohmann::json summary_json(const FitReport &report)
{
    return {
        {"iterations", report.iterations},
        {"final_mse", report.final_mse},
        {"initial_mse", report.trace.front().mse},
        {"elapsed_s", report.elapsed_s},
        {"init_seed", report.init_seed},
        {"warm_start", report.warm_start},
        {"param_count", report.params.size()},
    };
}

} // namespace unncsi
