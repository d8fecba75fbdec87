// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "unncsi/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string &s)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.empty())
            continue;
        const auto dash = item.find('-');
        if (dash != std::string::npos && dash > 0) {
            const auto lo = std::stoull(item.substr(0, dash)), hi = std::stoull(item.substr(dash + 1));
            if (hi < lo)
                throw std::invalid_argument("bad seed range '" + item + "'");
            for (auto v = lo; v <= hi; ++v)
                out.push_back(v);
        } else {
            out.push_back(std::stoull(item));
        }
    }
    if (out.empty())
        throw std::invalid_argument("empty seed list");
    return out;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Untrained-network CSI recreation experiments"};
    std::string config_path, mode, out, profile, seed_list, snr_list, ue_list;
    std::size_t workers = 0, iterations = 0;
    bool validate_only = false, write_tensors = false;
    app.add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
    app.add_option("--mode", mode, "single | transfer | group | codec | sweep");
    app.add_option("--out", out, "Output directory");
    app.add_option("--workers", workers, "Worker threads for grid cells");
    app.add_option("--profile", profile, "desk | paper");
    app.add_option("--seed-list", seed_list, "Comma-separated seeds, ranges allowed (1-5)");
    app.add_option("--snr-list", snr_list, "Comma-separated SNRs in dB ('inf' for noiseless)");
    app.add_option("--ues", ue_list, "Comma-separated UE ids");
    app.add_option("--iterations", iterations, "Override the fit iteration count");
    app.add_flag("--validate", validate_only, "Check the config and exit");
    app.add_flag("--write-tensors", write_tensors, "Also write channel tensors (.csit)");
    CLI11_PARSE(app, argc, argv);

    try {
        unncsi::ExperimentConfig c;
        if (!config_path.empty())
            c = unncsi::load_experiment_config(config_path);
        if (!mode.empty())
            c.mode = unncsi::mode_from_string(mode);
        if (!profile.empty())
            c.profile = unncsi::profile_from_string(profile);
        if (!out.empty())
            c.out = out;
        if (workers > 0)
            c.workers = workers;
        if (const char *env = std::getenv("UNN_CSI_THREADS"); env && *env)
            c.workers = std::max<std::size_t>(1, std::stoul(env));
        if (!seed_list.empty())
            c.seeds = parse_seed_list(seed_list);
        if (!snr_list.empty()) {
            c.snrs_db.clear();
            std::stringstream ss(snr_list);
            for (std::string item; std::getline(ss, item, ',');)
                c.snrs_db.push_back(item == "inf" ? INFINITY : std::stod(item));
        }
        if (!ue_list.empty()) {
            c.ues.clear();
            std::stringstream ss(ue_list);
            for (std::string item; std::getline(ss, item, ',');)
                c.ues.push_back(std::stoi(item));
        }
        if (iterations > 0)
            c.fit_overrides["iterations"] = iterations;
        if (write_tensors)
            c.write_tensors = true;

        if (validate_only) {
            const auto d = unncsi::validate(c);
            for (const auto &x : d)
                std::cout << (x.level == unncsi::Diagnostic::Level::error ? "error: " : "warning: ") << x.message
                          << '\n';
            if (d.empty())
                std::cout << "ok\n";
            return unncsi::has_errors(d) ? 2 : 0;
        }
        return unncsi::run(c, std::cerr);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
