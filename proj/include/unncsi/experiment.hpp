// SPDX-License-Identifier: Apache-2.0

#pragma once

// End-to-end experiment driver behind the unn_csi tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unncsi/channel.hpp"
#include "unncsi/fit.hpp"
#include "unncsi/transfer.hpp"

namespace unncsi {

enum class Mode { single, transfer, group, codec, sweep };
enum class Profile { desk, paper };

Mode mode_from_string(const std::string &s);
std::string to_string(Mode m);
Profile profile_from_string(const std::string &s);
std::string to_string(Profile p);

struct GroupSpec {
    std::string id;
    std::vector<int> ues;
    std::size_t preoutput_layers = 1;
    std::optional<std::size_t> iterations; // default: M times the single-UE budget
};

struct ExperimentConfig {
    std::filesystem::path scene_path = "data/scenes/street_canyon.json";
    std::optional<std::filesystem::path> decoder_path; // single-UE decoder JSON, else the profile default
    Profile profile = Profile::desk;
    Mode mode = Mode::single;
    nlohmann::json fit_overrides = nlohmann::json::object(); // applied over the profile default
    std::vector<double> snrs_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<int> ues;                   // empty: every UE in the scene
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<std::string> estimators{"mmse_raw", "mmse_genie", "unn"};
    std::vector<TransferPlan> plans;
    std::vector<GroupSpec> groups;
    std::filesystem::path out = "runs/latest";
    std::size_t workers = 1;
    bool write_tensors = false;
    SeedRule seed_rule{};

    FitConfig effective_fit() const;
};

// Relative paths inside the file resolve against its directory.
ExperimentConfig experiment_config_from_json(const nlohmann::json &j, const std::filesystem::path &base_dir = ".");
ExperimentConfig load_experiment_config(const std::filesystem::path &path);
nlohmann::json to_json(const ExperimentConfig &c);

// Grid used by a profile: desk crops to 16 x 16 with a 2 x 2 array, keeping
// subcarrier spacing and snapshot interval; paper keeps the scene as is.
Scene profile_scene(const Scene &scene, Profile profile);
DecoderSpec profile_decoder(Profile profile, const Scene &grid, SeedRule rule = {});
DecoderSpec profile_group_decoder(Profile profile, const Scene &grid, std::size_t m, std::size_t preoutput,
                                  SeedRule rule = {});
FitConfig profile_fit(Profile profile);

struct Diagnostic {
    enum class Level { error, warning };
    Level level = Level::error;
    std::string message;
};

// Checks a decoder against a grid (m > 0 for a multi-user decoder).
std::vector<Diagnostic> validate_decoder(const DecoderSpec &spec, std::size_t n_sub, std::size_t n_sp,
                                         std::size_t n_ant, std::size_t m = 0);
std::vector<Diagnostic> validate(const ExperimentConfig &config);
bool has_errors(const std::vector<Diagnostic> &diagnostics);

// Runs the configured mode and writes its artifacts under config.out.
// Returns 0 on success, nonzero when validation fails.
int run(const ExperimentConfig &config, std::ostream &log);

} // namespace unncsi
