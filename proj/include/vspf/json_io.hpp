#pragma once

// JSON forms of configs, results and training data. Parsers take a base
// object and override only the keys present, so a partial config file works;
// unknown keys are rejected.

#include "vspf/bench.hpp"
#include "vspf/learning.hpp"
#include "vspf/optimizer.hpp"
#include "vspf/registration.hpp"

#include <json.hpp>

#include <filesystem>

namespace vspf {

using Json = nlohmann::ordered_json;

Json to_json(const RigidParams& p);
RigidParams rigid_params_from_json(const Json& j);

Json to_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_config_from_json(const Json& j, OptimizerConfig base = {});

Json to_json(const RegistrationConfig& cfg);
RegistrationConfig registration_config_from_json(const Json& j, RegistrationConfig base = {});

Json to_json(const RegistrationResult& result);

Json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const Json& j, PhantomSpec base = {});

Json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig base = {});

Json to_json(const ExperimentReport& report);

Json to_json(const LearnedSchedule& sched);
LearnedSchedule learned_schedule_from_json(const Json& j);

/// Writes <dir>/ref.mhd, <dir>/mov.mhd and <dir>/pair.json.
void save_training_pair(const TrainingPair& pair, const std::filesystem::path& dir);
/// Reads a pair.json; volume paths inside it are relative to its directory.
TrainingPair load_training_pair(const std::filesystem::path& pair_json);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace vspf
