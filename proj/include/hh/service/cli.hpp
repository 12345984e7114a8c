#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hh/eval/oracle.hpp"
#include "hh/flow/config.hpp"
#include "hh/sim/dataset.hpp"

namespace hh::service {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Training run file: {"preset": "desk"|"reference", "model": {...}, "train": {...}, "variant": "full"}.
/// Sections start from the preset and are overridden field by field.
struct RunConfig {
    flow::ModelConfig model = flow::ModelConfig::desk();
    flow::TrainConfig train = flow::TrainConfig::desk();
    std::string variant = "full";
};

/// Config loaders. Every unknown or invalid field across all sections is reported in one ConfigError.
sim::DatasetConfig dataset_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);
eval::OracleConfig oracle_config_from_json(const nlohmann::json& j);
nlohmann::json load_json_file(const std::filesystem::path& path);

/// `explicit_dir` when set, else $HH_DATA_DIR; throws ConfigError when neither is available.
std::filesystem::path resolve_data_dir(const std::string& explicit_dir);

/// Runs the `hh` command line. Returns the process exit code: 0 on success, 1 with a one-line
/// diagnostic on `err` for failures, 2 with usage text for malformed command lines.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hh::service
