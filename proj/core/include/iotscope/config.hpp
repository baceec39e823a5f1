#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string_view>

#include "iotscope/eval.hpp"
#include "iotscope/features.hpp"
#include "iotscope/model.hpp"

namespace iotscope {

inline constexpr std::string_view kConfigEnvVar = "IOTSCOPE_CONFIG";

// Pipeline defaults. Every field may be overridden by a JSON config file:
//
//   {
//     "flow":   {"idle_timeout_s": 120, "activity_timeout_s": 5, "subflow_gap_s": 1,
//                "bulk_gap_s": 1, "bulk_min_packets": 4},
//     "split":  {"fraction": 0.7, "seed": 0},
//     "models": {"rf": {"n_trees": 200}, "knn": {"algorithm": "kd_tree"}},
//     "grids":  {"knn": {"k": [3, 5, 7]}},
//     "folds":  5
//   }
//
// Unknown keys are rejected so that typos do not silently fall back to defaults.
struct Config {
    FlowConfig flow;
    double split_fraction = 0.7;
    std::uint64_t split_seed = 0;
    std::map<ModelKind, ModelParams> models;
    std::map<ModelKind, ParamGrid> grids;
    std::size_t folds = 5;

    Config();

    const ModelParams& params(ModelKind kind) const { return models.at(kind); }
    const ParamGrid& grid(ModelKind kind) const { return grids.at(kind); }

    void validate() const;  // InvalidArgument
};

Config parse_config(std::string_view json_text);            // ParseError, InvalidArgument
Config load_config(const std::filesystem::path& path);      // IoError, ParseError, InvalidArgument
// Reads the file named by IOTSCOPE_CONFIG when set, defaults otherwise.
Config load_config_from_env();

}  // namespace iotscope
