#pragma once

// The JSON manifest written next to every run's outputs. It holds the merged
// config, so `--config manifest.json` replays the run.

#include <Eigen/Core>
#include <string>
#include <vector>

#include "nct/io/config.hpp"

namespace nct {

inline constexpr const char* kLibraryVersion = "0.1.0";

inline Json version_info() {
  return {{"nct", kLibraryVersion},
          {"checkpoint_format", kCheckpointFormatVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

struct RunManifest {
  std::string command;
  Json arguments = Json::object();  // subcommand flags other than config plumbing
  Json config = Json::object();
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  Json summary = Json::object();

  Json to_json() const {
    return {{"command", command},
            {"arguments", arguments},
            {"config", config},
            {"config_hash", config_hash(config)},
            {"overrides", overrides},
            {"seed", seed},
            {"outputs", outputs},
            {"summary", summary},
            {"versions", version_info()}};
  }
};

inline RunManifest make_manifest(const std::string& command, const RunConfig& rc) {
  RunManifest m;
  m.command = command;
  m.config = rc.effective;
  m.overrides = rc.overrides;
  m.seed = rc.seed;
  return m;
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  write_file_atomic(path, m.to_json().dump(2) + "\n");
}

}  // namespace nct
