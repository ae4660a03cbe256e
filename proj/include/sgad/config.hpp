#pragma once

// Run configuration: every numeric default, the INI-style config file and
// the manifest written next to each artifact.
//
// Precedence: command-line flags > config file > defaults. Keys are
// "section.name"; defaults depend on env.id (see default_settings).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgad/bench.hpp"
#include "sgad/env.hpp"
#include "sgad/expert.hpp"
#include "sgad/infer.hpp"
#include "sgad/train.hpp"

namespace sgad {

using Settings = std::map<std::string, std::string>;

Settings default_settings(EnvId env);

// Parses an INI file into flat "section.key" settings. A [manifest] section
// is accepted and ignored so manifests can be fed back as configs.
Settings load_settings(const std::string& path);
// Overlays overrides onto the env-specific defaults. Unknown keys throw
// InvalidConfig naming the key.
Settings resolve_settings(const Settings& overrides);

std::string to_ini(const Settings& settings);

struct RunConfig {
  EnvConfig env;
  VariancePreset preset;
  PolicyConfig policy;
  TrainConfig train;
  SigmaSchedule schedule;
  StrategyConfig strategy;
  SweepSpec sweep;  // axes and episode count
  std::map<std::string, std::string> checkpoints;  // preset -> path
  std::uint64_t seed = 0;
  int n = 100;
  int episodes = 200;
  std::string data, out, ckpt, csv, out_dir;
};

// Typed view of resolved settings; malformed values throw InvalidConfig
// naming the key.
RunConfig build_run_config(const Settings& resolved);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::string& path);

// Writes <artifact>.manifest.ini: the resolved settings plus the command
// and hashes of the listed outputs.
std::string write_manifest(const std::string& artifact, const std::string& command,
                           const Settings& resolved,
                           const std::vector<std::string>& outputs);

std::vector<std::string> split_list(const std::string& s);

}  // namespace sgad
