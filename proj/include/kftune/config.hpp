// Copyright 2026 The kftune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KFTUNE_CONFIG_HPP_
#define KFTUNE_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kftune/campaign.hpp"
#include "kftune/rrr.hpp"

namespace kftune {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunConfig {
  TruthConfig truth;
  TuningConfig tuning;
  CampaignOptions campaign;
  std::string mode = "q0";  // q0 | qpos
  std::vector<MethodSpec> methods;
  std::string dataset_path;  // existing dataset for tune/nr; empty means simulate
  std::string output_dir = "out";
};

// Every accepted key with its default value. This is the schema: files and
// overrides may only set keys that appear here.
nlohmann::json default_config_json();

// Copies the keys of patch into base, recursing into objects. Unknown keys
// raise ConfigError naming the dotted path. Arrays are replaced whole.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& path = "");

// "a.b.c=value"; value is parsed as JSON and falls back to a plain string.
void apply_override(nlohmann::json& config, const std::string& assignment);

RunConfig config_from_json(const nlohmann::json& j);

// Defaults, then the file (if any), then the overrides in order. The file may
// also be a manifest written by a previous run. Returns the
// resolved JSON through resolved when non-null.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                      nlohmann::json* resolved = nullptr);

// Config snapshot, consumed seeds and tool version; deliberately no timestamps.
nlohmann::json make_manifest(const std::string& verb, const nlohmann::json& config,
                             const nlohmann::json& seeds);

}  // namespace kftune

#endif  // KFTUNE_CONFIG_HPP_
