// Copyright 2026 The qdiff Authors. All Rights Reserved.
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

#pragma once

// Command-line front end: bench, grad-check, train, sample.

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace qdiff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad command line or config; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Config = nlohmann::ordered_json;

/// Every key a command accepts, with its default value. Throws ConfigError
/// for an unknown command.
Config defaults(const std::string& command);

/// Defaults, then the flat JSON file at `config_path`, then `overrides`
/// (raw strings converted to the default's type). Unknown keys, nested
/// values and type mismatches throw ConfigError.
Config resolve_config(const std::string& command, const std::optional<std::filesystem::path>& config_path,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

int cmd_bench(const Config& cfg, std::ostream& out);
int cmd_grad_check(const Config& cfg, std::ostream& out);
int cmd_train(const Config& cfg, std::ostream& out);
int cmd_sample(const Config& cfg, std::ostream& out);

/// Full entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qdiff::cli
