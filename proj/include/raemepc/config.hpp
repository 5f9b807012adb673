// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include "raemepc/data.hpp"
#include "raemepc/detector.hpp"
#include "raemepc/model.hpp"
#include "raemepc/trainer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace raemepc::pipeline {

// Everything one CLI invocation needs. Parsed from a `key = value` text
// file; see effective_config() for the full key list.
struct RunConfig {
    std::string preset; // "", "power-demand", "2d-gesture", "synthetic"
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::filesystem::path test_labels_path;
    data::LoadOptions load;
    data::SplitSpec split;
    model::ModelConfig model; // dims is filled from the data
    train::TrainConfig train;
    train::GridSpec grid;
    std::optional<double> threshold;
    std::optional<std::size_t> inference_stride;
    std::filesystem::path out_dir = "out";

    [[nodiscard]] auto detection_stride() const -> std::size_t
    {
        return inference_stride.value_or(split.stride);
    }
};

using Environment = std::map<std::string, std::string>;

// Reads RAEMEPC_* variables from the process environment.
auto process_environment() -> Environment;

// Keys are validated against the schema; unknown keys, bad values and
// duplicates raise ConfigError. `RAEMEPC_<KEY>` entries in `env` override
// file values. Relative paths resolve against `base_dir`.
auto parse_config(const std::string& text,
                  const std::filesystem::path& base_dir = {},
                  const Environment& env = {}) -> RunConfig;

auto load_config(const std::filesystem::path& path, const Environment& env = {}) -> RunConfig;

// Canonical rendering with every default spelled out; parse_config() of
// the result reproduces the same RunConfig.
auto effective_config(const RunConfig& config) -> std::string;

} // namespace raemepc::pipeline
