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
#include "raemepc/model.hpp"
#include "raemepc/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace raemepc::train {

inline constexpr std::uint32_t checkpoint_version = 1;

// Everything needed to score new data: network, its config, the
// standardization fitted on training data, and named auxiliary tensors
// (the detector stores its residual Gaussian there).
struct Checkpoint {
    model::ModelConfig config;
    data::Standardizer stats;
    model::ModelParams params;
    std::vector<std::pair<std::string, Tensor>> extras;

    [[nodiscard]] auto extra(const std::string& name) const -> const Tensor*;
};

// Layout (little-endian host order):
//   "RAEMEPC\0" | u32 version | u64 payload bytes | payload | u32 crc32(payload)
auto serialize_checkpoint(const Checkpoint& ckpt) -> std::string;
auto deserialize_checkpoint(const std::string& bytes) -> Checkpoint;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws IntegrityError on a damaged or foreign file, DimensionError when the
// stored tensors do not fit the stored config or `expected_dims`.
auto load_checkpoint(const std::filesystem::path& path,
                     std::optional<std::size_t> expected_dims = std::nullopt) -> Checkpoint;

} // namespace raemepc::train
