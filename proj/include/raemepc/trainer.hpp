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
#include "raemepc/losses.hpp"
#include "raemepc/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace raemepc::train {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t patience = 20; // epochs without validation improvement
    double clip_norm = 5.0;    // global gradient norm cap; 0 disables
    std::uint64_t seed = 0;    // batch order and decoder noise
    loss::LossWeights weights;

    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;
    double shape = 0.0;
    double pred = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    LossBreakdown train;
    double validation_total = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;

    // Wall-clock seconds are left out unless asked for, so the CSV is a
    // pure function of seed, data and config.
    void write_csv(std::ostream& out, bool include_seconds = false) const;
};

struct TrainResult {
    model::ModelParams params;
    TrainLog log;
    std::size_t best_epoch = 0; // 0 = initial parameters
    double best_validation = 0.0;
};

// Batch objective. Reconstruction and shape terms are averaged over the
// windows given; the prediction term over those that carry a lookahead
// target. Gradients are added into `grads` when non-null.
auto batch_loss(const model::ModelParams& params,
                model::ModelParams* grads,
                const model::ModelConfig& config,
                std::span<const data::WindowSample> windows,
                const loss::LossWeights& weights,
                model::NoiseSource noise) -> LossBreakdown;

// Noise-free objective over a window set (validation loss).
auto evaluate_loss(const model::ModelParams& params,
                   const model::ModelConfig& config,
                   std::span<const data::WindowSample> windows,
                   const loss::LossWeights& weights) -> LossBreakdown;

using EpochCallback = std::function<void(const EpochRecord&)>;

auto train(const model::ModelConfig& config,
           model::ModelParams initial,
           std::span<const data::WindowSample> train_windows,
           std::span<const data::WindowSample> validation_windows,
           const TrainConfig& options,
           const EpochCallback& on_epoch = {}) -> TrainResult;

struct GridSpec {
    std::vector<std::size_t> hidden_dims{16, 32, 64};
    std::vector<std::size_t> taus{2, 3, 4};
    std::vector<double> betas{0.1, 0.3};
    std::vector<double> lambda_shapes{0.0001, 0.001};

    void validate() const;
    [[nodiscard]] auto size() const noexcept -> std::size_t
    {
        return hidden_dims.size() * taus.size() * betas.size() * lambda_shapes.size();
    }
};

struct GridPoint {
    std::size_t index = 0;
    std::size_t hidden_dim = 0;
    std::size_t tau = 0;
    double beta = 0.0;
    double lambda_shape = 0.0;
};

auto enumerate_grid(const GridSpec& grid) -> std::vector<GridPoint>;

struct GridRow {
    GridPoint point;
    bool ok = false;
    std::string error;
    double validation_total = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    // Filled by the optional evaluation hook (test metrics).
    std::vector<std::pair<std::string, double>> extra;
};

struct GridOutcome {
    std::vector<GridRow> rows; // ranked: successful rows by validation loss, then failures
    std::optional<std::size_t> best; // index into rows
    model::ModelConfig best_config;
    std::optional<TrainResult> best_result;
};

struct GridHooks {
    // Called after each successful run; may append metrics to row.extra.
    std::function<void(const model::ModelConfig&, const TrainResult&, GridRow&)> evaluate;
    // Called once per finished run (success or failure), in completion order.
    std::function<void(const GridRow&)> on_row;
};

auto grid_search(const model::ModelConfig& base,
                 const TrainConfig& options,
                 const GridSpec& grid,
                 const data::WindowSplit& windows,
                 std::size_t jobs = 1,
                 const GridHooks& hooks = {}) -> GridOutcome;

auto apply_grid_point(model::ModelConfig config, const GridPoint& point) -> model::ModelConfig;

} // namespace raemepc::train
