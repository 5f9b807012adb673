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

#include "raemepc/checkpoint.hpp"
#include "raemepc/config.hpp"
#include "raemepc/detector.hpp"
#include "raemepc/evaluator.hpp"

#include <optional>

namespace raemepc::pipeline {

struct PreparedData {
    data::Standardizer stats;
    data::WindowSplit windows;
    std::optional<data::TimeSeries> test; // standardized, labels attached when known

    [[nodiscard]] auto dims() const noexcept -> std::size_t { return stats.dims(); }
};

// Raw test series with labels from `test_labels_path` when given.
auto load_test_series(const RunConfig& config) -> std::optional<data::TimeSeries>;

// Standardizes on training data only; test data reuses those statistics.
auto prepare(const RunConfig& config) -> PreparedData;
auto prepare(const RunConfig& config,
             const data::TimeSeries& raw_train,
             const std::optional<data::TimeSeries>& raw_test) -> PreparedData;

auto model_config(const RunConfig& config, std::size_t dims) -> model::ModelConfig;

// A trained network plus what it needs to score raw data.
struct Detector {
    model::ModelConfig config;
    data::Standardizer stats;
    model::ModelParams params;
    detect::ResidualGaussian gaussian;
};

// Fits the residual Gaussian on the validation windows.
auto fit_detector(const model::ModelConfig& config,
                  model::ModelParams params,
                  const data::Standardizer& stats,
                  std::span<const data::WindowSample> validation) -> Detector;

auto to_checkpoint(const Detector& detector) -> train::Checkpoint;
// Throws IntegrityError when the checkpoint lacks the detector tensors.
auto from_checkpoint(train::Checkpoint checkpoint) -> Detector;

// Standardizes `raw` with the detector's statistics, then scores it.
auto score(const Detector& detector,
           const data::TimeSeries& raw,
           std::size_t stride,
           std::optional<double> threshold = std::nullopt) -> detect::ScoreSeries;

// Scores an already-standardized series.
auto score_standardized(const Detector& detector,
                        const data::TimeSeries& standardized,
                        std::size_t stride,
                        std::optional<double> threshold = std::nullopt) -> detect::ScoreSeries;

struct TrainOutcome {
    train::TrainResult result;
    Detector detector;
};

auto train_detector(const RunConfig& config,
                    const PreparedData& data,
                    const train::EpochCallback& on_epoch = {}) -> TrainOutcome;

// Metrics of `detector` on the labeled test series of `data`.
auto test_metrics(const Detector& detector, const PreparedData& data, std::size_t stride)
  -> eval::MetricReport;

// Grid hook adding test auroc/auprc/best_f1 to each row when labeled test
// data is available.
auto grid_hooks(const RunConfig& config, const PreparedData& data) -> train::GridHooks;

} // namespace raemepc::pipeline
