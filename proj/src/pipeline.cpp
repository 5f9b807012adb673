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

#include "raemepc/pipeline.hpp"

#include "raemepc/errors.hpp"

#include <utility>

namespace raemepc::pipeline {

auto load_test_series(const RunConfig& config) -> std::optional<data::TimeSeries>
{
    if (config.test_path.empty()) {
        return std::nullopt;
    }
    auto test = data::load_series(config.test_path, config.load);
    if (!config.test_labels_path.empty()) {
        auto labels = data::load_labels(config.test_labels_path);
        if (labels.size() != test.length()) {
            throw DimensionError("test labels: " + std::to_string(labels.size()) + " labels for "
                                 + std::to_string(test.length()) + " steps");
        }
        test.labels = std::move(labels);
    }
    return test;
}

auto prepare(const RunConfig& config) -> PreparedData
{
    if (config.train_path.empty()) {
        throw ConfigError("train_path is required");
    }
    const auto train = data::load_series(config.train_path, config.load);
    return prepare(config, train, load_test_series(config));
}

auto prepare(const RunConfig& config,
             const data::TimeSeries& raw_train,
             const std::optional<data::TimeSeries>& raw_test) -> PreparedData
{
    if (raw_test && raw_test->dims() != raw_train.dims()) {
        throw DimensionError("test series has " + std::to_string(raw_test->dims())
                             + " variables, training series has "
                             + std::to_string(raw_train.dims()));
    }
    PreparedData out;
    out.stats = data::Standardizer::fit(raw_train);
    const auto train = out.stats.apply(raw_train);
    auto windows = data::make_windows(train, config.split, true);
    out.windows = data::split_train_validation(std::move(windows), config.split.validation_fraction);
    if (raw_test) {
        out.test = out.stats.apply(*raw_test);
    }
    return out;
}

auto model_config(const RunConfig& config, std::size_t dims) -> model::ModelConfig
{
    auto m = config.model;
    m.dims = dims;
    m.window_length = config.split.window_length;
    m.validate();
    return m;
}

auto fit_detector(const model::ModelConfig& config,
                  model::ModelParams params,
                  const data::Standardizer& stats,
                  std::span<const data::WindowSample> validation) -> Detector
{
    const auto res = detect::residuals(params, config, validation);
    auto gaussian = detect::fit_gaussian(detect::pool(res));
    return Detector{config, stats, std::move(params), std::move(gaussian)};
}

auto to_checkpoint(const Detector& detector) -> train::Checkpoint
{
    return train::Checkpoint{detector.config, detector.stats, detector.params,
                             detect::to_tensors(detector.gaussian)};
}

auto from_checkpoint(train::Checkpoint checkpoint) -> Detector
{
    auto gaussian = detect::from_tensors(checkpoint.extras);
    if (!gaussian) {
        throw IntegrityError("checkpoint has no fitted detector");
    }
    if (gaussian->dims() != checkpoint.config.dims) {
        throw DimensionError("detector Gaussian dimension does not match the model");
    }
    return Detector{checkpoint.config, std::move(checkpoint.stats), std::move(checkpoint.params),
                    std::move(*gaussian)};
}

auto score_standardized(const Detector& detector,
                        const data::TimeSeries& standardized,
                        std::size_t stride,
                        std::optional<double> threshold) -> detect::ScoreSeries
{
    return detect::detect(detector.params, detector.config, detector.gaussian, standardized, stride,
                          threshold);
}

auto score(const Detector& detector,
           const data::TimeSeries& raw,
           std::size_t stride,
           std::optional<double> threshold) -> detect::ScoreSeries
{
    if (raw.dims() != detector.config.dims) {
        throw DimensionError("series has " + std::to_string(raw.dims())
                             + " variables, model expects " + std::to_string(detector.config.dims));
    }
    return score_standardized(detector, detector.stats.apply(raw), stride, threshold);
}

auto train_detector(const RunConfig& config,
                    const PreparedData& data,
                    const train::EpochCallback& on_epoch) -> TrainOutcome
{
    const auto mc = model_config(config, data.dims());
    auto result = train::train(mc, model::ModelParams::init(mc), data.windows.train,
                               data.windows.validation, config.train, on_epoch);
    auto detector = fit_detector(mc, result.params, data.stats, data.windows.validation);
    return TrainOutcome{std::move(result), std::move(detector)};
}

auto test_metrics(const Detector& detector, const PreparedData& data, std::size_t stride)
  -> eval::MetricReport
{
    if (!data.test || !data.test->labels) {
        throw ArgumentError("test metrics need a labeled test series");
    }
    const auto series = score_standardized(detector, *data.test, stride);
    return eval::evaluate(eval::LabeledScores{series.scores, *data.test->labels});
}

auto grid_hooks(const RunConfig& config, const PreparedData& data) -> train::GridHooks
{
    train::GridHooks hooks;
    if (!data.test || !data.test->labels) {
        return hooks;
    }
    const auto stride = config.detection_stride();
    hooks.evaluate = [&data, stride](const model::ModelConfig& mc, const train::TrainResult& result,
                                     train::GridRow& row) {
        const auto det = fit_detector(mc, result.params, data.stats, data.windows.validation);
        const auto report = test_metrics(det, data, stride);
        row.extra.emplace_back("test_auroc", report.auroc);
        row.extra.emplace_back("test_auprc", report.auprc);
        row.extra.emplace_back("test_best_f1", report.f1.f1);
    };
    return hooks;
}

} // namespace raemepc::pipeline
