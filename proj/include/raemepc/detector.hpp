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

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace raemepc::detect {

// Maximum-likelihood Gaussian over reconstruction residuals.
struct ResidualGaussian {
    Tensor mu;        // [d]
    Tensor sigma;     // [d, d], ML covariance (divides by n), unregularized
    Tensor precision; // [d, d], (sigma + regularization_eps * I)^-1
    double regularization_eps = 0.0;

    [[nodiscard]] auto dims() const noexcept -> std::size_t { return mu.size(); }
};

// Relative ridge added to the covariance before inversion, as a fraction of
// its mean diagonal. An absolute floor keeps fully degenerate residuals
// invertible.
inline constexpr double relative_ridge = 1e-6;
inline constexpr double absolute_ridge_floor = 1e-12;

// Per window, time-ordered residuals y_t - x_t ([T, d]), noise disabled.
auto residuals(const model::ModelParams& params,
               const model::ModelConfig& config,
               std::span<const data::WindowSample> windows) -> std::vector<Tensor>;

// Stacks residual matrices into one [n, d] sample matrix.
auto pool(std::span<const Tensor> residual_windows) -> Tensor;

auto fit_gaussian(const Tensor& samples) -> ResidualGaussian;

// Mahalanobis form (e - mu)^T precision (e - mu).
auto anomaly_score(std::span<const double> residual, const ResidualGaussian& g) -> double;

struct DetectionConfig {
    std::optional<double> threshold;
    std::optional<std::size_t> stride; // defaults to the window length's training stride
};

struct ScoreSeries {
    std::vector<double> scores;
    std::vector<std::size_t> coverage;
    std::optional<std::vector<bool>> labels; // present iff a threshold was given

    [[nodiscard]] auto size() const noexcept -> std::size_t { return scores.size(); }
};

// Slides windows over an already-standardized test series and averages the
// per-step scores of all windows covering each step.
auto detect(const model::ModelParams& params,
            const model::ModelConfig& config,
            const ResidualGaussian& gaussian,
            const data::TimeSeries& test,
            std::size_t stride,
            std::optional<double> threshold = std::nullopt) -> ScoreSeries;

// score > threshold
auto apply_threshold(std::span<const double> scores, double threshold) -> std::vector<bool>;

// Columns: time_index,score,coverage[,label][,true_label]
void write_scores_csv(std::ostream& out,
                      const ScoreSeries& series,
                      const std::optional<std::vector<bool>>& truth = std::nullopt);

struct ScoresFile {
    std::vector<double> scores;
    std::optional<std::vector<bool>> true_labels;
};

auto read_scores_csv(std::istream& in) -> ScoresFile;

// Named tensors for checkpoint storage and back.
auto to_tensors(const ResidualGaussian& g) -> std::vector<std::pair<std::string, Tensor>>;
auto from_tensors(std::span<const std::pair<std::string, Tensor>> tensors)
  -> std::optional<ResidualGaussian>;

auto to_json_string(const ResidualGaussian& g) -> std::string;

} // namespace raemepc::detect
