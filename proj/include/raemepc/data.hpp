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

#include "raemepc/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace raemepc::data {

struct TimeSeries {
    Tensor values; // [N, d]
    std::vector<std::string> variable_names;
    std::optional<std::vector<bool>> labels;

    [[nodiscard]] auto length() const noexcept -> std::size_t { return values.rows(); }
    [[nodiscard]] auto dims() const noexcept -> std::size_t { return values.cols(); }
};

enum class SeriesFormat {
    automatic,  // CSV when the extension is .csv or the first line has a comma
    whitespace, // one time step per line, whitespace-separated values
    csv,        // header row, comma-separated; a column named "label" is the label
};

struct LoadOptions {
    SeriesFormat format = SeriesFormat::automatic;
    // Whitespace format only: treat the last column as a 0/1 label.
    bool label_column = false;
};

auto parse_format(const std::string& name) -> SeriesFormat;

auto load_series(const std::filesystem::path& path, const LoadOptions& options = {})
  -> TimeSeries;
auto parse_series(std::istream& in, const LoadOptions& options) -> TimeSeries;

// One 0/1 (or true/false) label per line.
auto load_labels(const std::filesystem::path& path) -> std::vector<bool>;

// Per-variable affine map fitted on the training split only.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static constexpr double std_floor = 1e-8;

    static auto fit(const TimeSeries& train) -> Standardizer;
    [[nodiscard]] auto apply(const TimeSeries& series) const -> TimeSeries;
    [[nodiscard]] auto invert(const TimeSeries& series) const -> TimeSeries;
    [[nodiscard]] auto dims() const noexcept -> std::size_t { return mean.size(); }
};

struct Standardized {
    TimeSeries train;
    std::vector<TimeSeries> others;
    Standardizer stats;
};

auto standardize(const TimeSeries& train, std::span<const TimeSeries> others = {})
  -> Standardized;

struct SplitSpec {
    std::size_t window_length = 64;
    std::size_t stride = 32;
    double validation_fraction = 0.30;

    void validate() const;
};

struct WindowSample {
    Tensor input;                           // [T, d]
    std::optional<Tensor> prediction_target; // [T, d], rows origin+T/2 .. origin+T/2+T-1
    std::size_t origin = 0;
};

// Start positions 0, stride, 2*stride, ... whose windows fit in the series.
// With cover_tail, a final window anchored at n - T is appended when the
// regular grid leaves trailing steps uncovered.
auto window_origins(std::size_t n, std::size_t window, std::size_t stride, bool cover_tail)
  -> std::vector<std::size_t>;

auto lookahead_offset(std::size_t window) noexcept -> std::size_t;

// With `with_targets`, windows whose lookahead rows fit in the series carry
// them as prediction_target; windows near the end keep none.
auto make_windows(const TimeSeries& series, const SplitSpec& spec, bool with_targets)
  -> std::vector<WindowSample>;

struct WindowSplit {
    std::vector<WindowSample> train;
    std::vector<WindowSample> validation;
};

// Chronological split: the last `validation_fraction` of windows validate.
auto split_train_validation(std::vector<WindowSample> windows, double validation_fraction)
  -> WindowSplit;

// 0-based rows picked when shrinking `length` rows to `target` rows:
// round-half-up(j * (length - 1) / (target - 1)) for j = 0 .. target - 1.
auto downsample_indices(std::size_t length, std::size_t target) -> std::vector<std::size_t>;

auto downsample(const Tensor& x, std::size_t target) -> Tensor;

} // namespace raemepc::data
