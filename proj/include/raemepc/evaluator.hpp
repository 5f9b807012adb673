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

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace raemepc::eval {

// Point-wise scores and ground truth (true = anomaly).
struct LabeledScores {
    std::vector<double> scores;
    std::vector<bool> labels;

    void validate() const;
    [[nodiscard]] auto positives() const -> std::size_t;
};

// Mann-Whitney statistic: P(pos > neg) + P(pos == neg) / 2.
auto auroc(const LabeledScores& ls) -> double;

// Average precision: sum over distinct thresholds of
// (recall increment) * precision, flagging score >= threshold.
auto auprc(const LabeledScores& ls) -> double;

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
};

struct F1Result {
    double f1 = 0.0;
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    ConfusionCounts counts;
};

inline constexpr std::size_t default_threshold_count = 1000;

// Thresholds i * max(score) / (count - 1), i = 0 .. count-1; a step is
// flagged when its score exceeds the threshold. Ties go to the lowest
// threshold.
auto best_f1(const LabeledScores& ls, std::size_t threshold_count = default_threshold_count)
  -> F1Result;

auto confusion_at(const LabeledScores& ls, double threshold) -> ConfusionCounts;

struct MetricReport {
    double auroc = 0.0;
    double auprc = 0.0;
    F1Result f1;
    std::size_t steps = 0;
    std::size_t positives = 0;
};

auto evaluate(const LabeledScores& ls) -> MetricReport;

auto to_json_string(const MetricReport& r) -> std::string;
auto csv_header() -> std::string;
auto csv_row(const MetricReport& r) -> std::string;

} // namespace raemepc::eval
