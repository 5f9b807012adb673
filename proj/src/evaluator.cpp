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

#include "raemepc/evaluator.hpp"

#include "raemepc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace raemepc::eval {

namespace {

auto descending_order(const std::vector<double>& scores) -> std::vector<std::size_t>
{
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

auto f1_of(const ConfusionCounts& c) -> double
{
    const auto denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

} // namespace

void LabeledScores::validate() const
{
    if (scores.size() != labels.size()) {
        throw DimensionError("scores and labels have different lengths ("
                             + std::to_string(scores.size()) + " vs "
                             + std::to_string(labels.size()) + ")");
    }
    for (const double s : scores) {
        if (!std::isfinite(s)) {
            throw ArgumentError("scores must be finite");
        }
    }
}

auto LabeledScores::positives() const -> std::size_t
{
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
}

auto auroc(const LabeledScores& ls) -> double
{
    ls.validate();
    const auto pos = ls.positives();
    const auto neg = ls.labels.size() - pos;
    if (pos == 0 || neg == 0) {
        throw UndefinedMetricError("AUROC needs both positive and negative labels");
    }
    std::vector<std::size_t> idx(ls.scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return ls.scores[a] < ls.scores[b]; });

    // Twice the positive rank sum, with mid-ranks for ties, in integers.
    std::size_t twice_rank_sum = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        std::size_t pos_in_group = 0;
        while (j < idx.size() && ls.scores[idx[j]] == ls.scores[idx[i]]) {
            pos_in_group += ls.labels[idx[j]] ? 1 : 0;
            ++j;
        }
        // Ranks i+1 .. j average to (i + 1 + j) / 2.
        twice_rank_sum += pos_in_group * (i + 1 + j);
        i = j;
    }
    const auto twice_u = twice_rank_sum - pos * (pos + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

auto auprc(const LabeledScores& ls) -> double
{
    ls.validate();
    const auto pos = ls.positives();
    if (pos == 0) {
        throw UndefinedMetricError("AUPRC needs at least one positive label");
    }
    const auto idx = descending_order(ls.scores);
    double ap = 0.0;
    std::size_t tp = 0;
    std::size_t flagged = 0;
    std::size_t prev_tp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && ls.scores[idx[j]] == ls.scores[idx[i]]) {
            tp += ls.labels[idx[j]] ? 1 : 0;
            ++flagged;
            ++j;
        }
        if (tp > prev_tp) {
            const double precision = static_cast<double>(tp) / static_cast<double>(flagged);
            const double delta_recall =
              static_cast<double>(tp - prev_tp) / static_cast<double>(pos);
            ap += delta_recall * precision;
            prev_tp = tp;
        }
        i = j;
    }
    return ap;
}

auto confusion_at(const LabeledScores& ls, double threshold) -> ConfusionCounts
{
    ConfusionCounts c;
    for (std::size_t i = 0; i < ls.scores.size(); ++i) {
        const bool flagged = ls.scores[i] > threshold;
        if (flagged) {
            (ls.labels[i] ? c.tp : c.fp) += 1;
        } else {
            (ls.labels[i] ? c.fn : c.tn) += 1;
        }
    }
    return c;
}

auto best_f1(const LabeledScores& ls, std::size_t threshold_count) -> F1Result
{
    ls.validate();
    if (ls.positives() == 0) {
        throw UndefinedMetricError("best F1 needs at least one positive label");
    }
    if (threshold_count < 2) {
        throw ArgumentError("best F1 needs at least two thresholds");
    }
    const double top = *std::max_element(ls.scores.begin(), ls.scores.end());
    const double upper = std::max(top, 0.0);

    // Sorted scores let each threshold be counted by binary search.
    const auto n = ls.scores.size();
    std::vector<std::pair<double, bool>> sorted(n);
    for (std::size_t i = 0; i < n; ++i) {
        sorted[i] = {ls.scores[i], ls.labels[i]};
    }
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> pos_suffix(n + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
        pos_suffix[i] = pos_suffix[i + 1] + (sorted[i].second ? 1 : 0);
    }
    const auto total_pos = pos_suffix[0];

    F1Result best;
    bool have = false;
    for (std::size_t k = 0; k < threshold_count; ++k) {
        const double thr =
          static_cast<double>(k) * upper / static_cast<double>(threshold_count - 1);
        const auto first_above = static_cast<std::size_t>(
          std::upper_bound(sorted.begin(), sorted.end(), thr,
                           [](double t, const auto& p) { return t < p.first; })
          - sorted.begin());
        ConfusionCounts c;
        c.tp = pos_suffix[first_above];
        c.fp = (n - first_above) - c.tp;
        c.fn = total_pos - c.tp;
        c.tn = first_above - c.fn;
        const double f1 = f1_of(c);
        if (!have || f1 > best.f1) {
            have = true;
            best.f1 = f1;
            best.threshold = thr;
            best.counts = c;
            best.precision =
              c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
            best.recall = static_cast<double>(c.tp) / static_cast<double>(total_pos);
        }
    }
    return best;
}

auto evaluate(const LabeledScores& ls) -> MetricReport
{
    MetricReport r;
    r.auroc = auroc(ls);
    r.auprc = auprc(ls);
    r.f1 = best_f1(ls);
    r.steps = ls.scores.size();
    r.positives = ls.positives();
    return r;
}

auto to_json_string(const MetricReport& r) -> std::string
{
    nlohmann::json j;
    j["auroc"] = r.auroc;
    j["auprc"] = r.auprc;
    j["auprc_method"] = "average_precision";
    j["best_f1"] = r.f1.f1;
    j["best_threshold"] = r.f1.threshold;
    j["precision"] = r.f1.precision;
    j["recall"] = r.f1.recall;
    j["tp"] = r.f1.counts.tp;
    j["fp"] = r.f1.counts.fp;
    j["tn"] = r.f1.counts.tn;
    j["fn"] = r.f1.counts.fn;
    j["steps"] = r.steps;
    j["positives"] = r.positives;
    return j.dump(2) + "\n";
}

auto csv_header() -> std::string
{
    return "auroc,auprc,best_f1,best_threshold,precision,recall,tp,fp,tn,fn,steps,positives";
}

auto csv_row(const MetricReport& r) -> std::string
{
    std::ostringstream out;
    out.precision(17);
    out << r.auroc << ',' << r.auprc << ',' << r.f1.f1 << ',' << r.f1.threshold << ','
        << r.f1.precision << ',' << r.f1.recall << ',' << r.f1.counts.tp << ','
        << r.f1.counts.fp << ',' << r.f1.counts.tn << ',' << r.f1.counts.fn << ',' << r.steps
        << ',' << r.positives;
    return out.str();
}

} // namespace raemepc::eval
