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

#include "raemepc/detector.hpp"

#include "raemepc/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace raemepc::detect {

namespace {

using RowMatrix =
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

auto split_csv(const std::string& line) -> std::vector<std::string>
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
            cell.pop_back();
        }
        out.push_back(cell);
    }
    return out;
}

auto to_number(const std::string& cell, std::size_t line) -> double
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError("non-numeric cell '" + cell + "'", line);
    }
    return v;
}

} // namespace

auto residuals(const model::ModelParams& params,
               const model::ModelConfig& config,
               std::span<const data::WindowSample> windows) -> std::vector<Tensor>
{
    std::vector<Tensor> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        auto e = model::reconstruct(params, config, w.input);
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] -= w.input[i];
        }
        out.push_back(std::move(e));
    }
    return out;
}

auto pool(std::span<const Tensor> residual_windows) -> Tensor
{
    if (residual_windows.empty()) {
        return Tensor({0, 0});
    }
    const auto d = residual_windows.front().cols();
    std::vector<double> data;
    std::size_t rows = 0;
    for (const auto& r : residual_windows) {
        if (r.cols() != d) {
            throw DimensionError("pool: residual widths differ");
        }
        data.insert(data.end(), r.values().begin(), r.values().end());
        rows += r.rows();
    }
    return Tensor({rows, d}, std::move(data));
}

auto fit_gaussian(const Tensor& samples) -> ResidualGaussian
{
    if (samples.rank() != 2 || samples.cols() == 0) {
        throw DimensionError("fit_gaussian: expected an [n, d] sample matrix");
    }
    const auto n = samples.rows();
    const auto d = samples.cols();
    if (n < d + 1) {
        throw InsufficientDataError("fit_gaussian: need at least " + std::to_string(d + 1)
                                    + " residual vectors, got " + std::to_string(n));
    }
    const auto di = static_cast<Eigen::Index>(d);
    Eigen::Map<const RowMatrix> x(samples.data().data(), static_cast<Eigen::Index>(n), di);
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    const RowMatrix centered = x.rowwise() - mean.transpose();
    const RowMatrix cov = (centered.transpose() * centered) / static_cast<double>(n);

    ResidualGaussian g;
    g.mu = Tensor({d}, std::vector<double>(mean.data(), mean.data() + d));
    g.sigma = Tensor({d, d}, std::vector<double>(cov.data(), cov.data() + d * d));
    // Exact symmetry.
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double s = 0.5 * (g.sigma(i, j) + g.sigma(j, i));
            g.sigma(i, j) = s;
            g.sigma(j, i) = s;
        }
    }
    g.regularization_eps =
      std::max(relative_ridge * cov.trace() / static_cast<double>(d), absolute_ridge_floor);

    RowMatrix reg = Eigen::Map<const RowMatrix>(g.sigma.data().data(), di, di);
    reg.diagonal().array() += g.regularization_eps;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw NumericalError("fit_gaussian: regularized covariance is not positive definite");
    }
    RowMatrix prec = ldlt.solve(Eigen::MatrixXd::Identity(di, di));
    prec = 0.5 * (prec + prec.transpose()).eval();
    g.precision = Tensor({d, d}, std::vector<double>(prec.data(), prec.data() + d * d));
    if (!g.precision.all_finite()) {
        throw NumericalError("fit_gaussian: non-finite precision matrix");
    }
    return g;
}

auto anomaly_score(std::span<const double> residual, const ResidualGaussian& g) -> double
{
    const auto d = g.dims();
    if (residual.size() != d) {
        throw DimensionError("anomaly_score: residual has " + std::to_string(residual.size())
                             + " values, gaussian has " + std::to_string(d));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double di = residual[i] - g.mu[i];
        double row = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            row += g.precision(i, j) * (residual[j] - g.mu[j]);
        }
        s += di * row;
    }
    // Rounding can leave a tiny negative value for a PSD form.
    return std::max(s, 0.0);
}

auto detect(const model::ModelParams& params,
            const model::ModelConfig& config,
            const ResidualGaussian& gaussian,
            const data::TimeSeries& test,
            std::size_t stride,
            std::optional<double> threshold) -> ScoreSeries
{
    if (test.dims() != config.dims || gaussian.dims() != config.dims) {
        throw DimensionError("detect: test series has " + std::to_string(test.dims())
                             + " variables, model expects " + std::to_string(config.dims));
    }
    if (threshold && !(*threshold >= 0.0)) {
        throw ArgumentError("detect: threshold must be nonnegative");
    }
    const auto n = test.length();
    const auto t_len = config.window_length;
    const auto d = config.dims;
    const auto origins = data::window_origins(n, t_len, stride, true);

    std::vector<double> sum(n, 0.0);
    ScoreSeries out;
    out.coverage.assign(n, 0);
    for (const auto origin : origins) {
        const auto src = test.values.data().subspan(origin * d, t_len * d);
        const Tensor window({t_len, d}, std::vector<double>(src.begin(), src.end()));
        const auto recon = model::reconstruct(params, config, window);
        std::vector<double> e(d);
        for (std::size_t t = 0; t < t_len; ++t) {
            for (std::size_t j = 0; j < d; ++j) {
                e[j] = recon(t, j) - window(t, j);
            }
            const double score = anomaly_score(e, gaussian);
            if (!std::isfinite(score)) {
                throw NumericalError("detect: non-finite anomaly score at step "
                                     + std::to_string(origin + t));
            }
            sum[origin + t] += score;
            ++out.coverage[origin + t];
        }
    }
    out.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.scores[i] = sum[i] / static_cast<double>(out.coverage[i]);
    }
    if (threshold) {
        out.labels = apply_threshold(out.scores, *threshold);
    }
    return out;
}

auto apply_threshold(std::span<const double> scores, double threshold) -> std::vector<bool>
{
    std::vector<bool> labels(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        labels[i] = scores[i] > threshold;
    }
    return labels;
}

void write_scores_csv(std::ostream& out,
                      const ScoreSeries& series,
                      const std::optional<std::vector<bool>>& truth)
{
    if (truth && truth->size() != series.size()) {
        throw DimensionError("write_scores_csv: label count does not match series length");
    }
    out << "time_index,score,coverage";
    if (series.labels) {
        out << ",label";
    }
    if (truth) {
        out << ",true_label";
    }
    out << '\n';
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << i << ',' << series.scores[i] << ',' << series.coverage[i];
        if (series.labels) {
            out << ',' << ((*series.labels)[i] ? 1 : 0);
        }
        if (truth) {
            out << ',' << ((*truth)[i] ? 1 : 0);
        }
        out << '\n';
    }
    out.precision(old);
}

auto read_scores_csv(std::istream& in) -> ScoresFile
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) {
        throw ParseError("scores file is empty", 1);
    }
    const auto header = split_csv(line);
    const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto score_col = find("score");
    if (!score_col) {
        throw ParseError("scores file has no 'score' column", 1);
    }
    const auto truth_col = find("true_label");

    ScoresFile out;
    if (truth_col) {
        out.true_labels.emplace();
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) {
            throw ParseError("ragged row in scores file", line_no);
        }
        out.scores.push_back(to_number(cells[*score_col], line_no));
        if (truth_col) {
            out.true_labels->push_back(to_number(cells[*truth_col], line_no) != 0.0);
        }
    }
    return out;
}

auto to_tensors(const ResidualGaussian& g) -> std::vector<std::pair<std::string, Tensor>>
{
    return {{"detector.mu", g.mu},
            {"detector.sigma", g.sigma},
            {"detector.precision", g.precision},
            {"detector.regularization_eps", Tensor::vector({g.regularization_eps})}};
}

auto from_tensors(std::span<const std::pair<std::string, Tensor>> tensors)
  -> std::optional<ResidualGaussian>
{
    ResidualGaussian g;
    int found = 0;
    for (const auto& [name, t] : tensors) {
        if (name == "detector.mu") {
            g.mu = t;
            ++found;
        } else if (name == "detector.sigma") {
            g.sigma = t;
            ++found;
        } else if (name == "detector.precision") {
            g.precision = t;
            ++found;
        } else if (name == "detector.regularization_eps" && t.size() == 1) {
            g.regularization_eps = t[0];
            ++found;
        }
    }
    if (found == 0) {
        return std::nullopt;
    }
    const auto d = g.mu.size();
    if (found != 4 || g.sigma.shape() != std::vector<std::size_t>{d, d}
        || g.precision.shape() != std::vector<std::size_t>{d, d}) {
        throw IntegrityError("stored residual gaussian is incomplete or misshapen");
    }
    return g;
}

auto to_json_string(const ResidualGaussian& g) -> std::string
{
    const auto d = g.dims();
    auto matrix = [d](const Tensor& t) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < d; ++i) {
            rows.push_back(std::vector<double>(t.row(i).begin(), t.row(i).end()));
        }
        return rows;
    };
    nlohmann::json j;
    j["mu"] = g.mu.values();
    j["sigma"] = matrix(g.sigma);
    j["precision"] = matrix(g.precision);
    j["regularization_eps"] = g.regularization_eps;
    return j.dump(2) + "\n";
}

} // namespace raemepc::detect
