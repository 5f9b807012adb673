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

#include "raemepc/losses.hpp"

#include "raemepc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace raemepc::loss {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

void check_gamma(double gamma)
{
    if (!(gamma > 0.0)) {
        throw ArgumentError("soft-DTW gamma must be positive");
    }
}

void check_sequences(const Tensor& a, const Tensor& b)
{
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("soft-DTW expects rank-2 sequences");
    }
    if (a.rows() == 0 || b.rows() == 0) {
        throw DimensionError("soft-DTW sequences must be nonempty");
    }
    if (a.cols() != b.cols()) {
        throw DimensionError("soft-DTW sequences have different widths");
    }
}

auto squared_sum_diff(const Tensor& y, const Tensor& x, const char* what) -> double
{
    require_same_shape(y, x, what);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - x[i];
        s += e * e;
    }
    return s;
}

void fill_forward(const Tensor& a, const Tensor& b, double gamma, SdtwWorkspace& ws)
{
    const auto n = a.rows();
    const auto m = b.rows();
    const auto d = a.cols();
    ws.cost = Tensor({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double e = a(i, k) - b(j, k);
                s += e * e;
            }
            ws.cost(i, j) = s;
        }
    }
    ws.accumulated = Tensor({n + 2, m + 2}, inf);
    auto& r = ws.accumulated;
    r(0, 0) = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            r(i, j) = ws.cost(i - 1, j - 1)
                      + softmin(r(i - 1, j - 1), r(i - 1, j), r(i, j - 1), gamma);
        }
    }
}

// Fills ws.alignment with d(value)/d(cost) via the reverse recursion.
void fill_backward(double gamma, SdtwWorkspace& ws)
{
    const auto n = ws.cost.rows();
    const auto m = ws.cost.cols();
    Tensor r = ws.accumulated;
    for (std::size_t i = 0; i < n + 2; ++i) {
        r(i, m + 1) = -inf;
    }
    for (std::size_t j = 0; j < m + 2; ++j) {
        r(n + 1, j) = -inf;
    }
    r(n + 1, m + 1) = r(n, m);

    auto cost = [&](std::size_t i, std::size_t j) {
        return (i >= 1 && i <= n && j >= 1 && j <= m) ? ws.cost(i - 1, j - 1) : 0.0;
    };

    ws.alignment = Tensor({n + 2, m + 2});
    auto& e = ws.alignment;
    e(n + 1, m + 1) = 1.0;
    for (std::size_t j = m; j >= 1; --j) {
        for (std::size_t i = n; i >= 1; --i) {
            const double a = std::exp((r(i + 1, j) - r(i, j) - cost(i + 1, j)) / gamma);
            const double b = std::exp((r(i, j + 1) - r(i, j) - cost(i, j + 1)) / gamma);
            const double c =
              std::exp((r(i + 1, j + 1) - r(i, j) - cost(i + 1, j + 1)) / gamma);
            e(i, j) = e(i + 1, j) * a + e(i, j + 1) * b + e(i + 1, j + 1) * c;
        }
    }
}

} // namespace

void LossWeights::validate() const
{
    if (!(lambda_shape >= 0.0) || !(lambda_pred >= 0.0)) {
        throw ConfigError("loss weights must be nonnegative");
    }
    if (!(gamma > 0.0)) {
        throw ConfigError("gamma must be positive");
    }
}

auto recon_loss(const Tensor& reconstruction, const Tensor& window) -> double
{
    return squared_sum_diff(reconstruction, window, "recon_loss");
}

auto pred_loss(const Tensor& prediction, const Tensor& future) -> double
{
    return squared_sum_diff(prediction, future, "pred_loss");
}

auto total_loss(double recon, double shape, double pred, const LossWeights& weights)
  -> double
{
    return recon + weights.lambda_shape * shape + weights.lambda_pred * pred;
}

auto softmin(double a, double b, double c, double gamma) -> double
{
    const double lo = std::min({a, b, c});
    if (lo == inf) {
        return inf;
    }
    const double s = std::exp(-(a - lo) / gamma) + std::exp(-(b - lo) / gamma)
                     + std::exp(-(c - lo) / gamma);
    return lo - gamma * std::log(s);
}

auto sdtw(const Tensor& a, const Tensor& b, double gamma, SdtwWorkspace* workspace)
  -> double
{
    check_gamma(gamma);
    check_sequences(a, b);
    SdtwWorkspace local;
    auto& ws = workspace != nullptr ? *workspace : local;
    fill_forward(a, b, gamma, ws);
    return ws.accumulated(a.rows(), b.rows());
}

auto sdtw_with_gradient(const Tensor& a, const Tensor& b, double gamma) -> SdtwGradient
{
    SdtwWorkspace ws;
    const double value = sdtw(a, b, gamma, &ws);
    fill_backward(gamma, ws);
    const auto n = a.rows();
    const auto m = b.rows();
    const auto d = a.cols();
    SdtwGradient g{value, Tensor(a.shape()), Tensor(b.shape())};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double w = ws.alignment(i + 1, j + 1);
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = 2.0 * w * (a(i, k) - b(j, k));
                g.grad_a(i, k) += diff;
                g.grad_b(j, k) -= diff;
            }
        }
    }
    return g;
}

auto shape_loss(const Tensor& window, std::span<const Tensor> per_resolution, double gamma)
  -> double
{
    if (per_resolution.size() < 2) {
        return 0.0;
    }
    double s = 0.0;
    for (std::size_t k = 1; k < per_resolution.size(); ++k) {
        const auto& emitted = per_resolution[k];
        Tensor ordered(emitted.shape());
        for (std::size_t t = 0; t < emitted.rows(); ++t) {
            const auto src = emitted.row(emitted.rows() - 1 - t);
            std::copy(src.begin(), src.end(), ordered.row(t).begin());
        }
        s += sdtw(window, ordered, gamma);
    }
    return s / static_cast<double>(per_resolution.size() - 1);
}

auto squared_error(Tape& tape, std::span<const Var> seq, const Tensor& target) -> Var
{
    if (target.rank() != 2 || seq.size() != target.rows()) {
        throw DimensionError("squared_error: sequence length does not match target");
    }
    double s = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
        const auto y = tape.value(seq[t]);
        if (y.size() != target.cols()) {
            throw DimensionError("squared_error: row width mismatch");
        }
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double e = y[k] - target(t, k);
            s += e * e;
        }
    }
    std::vector<Var> rows(seq.begin(), seq.end());
    return tape.record({s}, [rows = std::move(rows), &target](Tape& t, Var self) {
        const double g = t.grad(self)[0];
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto y = t.value(rows[r]);
            auto dy = t.grad_mut(rows[r]);
            for (std::size_t k = 0; k < y.size(); ++k) {
                dy[k] += 2.0 * g * (y[k] - target(r, k));
            }
        }
    });
}

auto soft_dtw(Tape& tape, const Tensor& target, std::span<const Var> seq, double gamma)
  -> Var
{
    check_gamma(gamma);
    if (seq.empty()) {
        throw DimensionError("soft_dtw: empty sequence");
    }
    std::vector<double> values;
    for (const Var v : seq) {
        const auto row = tape.value(v);
        values.insert(values.end(), row.begin(), row.end());
    }
    const auto width = tape.value(seq.front()).size();
    auto other = std::make_shared<Tensor>(
      std::vector<std::size_t>{seq.size(), width}, std::move(values));
    auto ws = std::make_shared<SdtwWorkspace>();
    const double value = sdtw(target, *other, gamma, ws.get());

    std::vector<Var> rows(seq.begin(), seq.end());
    return tape.record(
      {value}, [rows = std::move(rows), &target, other, ws, gamma](Tape& t, Var self) {
          const double g = t.grad(self)[0];
          fill_backward(gamma, *ws);
          const auto n = target.rows();
          const auto d = target.cols();
          for (std::size_t j = 0; j < rows.size(); ++j) {
              auto dy = t.grad_mut(rows[j]);
              for (std::size_t i = 0; i < n; ++i) {
                  const double w = 2.0 * g * ws->alignment(i + 1, j + 1);
                  for (std::size_t k = 0; k < d; ++k) {
                      dy[k] += w * ((*other)(j, k) - target(i, k));
                  }
              }
          }
      });
}

auto shape_loss(Tape& tape,
                const Tensor& window,
                const std::vector<std::vector<Var>>& per_resolution,
                double gamma) -> Var
{
    if (per_resolution.size() < 2) {
        return tape.input(std::vector<double>{0.0});
    }
    std::vector<Var> terms;
    for (std::size_t k = 1; k < per_resolution.size(); ++k) {
        const std::vector<Var> ordered(per_resolution[k].rbegin(), per_resolution[k].rend());
        terms.push_back(soft_dtw(tape, window, ordered, gamma));
    }
    const std::vector<double> weights(terms.size(),
                                      1.0 / static_cast<double>(terms.size()));
    return tape.linear_combination(terms, weights);
}

} // namespace raemepc::loss
