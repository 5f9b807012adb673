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

// Independent reference implementations used as test oracles. They follow
// the defining formulas directly (plain loops, no shared code with the
// library beyond parameter containers) and favour clarity over speed.

#pragma once

#include "raemepc/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>; // rows

inline auto sigmoid(double z) -> double { return 1.0 / (1.0 + std::exp(-z)); }

inline auto to_mat(const raemepc::Tensor& t) -> Mat
{
    Mat m(t.rows(), Vec(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < t.cols(); ++c) {
            m[r][c] = t(r, c);
        }
    }
    return m;
}

inline auto matvec(const raemepc::Tensor& w, const Vec& x) -> Vec
{
    Vec y(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t c = 0; c < w.cols(); ++c) {
            y[r] += w(r, c) * x[c];
        }
    }
    return y;
}

inline auto dense(const raemepc::DenseLayer& l, const Vec& x) -> Vec
{
    auto y = matvec(l.weight, x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += l.bias[i];
    }
    return y;
}

struct State {
    Vec h;
    Vec c;
};

inline auto lstm(const raemepc::LstmCell& cell, const Vec& x, const Vec& h, const Vec& c) -> State
{
    const std::size_t hd = h.size();
    const auto zx = matvec(cell.w_input, x);
    const auto zh = matvec(cell.w_recurrent, h);
    State out{Vec(hd), Vec(hd)};
    for (std::size_t j = 0; j < hd; ++j) {
        const auto z = [&](std::size_t gate) {
            const auto r = gate * hd + j;
            return zx[r] + zh[r] + cell.bias[r];
        };
        const double i = sigmoid(z(0));
        const double f = sigmoid(z(1));
        const double g = std::tanh(z(2));
        const double o = sigmoid(z(3));
        out.c[j] = f * c[j] + i * g;
        out.h[j] = o * std::tanh(out.c[j]);
    }
    return out;
}

// 0-based row picked for output j: round-half-up(1 + j (T-1)/(L-1)) - 1.
inline auto downsample_index(std::size_t t_len, std::size_t l_len, std::size_t j) -> std::size_t
{
    if (l_len == 1) {
        return 0;
    }
    const double pos = 1.0 + static_cast<double>(j) * static_cast<double>(t_len - 1)
                               / static_cast<double>(l_len - 1);
    return static_cast<std::size_t>(std::floor(pos + 0.5)) - 1;
}

inline auto resolution_lengths(std::size_t t_len, std::size_t tau, std::size_t k_levels)
  -> std::vector<std::size_t>
{
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < k_levels; ++k) {
        out.push_back(static_cast<std::size_t>(
          std::llround(static_cast<double>(t_len) / std::pow(static_cast<double>(tau), k))));
    }
    return out;
}

struct Forward {
    Vec encoded;
    std::vector<Mat> emitted; // per level, emission order
    Mat recon;                // time order
    Mat prediction;
};

// Noise-free forward pass written directly from the model equations.
inline auto forward(const raemepc::model::ModelParams& p,
                    const raemepc::model::ModelConfig& cfg,
                    const Mat& x) -> Forward
{
    const std::size_t t_len = x.size();
    const std::size_t hd = cfg.hidden_dim;
    const std::size_t k_levels = cfg.encoder_levels;
    const auto lens = resolution_lengths(t_len, cfg.tau, k_levels);
    const Vec zero(hd, 0.0);

    std::vector<Vec> last(k_levels);
    for (std::size_t k = 0; k < k_levels; ++k) {
        State s{zero, zero};
        for (std::size_t j = 0; j < lens[k]; ++j) {
            s = lstm(p.encoder_cells[k], x[downsample_index(t_len, lens[k], j)], s.h, s.c);
        }
        last[k] = s.h;
    }
    Vec agg = dense(p.encoder_aggregators[k_levels - 1], last[k_levels - 1]);
    for (std::size_t k = k_levels - 1; k-- > 0;) {
        Vec sum(hd);
        for (std::size_t j = 0; j < hd; ++j) {
            sum[j] = last[k][j] + agg[j];
        }
        agg = dense(p.encoder_aggregators[k], sum);
    }

    Forward out;
    out.encoded = agg;
    out.emitted.resize(k_levels);
    std::vector<Mat> hidden(k_levels); // hidden[k][t-1] = h_t, 1-based time t
    for (std::size_t k = k_levels; k-- > 0;) {
        const std::size_t len = lens[k];
        hidden[k].assign(len, Vec{});
        State s{out.encoded, zero};
        hidden[k][len - 1] = s.h;
        Vec y = dense(p.decoder_heads[k], s.h);
        out.emitted[k].push_back(y);
        for (std::size_t t = len - 1; t >= 1; --t) {
            Vec state = s.h;
            if (k + 1 < k_levels) {
                const auto coarse_len = lens[k + 1];
                auto idx = static_cast<std::size_t>(
                  std::ceil(static_cast<double>(t) / static_cast<double>(cfg.tau)));
                idx = std::clamp<std::size_t>(idx, 1, coarse_len);
                Vec cat = s.h;
                const auto& coarse = hidden[k + 1][idx - 1];
                cat.insert(cat.end(), coarse.begin(), coarse.end());
                const auto fused = dense(p.decoder_fusions[k], cat);
                for (std::size_t j = 0; j < hd; ++j) {
                    state[j] = cfg.beta * s.h[j] + (1.0 - cfg.beta) * fused[j];
                }
            }
            s = lstm(p.decoder_cells[k], y, state, s.c);
            hidden[k][t - 1] = s.h;
            y = dense(p.decoder_heads[k], s.h);
            out.emitted[k].push_back(y);
        }
    }
    out.recon.assign(out.emitted[0].rbegin(), out.emitted[0].rend());

    State s{out.encoded, zero};
    for (std::size_t t = 0; t < t_len; ++t) {
        s = lstm(p.predictor_cell, x[t], s.h, s.c);
        out.prediction.push_back(dense(p.predictor_head, s.h));
    }
    return out;
}

inline auto sq_dist(const Vec& a, const Vec& b) -> double
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return s;
}

inline auto sum_sq_diff(const Mat& a, const Mat& b) -> double
{
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        s += sq_dist(a[t], b[t]);
    }
    return s;
}

// Visits the cost of every monotone alignment path from (0,0) to (n-1,m-1).
inline void for_each_path_cost(const Mat& a, const Mat& b, const std::function<void(double)>& fn)
{
    const std::function<void(std::size_t, std::size_t, double)> walk =
      [&](std::size_t i, std::size_t j, double acc) {
          acc += sq_dist(a[i], b[j]);
          if (i + 1 == a.size() && j + 1 == b.size()) {
              fn(acc);
              return;
          }
          if (i + 1 < a.size()) {
              walk(i + 1, j, acc);
          }
          if (j + 1 < b.size()) {
              walk(i, j + 1, acc);
          }
          if (i + 1 < a.size() && j + 1 < b.size()) {
              walk(i + 1, j + 1, acc);
          }
      };
    walk(0, 0, 0.0);
}

// Exact DTW: minimum over all enumerated paths.
inline auto dtw_bruteforce(const Mat& a, const Mat& b) -> double
{
    double best = std::numeric_limits<double>::infinity();
    for_each_path_cost(a, b, [&](double c) { best = std::min(best, c); });
    return best;
}

// Soft-DTW as -gamma log sum over all paths of exp(-cost / gamma).
inline auto sdtw_bruteforce(const Mat& a, const Mat& b, double gamma) -> double
{
    std::vector<double> costs;
    for_each_path_cost(a, b, [&](double c) { costs.push_back(c); });
    const double lo = *std::min_element(costs.begin(), costs.end());
    double s = 0.0;
    for (const double c : costs) {
        s += std::exp(-(c - lo) / gamma);
    }
    return lo - gamma * std::log(s);
}

// Soft-DTW by the plain recursion, O(nm).
inline auto sdtw_dp(const Mat& a, const Mat& b, double gamma) -> double
{
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<Vec> r(n + 1, Vec(m + 1, inf));
    r[0][0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const double v[3] = {r[i - 1][j], r[i][j - 1], r[i - 1][j - 1]};
            const double lo = std::min({v[0], v[1], v[2]});
            double s = 0.0;
            for (const double e : v) {
                s += std::isinf(e) ? 0.0 : std::exp(-(e - lo) / gamma);
            }
            r[i][j] = sq_dist(a[i - 1], b[j - 1]) + lo - gamma * std::log(s);
        }
    }
    return r[n][m];
}

// Mann-Whitney over all positive/negative pairs.
inline auto auroc_pairs(const Vec& s, const std::vector<bool>& y) -> double
{
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] && !y[j]) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
        }
    }
    return wins / pairs;
}

// Average precision by enumerating each distinct score as a threshold
// (flag score >= threshold), highest first.
inline auto auprc_enumerate(const Vec& s, const std::vector<bool>& y) -> double
{
    Vec thresholds = s;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const double positives = static_cast<double>(std::count(y.begin(), y.end(), true));
    double ap = 0.0;
    double prev_recall = 0.0;
    for (const double thr : thresholds) {
        double tp = 0.0;
        double flagged = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= thr) {
                flagged += 1.0;
                tp += y[i] ? 1.0 : 0.0;
            }
        }
        const double recall = tp / positives;
        ap += (recall - prev_recall) * (tp / flagged);
        prev_recall = recall;
    }
    return ap;
}

struct F1Point {
    double f1 = 0.0;
    double threshold = 0.0;
};

// F1 at thresholds i * max / (count - 1), flag score > threshold; first
// maximum wins.
inline auto f1_sweep(const Vec& s, const std::vector<bool>& y, std::size_t count = 1000) -> F1Point
{
    const double mx = *std::max_element(s.begin(), s.end());
    F1Point best{-1.0, 0.0};
    for (std::size_t i = 0; i < count; ++i) {
        const double thr = static_cast<double>(i) * mx / static_cast<double>(count - 1);
        double tp = 0.0;
        double fp = 0.0;
        double fn = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            const bool flag = s[k] > thr;
            tp += (flag && y[k]) ? 1.0 : 0.0;
            fp += (flag && !y[k]) ? 1.0 : 0.0;
            fn += (!flag && y[k]) ? 1.0 : 0.0;
        }
        const double f1 = tp == 0.0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
        if (f1 > best.f1) {
            best = {f1, thr};
        }
    }
    return best;
}

// x = A^-1 b for 3x3 A by Cramer's rule.
inline auto solve3(const Mat& a, const Vec& b) -> Vec
{
    const auto det = [](const Mat& m) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
               - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
               + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double d = det(a);
    Vec x(3);
    for (std::size_t c = 0; c < 3; ++c) {
        Mat m = a;
        for (std::size_t r = 0; r < 3; ++r) {
            m[r][c] = b[r];
        }
        x[c] = det(m) / d;
    }
    return x;
}

// Central difference of f with respect to *v.
inline auto central_difference(const std::function<double()>& f, double* v, double step) -> double
{
    const double saved = *v;
    *v = saved + step;
    const double up = f();
    *v = saved - step;
    const double down = f();
    *v = saved;
    return (up - down) / (2.0 * step);
}

// Relative error with an absolute floor so that two near-zero values agree.
inline auto relative_error(double a, double b, double floor) -> double
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline auto random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) -> raemepc::Tensor
{
    raemepc::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.data()) {
        v = u(rng);
    }
    return t;
}

inline auto random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                       double hi = 1.0) -> Mat
{
    std::uniform_real_distribution<double> u(lo, hi);
    Mat m(rows, Vec(cols));
    for (auto& r : m) {
        for (auto& v : r) {
            v = u(rng);
        }
    }
    return m;
}

inline auto to_tensor(const Mat& m) -> raemepc::Tensor
{
    raemepc::Tensor t({m.size(), m.empty() ? 0 : m[0].size()});
    for (std::size_t r = 0; r < m.size(); ++r) {
        for (std::size_t c = 0; c < m[r].size(); ++c) {
            t(r, c) = m[r][c];
        }
    }
    return t;
}

} // namespace oracle
