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

#include "raemepc/trainer.hpp"

#include "raemepc/adam.hpp"
#include "raemepc/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace raemepc::train {

namespace {

// Independent stream per (seed, epoch, purpose).
auto derived_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t purpose) -> Rng
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch),
                      static_cast<std::uint32_t>(purpose)};
    return Rng(seq);
}

auto is_finite(const LossBreakdown& l) -> bool
{
    return std::isfinite(l.total) && std::isfinite(l.recon) && std::isfinite(l.shape)
           && std::isfinite(l.pred);
}

} // namespace

void TrainConfig::validate() const
{
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (!(clip_norm >= 0.0)) {
        throw ConfigError("clip_norm must be nonnegative");
    }
    weights.validate();
}

void TrainLog::write_csv(std::ostream& out, bool include_seconds) const
{
    out << "epoch,train_total,train_recon,train_shape,train_pred,validation_total";
    if (include_seconds) {
        out << ",seconds";
    }
    out << '\n';
    const auto old_precision = out.precision(17);
    for (const auto& e : epochs) {
        out << e.epoch << ',' << e.train.total << ',' << e.train.recon << ','
            << e.train.shape << ',' << e.train.pred << ',' << e.validation_total;
        if (include_seconds) {
            out << ',' << e.seconds;
        }
        out << '\n';
    }
    out.precision(old_precision);
}

auto batch_loss(const model::ModelParams& params,
                model::ModelParams* grads,
                const model::ModelConfig& config,
                std::span<const data::WindowSample> windows,
                const loss::LossWeights& weights,
                model::NoiseSource noise) -> LossBreakdown
{
    LossBreakdown sum;
    if (windows.empty()) {
        return sum;
    }
    const auto with_target = static_cast<std::size_t>(std::count_if(
      windows.begin(), windows.end(), [](const auto& w) { return w.prediction_target.has_value(); }));
    const double inv_n = 1.0 / static_cast<double>(windows.size());
    const double inv_pred = with_target > 0 ? 1.0 / static_cast<double>(with_target) : 0.0;

    Tape tape;
    for (const auto& w : windows) {
        tape.clear();
        const auto out = model::forward(tape, params, grads, config, w.input, noise);
        const Var recon = loss::squared_error(tape, out.recon_final, w.input);
        const Var shape = loss::shape_loss(tape, w.input, out.recon_per_resolution, weights.gamma);
        std::vector<Var> terms{recon, shape};
        std::vector<double> coeffs{inv_n, weights.lambda_shape * inv_n};
        double pred_value = 0.0;
        if (w.prediction_target) {
            const Var pred = loss::squared_error(tape, out.prediction, *w.prediction_target);
            pred_value = tape.scalar(pred);
            terms.push_back(pred);
            coeffs.push_back(weights.lambda_pred * inv_pred);
        }
        const Var objective = tape.linear_combination(terms, coeffs);

        sum.recon += tape.scalar(recon) * inv_n;
        sum.shape += tape.scalar(shape) * inv_n;
        sum.pred += pred_value * inv_pred;
        if (grads != nullptr && std::isfinite(tape.scalar(objective))) {
            tape.backward(objective);
        }
    }
    sum.total = loss::total_loss(sum.recon, sum.shape, sum.pred, weights);
    return sum;
}

auto evaluate_loss(const model::ModelParams& params,
                   const model::ModelConfig& config,
                   std::span<const data::WindowSample> windows,
                   const loss::LossWeights& weights) -> LossBreakdown
{
    return batch_loss(params, nullptr, config, windows, weights, {});
}

auto train(const model::ModelConfig& config,
           model::ModelParams initial,
           std::span<const data::WindowSample> train_windows,
           std::span<const data::WindowSample> validation_windows,
           const TrainConfig& options,
           const EpochCallback& on_epoch) -> TrainResult
{
    config.validate();
    options.validate();
    if (train_windows.empty()) {
        throw InsufficientDataError("train: no training windows");
    }
    if (validation_windows.empty()) {
        throw InsufficientDataError("train: no validation windows");
    }

    TrainResult result;
    result.params = initial;
    result.best_validation =
      evaluate_loss(initial, config, validation_windows, options.weights).total;
    if (options.epochs == 0) {
        return result;
    }

    auto params = std::move(initial);
    auto grads = model::ModelParams::zeros(config);
    Adam adam(AdamOptions{options.learning_rate});
    const auto param_ptrs = params.tensors();
    auto grad_ptrs = grads.tensors();
    const std::vector<const Tensor*> grad_const(grad_ptrs.begin(), grad_ptrs.end());

    std::vector<std::size_t> order(train_windows.size());
    std::vector<data::WindowSample> batch;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto shuffle_rng = derived_rng(options.seed, epoch, 1);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        auto noise_rng = derived_rng(options.seed, epoch, 2);

        LossBreakdown epoch_sum;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += options.batch_size) {
            batch.clear();
            const auto end = std::min(order.size(), b + options.batch_size);
            for (std::size_t i = b; i < end; ++i) {
                batch.push_back(train_windows[order[i]]);
            }
            grads.set_zero();
            const auto l = batch_loss(params,
                                      &grads,
                                      config,
                                      batch,
                                      options.weights,
                                      model::NoiseSource{&noise_rng, config.noise_scale});
            if (!is_finite(l)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch " << batches + 1
                    << " (recon=" << l.recon << ", shape=" << l.shape << ", pred=" << l.pred
                    << ")";
                throw NumericalError(msg.str());
            }
            clip_global_norm(grad_ptrs, options.clip_norm);
            adam.step(param_ptrs, grad_const);
            epoch_sum.total += l.total;
            epoch_sum.recon += l.recon;
            epoch_sum.shape += l.shape;
            epoch_sum.pred += l.pred;
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        const double inv = 1.0 / static_cast<double>(batches);
        rec.train = LossBreakdown{epoch_sum.total * inv,
                                  epoch_sum.recon * inv,
                                  epoch_sum.shape * inv,
                                  epoch_sum.pred * inv};
        rec.validation_total =
          evaluate_loss(params, config, validation_windows, options.weights).total;
        if (!std::isfinite(rec.validation_total)) {
            throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        rec.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.epochs.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }

        if (rec.validation_total < result.best_validation) {
            result.best_validation = rec.validation_total;
            result.best_epoch = epoch;
            result.params = params;
            since_best = 0;
        } else if (options.patience > 0 && ++since_best >= options.patience) {
            break;
        }
    }
    return result;
}

void GridSpec::validate() const
{
    if (hidden_dims.empty() || taus.empty() || betas.empty() || lambda_shapes.empty()) {
        throw ConfigError("every grid axis needs at least one value");
    }
}

auto enumerate_grid(const GridSpec& grid) -> std::vector<GridPoint>
{
    grid.validate();
    std::vector<GridPoint> points;
    for (const auto h : grid.hidden_dims) {
        for (const auto tau : grid.taus) {
            for (const auto beta : grid.betas) {
                for (const auto ls : grid.lambda_shapes) {
                    points.push_back(GridPoint{points.size(), h, tau, beta, ls});
                }
            }
        }
    }
    return points;
}

auto apply_grid_point(model::ModelConfig config, const GridPoint& point) -> model::ModelConfig
{
    config.hidden_dim = point.hidden_dim;
    config.tau = point.tau;
    config.beta = point.beta;
    return config;
}

auto grid_search(const model::ModelConfig& base,
                 const TrainConfig& options,
                 const GridSpec& grid,
                 const data::WindowSplit& windows,
                 std::size_t jobs,
                 const GridHooks& hooks) -> GridOutcome
{
    const auto points = enumerate_grid(grid);
    std::vector<GridRow> rows(points.size());
    std::vector<std::optional<TrainResult>> results(points.size());
    std::mutex mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= points.size()) {
                return;
            }
            GridRow row;
            row.point = points[i];
            try {
                const auto config = apply_grid_point(base, points[i]);
                auto opts = options;
                opts.weights.lambda_shape = points[i].lambda_shape;
                auto res = train(config,
                                 model::ModelParams::init(config),
                                 windows.train,
                                 windows.validation,
                                 opts);
                row.ok = true;
                row.validation_total = res.best_validation;
                row.best_epoch = res.best_epoch;
                row.epochs_run = res.log.epochs.size();
                if (hooks.evaluate) {
                    hooks.evaluate(config, res, row);
                }
                results[i] = std::move(res);
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
            std::lock_guard lock(mutex);
            rows[i] = row;
            if (hooks.on_row) {
                hooks.on_row(row);
            }
        }
    };

    const auto n_threads = std::max<std::size_t>(1, std::min(jobs, points.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
    }

    std::vector<std::size_t> rank(points.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
        if (rows[a].ok != rows[b].ok) {
            return rows[a].ok;
        }
        return rows[a].ok && rows[a].validation_total < rows[b].validation_total;
    });

    GridOutcome outcome;
    for (const auto i : rank) {
        outcome.rows.push_back(rows[i]);
    }
    if (!outcome.rows.empty() && outcome.rows.front().ok) {
        const auto best = rank.front();
        outcome.best = 0;
        outcome.best_config = apply_grid_point(base, points[best]);
        outcome.best_result = std::move(results[best]);
    }
    return outcome;
}

} // namespace raemepc::train
