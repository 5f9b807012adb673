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

#include "raemepc/model.hpp"

#include "raemepc/data.hpp"
#include "raemepc/errors.hpp"

#include <algorithm>
#include <random>

namespace raemepc::model {

void ModelConfig::validate() const
{
    if (dims == 0) {
        throw ConfigError("dims must be positive");
    }
    if (hidden_dim == 0) {
        throw ConfigError("hidden_dim must be positive");
    }
    if (tau < 2) {
        throw ConfigError("tau must be an integer >= 2");
    }
    if (encoder_levels == 0) {
        throw ConfigError("encoder_levels must be positive");
    }
    if (encoder_levels != decoder_levels) {
        throw ConfigError("encoder_levels and decoder_levels must match");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw ConfigError("beta must lie in [0, 1]");
    }
    if (!(noise_scale >= 0.0)) {
        throw ConfigError("noise_scale must be nonnegative");
    }
    resolution_lengths(window_length, tau, encoder_levels);
}

auto resolution_lengths(std::size_t window_length, std::size_t tau, std::size_t levels)
  -> std::vector<std::size_t>
{
    if (window_length < 2) {
        throw ConfigError("window_length must be at least 2");
    }
    if (tau < 2) {
        throw ConfigError("tau must be an integer >= 2");
    }
    if (levels == 0) {
        throw ConfigError("at least one resolution level is required");
    }
    std::vector<std::size_t> lengths;
    std::size_t power = 1;
    for (std::size_t k = 0; k < levels; ++k) {
        // round-half-up(T / power)
        const auto len = (2 * window_length + power) / (2 * power);
        if (len < 2) {
            throw ConfigError("window_length " + std::to_string(window_length)
                              + " with tau " + std::to_string(tau) + " gives level "
                              + std::to_string(k + 1) + " a length below 2");
        }
        if (!lengths.empty() && len >= lengths.back()) {
            throw ConfigError("resolution lengths must strictly decrease");
        }
        lengths.push_back(len);
        power *= tau;
    }
    return lengths;
}

namespace {

auto build(const ModelConfig& config, Rng* rng) -> ModelParams
{
    config.validate();
    const auto k = config.encoder_levels;
    const auto d = config.dims;
    const auto h = config.hidden_dim;
    auto cell = [&](std::size_t in) {
        return rng != nullptr ? LstmCell::init(in, h, *rng) : LstmCell::zeros(in, h);
    };
    auto dense = [&](std::size_t in, std::size_t out) {
        return rng != nullptr ? DenseLayer::init(in, out, *rng)
                              : DenseLayer::zeros(in, out);
    };

    ModelParams p;
    for (std::size_t i = 0; i < k; ++i) {
        p.encoder_cells.push_back(cell(d));
        p.encoder_aggregators.push_back(dense(h, h));
    }
    for (std::size_t i = 0; i < k; ++i) {
        p.decoder_cells.push_back(cell(d));
        p.decoder_heads.push_back(dense(h, d));
        if (i + 1 < k) {
            p.decoder_fusions.push_back(dense(2 * h, h));
        }
    }
    p.predictor_cell = cell(d);
    p.predictor_head = dense(h, d);
    return p;
}

template <typename Params, typename Fn>
void visit(Params& p, Fn&& fn)
{
    auto cell = [&](const std::string& prefix, auto& c) {
        fn(prefix + ".w_input", c.w_input);
        fn(prefix + ".w_recurrent", c.w_recurrent);
        fn(prefix + ".bias", c.bias);
    };
    auto dense = [&](const std::string& prefix, auto& l) {
        fn(prefix + ".weight", l.weight);
        fn(prefix + ".bias", l.bias);
    };
    for (std::size_t i = 0; i < p.encoder_cells.size(); ++i) {
        const auto base = "encoder." + std::to_string(i);
        cell(base + ".lstm", p.encoder_cells[i]);
        dense(base + ".aggregate", p.encoder_aggregators[i]);
    }
    for (std::size_t i = 0; i < p.decoder_cells.size(); ++i) {
        const auto base = "decoder." + std::to_string(i);
        cell(base + ".lstm", p.decoder_cells[i]);
        dense(base + ".head", p.decoder_heads[i]);
        if (i < p.decoder_fusions.size()) {
            dense(base + ".fusion", p.decoder_fusions[i]);
        }
    }
    cell("predictor.lstm", p.predictor_cell);
    dense("predictor.head", p.predictor_head);
}

template <typename T>
auto grad_of(std::vector<T>* v, std::size_t i) -> T*
{
    return v == nullptr ? nullptr : &(*v)[i];
}

} // namespace

auto ModelParams::init(const ModelConfig& config) -> ModelParams
{
    Rng rng(config.seed);
    return build(config, &rng);
}

auto ModelParams::zeros(const ModelConfig& config) -> ModelParams
{
    return build(config, nullptr);
}

void ModelParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn)
{
    visit(*this, fn);
}

void ModelParams::for_each(
  const std::function<void(const std::string&, const Tensor&)>& fn) const
{
    visit(*this, fn);
}

auto ModelParams::tensors() -> std::vector<Tensor*>
{
    std::vector<Tensor*> out;
    for_each([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

auto ModelParams::tensors() const -> std::vector<const Tensor*>
{
    std::vector<const Tensor*> out;
    for_each([&](const std::string&, const Tensor& t) { out.push_back(&t); });
    return out;
}

auto ModelParams::parameter_count() const -> std::size_t
{
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

void ModelParams::set_zero()
{
    for_each([](const std::string&, Tensor& t) { t.fill(0.0); });
}

auto encode(Tape& tape,
            const ModelParams& params,
            ModelParams* grads,
            const ModelConfig& config,
            const Tensor& window) -> Var
{
    if (window.rank() != 2 || window.rows() != config.window_length
        || window.cols() != config.dims) {
        throw DimensionError("encode: window shape " + shape_string(window.shape())
                             + " does not match config [" + std::to_string(config.window_length)
                             + ", " + std::to_string(config.dims) + "]");
    }
    const auto levels = params.encoder_cells.size();
    const auto lengths = resolution_lengths(config.window_length, config.tau, levels);
    const std::vector<double> zero(config.hidden_dim, 0.0);

    std::vector<Var> last_hidden;
    for (std::size_t k = 0; k < levels; ++k) {
        const auto x = data::downsample(window, lengths[k]);
        Var h = tape.input(zero);
        Var c = tape.input(zero);
        for (std::size_t t = 0; t < x.rows(); ++t) {
            const auto step = tape.lstm_step(params.encoder_cells[k],
                                             grad_of(grads ? &grads->encoder_cells : nullptr, k),
                                             tape.input(x.row(t)),
                                             h,
                                             c);
            h = step.h;
            c = step.c;
        }
        last_hidden.push_back(h);
    }

    auto* agg_grads = grads ? &grads->encoder_aggregators : nullptr;
    Var agg = tape.dense(
      params.encoder_aggregators[levels - 1], grad_of(agg_grads, levels - 1), last_hidden[levels - 1]);
    for (std::size_t k = levels - 1; k-- > 0;) {
        agg = tape.dense(params.encoder_aggregators[k],
                         grad_of(agg_grads, k),
                         tape.add(last_hidden[k], agg));
    }
    return agg;
}

auto decode_reconstruction(Tape& tape,
                           const ModelParams& params,
                           ModelParams* grads,
                           const ModelConfig& config,
                           Var encoded,
                           NoiseSource noise) -> std::vector<std::vector<Var>>
{
    if (tape.value(encoded).size() != config.hidden_dim) {
        throw DimensionError("decode: encoded state has wrong width");
    }
    const auto levels = params.decoder_cells.size();
    const auto lengths = resolution_lengths(config.window_length, config.tau, levels);
    std::normal_distribution<double> standard_normal(0.0, 1.0);

    std::vector<std::vector<Var>> outputs(levels);
    // hidden[k][t-1] is h_t of decoder k (1-based time t).
    std::vector<std::vector<Var>> hidden(levels);

    for (std::size_t k = levels; k-- > 0;) {
        const auto len = lengths[k];
        const auto& cell = params.decoder_cells[k];
        const auto& head = params.decoder_heads[k];
        auto* cell_grad = grad_of(grads ? &grads->decoder_cells : nullptr, k);
        auto* head_grad = grad_of(grads ? &grads->decoder_heads : nullptr, k);

        auto& hs = hidden[k];
        auto& ys = outputs[k];
        hs.assign(len, encoded);
        Var h = encoded;
        Var c = tape.input(std::vector<double>(config.hidden_dim, 0.0));
        ys.push_back(tape.dense(head, head_grad, h));

        for (std::size_t t = len - 1; t >= 1; --t) {
            Var feed = ys.back();
            if (noise.active()) {
                std::vector<double> delta(config.dims);
                for (double& v : delta) {
                    v = noise.scale * standard_normal(*noise.rng);
                }
                feed = tape.add(feed, tape.input(std::move(delta)));
            }
            Var state = h;
            if (k + 1 < levels) {
                const auto coarse_len = lengths[k + 1];
                // ceil(t / tau), clamped to the coarse decoder's range.
                const auto j = std::clamp<std::size_t>(
                  (t + config.tau - 1) / config.tau, 1, coarse_len);
                const Var fused =
                  tape.dense(params.decoder_fusions[k],
                             grad_of(grads ? &grads->decoder_fusions : nullptr, k),
                             tape.concat(h, hidden[k + 1][j - 1]));
                state = tape.mix(h, fused, config.beta);
            }
            const auto step = tape.lstm_step(cell, cell_grad, feed, state, c);
            h = step.h;
            c = step.c;
            hs[t - 1] = h;
            ys.push_back(tape.dense(head, head_grad, h));
        }
    }
    return outputs;
}

auto decode_prediction(Tape& tape,
                       const ModelParams& params,
                       ModelParams* grads,
                       Var encoded,
                       const Tensor& window) -> std::vector<Var>
{
    const auto& cell = params.predictor_cell;
    if (window.rank() != 2 || window.cols() != cell.input_dim()) {
        throw DimensionError("decode_prediction: window shape " + shape_string(window.shape())
                             + " does not match predictor input width "
                             + std::to_string(cell.input_dim()));
    }
    if (tape.value(encoded).size() != cell.hidden_dim()) {
        throw DimensionError("decode_prediction: encoded state has wrong width");
    }
    auto* cell_grad = grads ? &grads->predictor_cell : nullptr;
    auto* head_grad = grads ? &grads->predictor_head : nullptr;

    Var h = encoded;
    Var c = tape.input(std::vector<double>(cell.hidden_dim(), 0.0));
    std::vector<Var> out;
    out.reserve(window.rows());
    for (std::size_t t = 0; t < window.rows(); ++t) {
        const auto step = tape.lstm_step(cell, cell_grad, tape.input(window.row(t)), h, c);
        h = step.h;
        c = step.c;
        out.push_back(tape.dense(params.predictor_head, head_grad, h));
    }
    return out;
}

auto forward(Tape& tape,
             const ModelParams& params,
             ModelParams* grads,
             const ModelConfig& config,
             const Tensor& window,
             NoiseSource noise) -> TapeOutputs
{
    TapeOutputs out;
    out.encoded = encode(tape, params, grads, config, window);
    out.recon_per_resolution =
      decode_reconstruction(tape, params, grads, config, out.encoded, noise);
    const auto& finest = out.recon_per_resolution.front();
    out.recon_final.assign(finest.rbegin(), finest.rend());
    out.prediction = decode_prediction(tape, params, grads, out.encoded, window);
    return out;
}

auto stack(const Tape& tape, std::span<const Var> rows) -> Tensor
{
    if (rows.empty()) {
        return Tensor({0, 0});
    }
    const auto cols = tape.value(rows.front()).size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const Var v : rows) {
        const auto r = tape.value(v);
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
}

auto forward(const ModelParams& params,
             const ModelConfig& config,
             const Tensor& window,
             NoiseSource noise) -> ForwardOutputs
{
    Tape tape;
    const auto out = forward(tape, params, nullptr, config, window, noise);
    ForwardOutputs result;
    const auto enc = tape.value(out.encoded);
    result.encoded.assign(enc.begin(), enc.end());
    for (const auto& level : out.recon_per_resolution) {
        result.recon_per_resolution.push_back(stack(tape, level));
    }
    result.recon_final = stack(tape, out.recon_final);
    result.prediction = stack(tape, out.prediction);
    return result;
}

auto reconstruct(const ModelParams& params, const ModelConfig& config, const Tensor& window)
  -> Tensor
{
    Tape tape;
    const auto encoded = encode(tape, params, nullptr, config, window);
    const auto levels = decode_reconstruction(tape, params, nullptr, config, encoded, {});
    const auto& finest = levels.front();
    const std::vector<Var> ordered(finest.rbegin(), finest.rend());
    return stack(tape, ordered);
}

} // namespace raemepc::model
