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

#include "raemepc/layers.hpp"
#include "raemepc/tape.hpp"
#include "raemepc/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace raemepc::model {

struct ModelConfig {
    std::size_t dims = 1;            // d, variables per time step
    std::size_t window_length = 64;  // T
    std::size_t encoder_levels = 3;  // K^(E)
    std::size_t decoder_levels = 3;  // K^(RD)
    std::size_t tau = 4;             // resolution ratio between levels
    std::size_t hidden_dim = 32;
    double beta = 0.1;               // weight of a decoder's own state in fusion
    double noise_scale = 0.1;        // decoder input noise, training only
    std::uint64_t seed = 0;          // parameter initialization

    void validate() const;
    auto operator==(const ModelConfig&) const -> bool = default;
};

// Sequence length handled by each resolution level, finest first:
// round-half-up(T / tau^k) for k = 0 .. levels-1.
auto resolution_lengths(std::size_t window_length, std::size_t tau, std::size_t levels)
  -> std::vector<std::size_t>;

// Index 0 is the finest (full-length) level throughout.
struct ModelParams {
    std::vector<LstmCell> encoder_cells;
    // [K-1] maps the coarsest last hidden state; [k < K-1] merges level k
    // with the aggregate of the coarser levels.
    std::vector<DenseLayer> encoder_aggregators;
    std::vector<LstmCell> decoder_cells;
    std::vector<DenseLayer> decoder_heads;
    // [k] fuses decoder k with decoder k+1; K-1 entries.
    std::vector<DenseLayer> decoder_fusions;
    LstmCell predictor_cell;
    DenseLayer predictor_head;

    static auto init(const ModelConfig& config) -> ModelParams;
    static auto zeros(const ModelConfig& config) -> ModelParams;

    // Visits every tensor with a stable dotted name, in a fixed order.
    void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;

    [[nodiscard]] auto tensors() -> std::vector<Tensor*>;
    [[nodiscard]] auto tensors() const -> std::vector<const Tensor*>;
    [[nodiscard]] auto parameter_count() const -> std::size_t;
    void set_zero();

    auto operator==(const ModelParams&) const -> bool = default;
};

// Decoder input noise; a null source or zero scale disables it.
struct NoiseSource {
    Rng* rng = nullptr;
    double scale = 0.0;

    [[nodiscard]] auto active() const noexcept -> bool
    {
        return rng != nullptr && scale != 0.0;
    }
};

struct TapeOutputs {
    Var encoded;
    // Per level, outputs in emission order (last time step first).
    std::vector<std::vector<Var>> recon_per_resolution;
    // Finest level in time order.
    std::vector<Var> recon_final;
    std::vector<Var> prediction;
};

// `grads`, when non-null, has the layout of `params` and receives
// accumulated gradients on tape.backward().
auto encode(Tape& tape,
            const ModelParams& params,
            ModelParams* grads,
            const ModelConfig& config,
            const Tensor& window) -> Var;

auto decode_reconstruction(Tape& tape,
                           const ModelParams& params,
                           ModelParams* grads,
                           const ModelConfig& config,
                           Var encoded,
                           NoiseSource noise) -> std::vector<std::vector<Var>>;

auto decode_prediction(Tape& tape,
                       const ModelParams& params,
                       ModelParams* grads,
                       Var encoded,
                       const Tensor& window) -> std::vector<Var>;

auto forward(Tape& tape,
             const ModelParams& params,
             ModelParams* grads,
             const ModelConfig& config,
             const Tensor& window,
             NoiseSource noise) -> TapeOutputs;

struct ForwardOutputs {
    std::vector<double> encoded;
    std::vector<Tensor> recon_per_resolution; // emission order
    Tensor recon_final;                       // [T, d], time order
    Tensor prediction;                        // [T, d]
};

auto forward(const ModelParams& params,
             const ModelConfig& config,
             const Tensor& window,
             NoiseSource noise = {}) -> ForwardOutputs;

// Noise-free time-ordered reconstruction of one window.
auto reconstruct(const ModelParams& params, const ModelConfig& config, const Tensor& window)
  -> Tensor;

// Stacks tape vectors (each of width `cols`) into a [rows, cols] tensor.
auto stack(const Tape& tape, std::span<const Var> rows) -> Tensor;

} // namespace raemepc::model
