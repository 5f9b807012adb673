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
#include <random>
#include <span>
#include <vector>

namespace raemepc {

using Rng = std::mt19937_64;

// Standard LSTM cell. Gate rows are laid out as [input, forget, cell, output],
// each block hidden_dim rows tall.
struct LstmCell {
    Tensor w_input;     // [4H, input_dim]
    Tensor w_recurrent; // [4H, H]
    Tensor bias;        // [4H]

    static auto zeros(std::size_t input_dim, std::size_t hidden_dim) -> LstmCell;
    // uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1.
    static auto init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
      -> LstmCell;

    [[nodiscard]] auto input_dim() const noexcept -> std::size_t
    {
        return w_input.cols();
    }
    [[nodiscard]] auto hidden_dim() const noexcept -> std::size_t
    {
        return w_recurrent.cols();
    }

    auto operator==(const LstmCell&) const -> bool = default;
};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;
};

struct DenseLayer {
    Tensor weight; // [out, in]
    Tensor bias;   // [out]

    static auto zeros(std::size_t in_dim, std::size_t out_dim) -> DenseLayer;
    // uniform(-1/sqrt(in), 1/sqrt(in)) weights and bias.
    static auto init(std::size_t in_dim, std::size_t out_dim, Rng& rng)
      -> DenseLayer;

    [[nodiscard]] auto in_dim() const noexcept -> std::size_t
    {
        return weight.cols();
    }
    [[nodiscard]] auto out_dim() const noexcept -> std::size_t
    {
        return weight.rows();
    }

    auto operator==(const DenseLayer&) const -> bool = default;
};

auto recurrent_step(const LstmCell& cell,
                    std::span<const double> x,
                    std::span<const double> h_prev,
                    std::span<const double> c_prev) -> LstmState;

// y = W x + b, no activation.
auto dense_forward(const DenseLayer& layer, std::span<const double> x)
  -> std::vector<double>;

namespace detail {

// Post-activation gates [i, f, g, o] followed by tanh(c): 5H values.
struct LstmActivations {
    std::vector<double> gates;
    std::vector<double> tanh_c;
};

void lstm_kernel(const LstmCell& cell,
                 std::span<const double> x,
                 std::span<const double> h_prev,
                 std::span<const double> c_prev,
                 std::span<double> h_out,
                 std::span<double> c_out,
                 LstmActivations* keep);

void check_lstm_shapes(const LstmCell& cell,
                       std::size_t x_size,
                       std::size_t h_size,
                       std::size_t c_size);

void check_dense_shapes(const DenseLayer& layer, std::size_t x_size);

} // namespace detail

} // namespace raemepc
