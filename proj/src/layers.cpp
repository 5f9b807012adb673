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

#include "raemepc/layers.hpp"

#include "raemepc/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

namespace raemepc {

namespace {

using RowMatrix =
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

auto sigmoid(double v) -> double { return 1.0 / (1.0 + std::exp(-v)); }

void fill_uniform(Tensor& t, double bound, Rng& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data()) {
        v = dist(rng);
    }
}

} // namespace

auto LstmCell::zeros(std::size_t input_dim, std::size_t hidden_dim) -> LstmCell
{
    if (input_dim == 0 || hidden_dim == 0) {
        throw DimensionError("lstm cell dimensions must be positive");
    }
    return LstmCell{Tensor({4 * hidden_dim, input_dim}),
                    Tensor({4 * hidden_dim, hidden_dim}),
                    Tensor({4 * hidden_dim})};
}

auto LstmCell::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng)
  -> LstmCell
{
    auto cell = zeros(input_dim, hidden_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    fill_uniform(cell.w_input, bound, rng);
    fill_uniform(cell.w_recurrent, bound, rng);
    fill_uniform(cell.bias, bound, rng);
    for (std::size_t i = hidden_dim; i < 2 * hidden_dim; ++i) {
        cell.bias[i] = 1.0;
    }
    return cell;
}

auto DenseLayer::zeros(std::size_t in_dim, std::size_t out_dim) -> DenseLayer
{
    if (in_dim == 0 || out_dim == 0) {
        throw DimensionError("dense layer dimensions must be positive");
    }
    return DenseLayer{Tensor({out_dim, in_dim}), Tensor({out_dim})};
}

auto DenseLayer::init(std::size_t in_dim, std::size_t out_dim, Rng& rng)
  -> DenseLayer
{
    auto layer = zeros(in_dim, out_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    fill_uniform(layer.weight, bound, rng);
    fill_uniform(layer.bias, bound, rng);
    return layer;
}

namespace detail {

void check_lstm_shapes(const LstmCell& cell,
                       std::size_t x_size,
                       std::size_t h_size,
                       std::size_t c_size)
{
    const auto hidden = cell.hidden_dim();
    if (x_size != cell.input_dim() || h_size != hidden || c_size != hidden) {
        throw DimensionError(
          "lstm step: cell expects input " + std::to_string(cell.input_dim())
          + " / hidden " + std::to_string(hidden) + ", got x="
          + std::to_string(x_size) + " h=" + std::to_string(h_size)
          + " c=" + std::to_string(c_size));
    }
}

void check_dense_shapes(const DenseLayer& layer, std::size_t x_size)
{
    if (x_size != layer.in_dim()) {
        throw DimensionError("dense: layer expects input "
                             + std::to_string(layer.in_dim()) + ", got "
                             + std::to_string(x_size));
    }
}

void lstm_kernel(const LstmCell& cell,
                 std::span<const double> x,
                 std::span<const double> h_prev,
                 std::span<const double> c_prev,
                 std::span<double> h_out,
                 std::span<double> c_out,
                 LstmActivations* keep)
{
    const auto hidden = static_cast<Eigen::Index>(cell.hidden_dim());
    const auto in = static_cast<Eigen::Index>(cell.input_dim());

    ConstMatrixMap wx(cell.w_input.data().data(), 4 * hidden, in);
    ConstMatrixMap wh(cell.w_recurrent.data().data(), 4 * hidden, hidden);
    Eigen::VectorXd pre = ConstVectorMap(cell.bias.data().data(), 4 * hidden);
    pre.noalias() += wx * ConstVectorMap(x.data(), in);
    pre.noalias() += wh * ConstVectorMap(h_prev.data(), hidden);

    if (keep != nullptr) {
        keep->gates.resize(4 * static_cast<std::size_t>(hidden));
        keep->tanh_c.resize(static_cast<std::size_t>(hidden));
    }
    for (Eigen::Index j = 0; j < hidden; ++j) {
        const double i_g = sigmoid(pre[j]);
        const double f_g = sigmoid(pre[hidden + j]);
        const double g_g = std::tanh(pre[2 * hidden + j]);
        const double o_g = sigmoid(pre[3 * hidden + j]);
        const double c = f_g * c_prev[j] + i_g * g_g;
        const double tc = std::tanh(c);
        c_out[j] = c;
        h_out[j] = o_g * tc;
        if (keep != nullptr) {
            keep->gates[j] = i_g;
            keep->gates[hidden + j] = f_g;
            keep->gates[2 * hidden + j] = g_g;
            keep->gates[3 * hidden + j] = o_g;
            keep->tanh_c[j] = tc;
        }
    }
}

} // namespace detail

auto recurrent_step(const LstmCell& cell,
                    std::span<const double> x,
                    std::span<const double> h_prev,
                    std::span<const double> c_prev) -> LstmState
{
    detail::check_lstm_shapes(cell, x.size(), h_prev.size(), c_prev.size());
    LstmState out{std::vector<double>(cell.hidden_dim()),
                  std::vector<double>(cell.hidden_dim())};
    detail::lstm_kernel(cell, x, h_prev, c_prev, out.h, out.c, nullptr);
    return out;
}

auto dense_forward(const DenseLayer& layer, std::span<const double> x)
  -> std::vector<double>
{
    detail::check_dense_shapes(layer, x.size());
    const auto out = static_cast<Eigen::Index>(layer.out_dim());
    const auto in = static_cast<Eigen::Index>(layer.in_dim());
    std::vector<double> y(layer.bias.values());
    VectorMap(y.data(), out).noalias() +=
      ConstMatrixMap(layer.weight.data().data(), out, in)
      * ConstVectorMap(x.data(), in);
    return y;
}

} // namespace raemepc
