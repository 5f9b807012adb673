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

#include "raemepc/tape.hpp"

#include "raemepc/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <string>

namespace raemepc {

namespace {

using RowMatrix =
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

auto as_index(std::size_t n) -> Eigen::Index { return static_cast<Eigen::Index>(n); }

} // namespace

auto Tape::node(Var v) const -> const Node&
{
    if (v.id >= nodes_.size()) {
        throw StateError("tape: unknown variable " + std::to_string(v.id));
    }
    return nodes_[v.id];
}

auto Tape::node(Var v) -> Node&
{
    if (v.id >= nodes_.size()) {
        throw StateError("tape: unknown variable " + std::to_string(v.id));
    }
    return nodes_[v.id];
}

auto Tape::record(std::vector<double> value, BackwardFn backward) -> Var
{
    nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
    has_grads_ = false;
    return Var{nodes_.size() - 1};
}

auto Tape::input(std::span<const double> values) -> Var
{
    return record(std::vector<double>(values.begin(), values.end()), nullptr);
}

auto Tape::input(std::vector<double> values) -> Var
{
    return record(std::move(values), nullptr);
}

auto Tape::value(Var v) const -> std::span<const double> { return node(v).value; }

auto Tape::scalar(Var v) const -> double
{
    const auto& n = node(v);
    if (n.value.size() != 1) {
        throw DimensionError("tape: expected a scalar, node has "
                             + std::to_string(n.value.size()) + " values");
    }
    return n.value[0];
}

auto Tape::grad(Var v) const -> std::span<const double>
{
    if (!has_grads_) {
        throw StateError("tape: gradients requested before backward()");
    }
    return node(v).grad;
}

auto Tape::grad_mut(Var v) -> std::span<double>
{
    if (!has_grads_) {
        throw StateError("tape: gradients requested before backward()");
    }
    return node(v).grad;
}

void Tape::clear() noexcept
{
    nodes_.clear();
    has_grads_ = false;
}

void Tape::backward(Var loss)
{
    if (nodes_.empty()) {
        throw StateError("tape: backward() called with no recorded forward pass");
    }
    const double loss_value = scalar(loss);
    if (!std::isfinite(loss_value)) {
        throw NumericalError("tape: backward() on non-finite loss");
    }
    for (auto& n : nodes_) {
        n.grad.assign(n.value.size(), 0.0);
    }
    has_grads_ = true;
    nodes_[loss.id].grad[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        if (nodes_[i].backward) {
            nodes_[i].backward(*this, Var{i});
        }
    }
}

auto Tape::dense(const DenseLayer& layer, DenseLayer* grad, Var x) -> Var
{
    detail::check_dense_shapes(layer, value(x).size());
    auto y = dense_forward(layer, value(x));
    return record(std::move(y), [&layer, grad, x](Tape& t, Var self) {
        const auto out = as_index(layer.out_dim());
        const auto in = as_index(layer.in_dim());
        ConstVectorMap dy(t.grad(self).data(), out);
        auto dx = t.grad_mut(x);
        VectorMap(dx.data(), in).noalias() +=
          ConstMatrixMap(layer.weight.data().data(), out, in).transpose() * dy;
        if (grad != nullptr) {
            MatrixMap(grad->weight.data().data(), out, in).noalias() +=
              dy * ConstVectorMap(t.value(x).data(), in).transpose();
            VectorMap(grad->bias.data().data(), out) += dy;
        }
    });
}

auto Tape::lstm_step(const LstmCell& cell, LstmCell* grad, Var x, Var h, Var c)
  -> LstmVars
{
    const auto hidden = cell.hidden_dim();
    detail::check_lstm_shapes(
      cell, value(x).size(), value(h).size(), value(c).size());

    std::vector<double> hc(2 * hidden);
    auto acts = std::make_shared<detail::LstmActivations>();
    detail::lstm_kernel(cell,
                        value(x),
                        value(h),
                        value(c),
                        std::span<double>(hc).first(hidden),
                        std::span<double>(hc).subspan(hidden),
                        acts.get());

    const Var joint = record(
      std::move(hc), [&cell, grad, x, h, c, acts](Tape& t, Var self) {
          const auto hd = cell.hidden_dim();
          const auto in = cell.input_dim();
          const auto g = t.grad(self);
          const auto dh_out = g.first(hd);
          const auto dc_out = g.subspan(hd);
          const auto c_prev = t.value(c);
          const auto& a = acts->gates;

          // d(pre-activation) for the four gates.
          Eigen::VectorXd dpre(as_index(4 * hd));
          auto dc_prev = t.grad_mut(c);
          for (std::size_t j = 0; j < hd; ++j) {
              const double i_g = a[j];
              const double f_g = a[hd + j];
              const double g_g = a[2 * hd + j];
              const double o_g = a[3 * hd + j];
              const double tc = acts->tanh_c[j];
              const double dc =
                dc_out[j] + dh_out[j] * o_g * (1.0 - tc * tc);
              const double d_o = dh_out[j] * tc;
              dpre[as_index(j)] = dc * g_g * i_g * (1.0 - i_g);
              dpre[as_index(hd + j)] = dc * c_prev[j] * f_g * (1.0 - f_g);
              dpre[as_index(2 * hd + j)] = dc * i_g * (1.0 - g_g * g_g);
              dpre[as_index(3 * hd + j)] = d_o * o_g * (1.0 - o_g);
              dc_prev[j] += dc * f_g;
          }

          ConstMatrixMap wx(cell.w_input.data().data(), as_index(4 * hd), as_index(in));
          ConstMatrixMap wh(cell.w_recurrent.data().data(), as_index(4 * hd), as_index(hd));
          auto dx = t.grad_mut(x);
          VectorMap(dx.data(), as_index(in)).noalias() += wx.transpose() * dpre;
          auto dh_prev = t.grad_mut(h);
          VectorMap(dh_prev.data(), as_index(hd)).noalias() += wh.transpose() * dpre;

          if (grad != nullptr) {
              MatrixMap(grad->w_input.data().data(), as_index(4 * hd), as_index(in))
                .noalias() +=
                dpre * ConstVectorMap(t.value(x).data(), as_index(in)).transpose();
              MatrixMap(grad->w_recurrent.data().data(), as_index(4 * hd), as_index(hd))
                .noalias() +=
                dpre * ConstVectorMap(t.value(h).data(), as_index(hd)).transpose();
              VectorMap(grad->bias.data().data(), as_index(4 * hd)) += dpre;
          }
      });
    return LstmVars{slice(joint, 0, hidden), slice(joint, hidden, hidden)};
}

auto Tape::slice(Var a, std::size_t offset, std::size_t length) -> Var
{
    const auto src = value(a);
    if (offset + length > src.size()) {
        throw DimensionError("tape: slice out of range");
    }
    std::vector<double> out(src.begin() + static_cast<std::ptrdiff_t>(offset),
                            src.begin() + static_cast<std::ptrdiff_t>(offset + length));
    return record(std::move(out), [a, offset](Tape& t, Var self) {
        const auto g = t.grad(self);
        auto da = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[offset + i] += g[i];
        }
    });
}

auto Tape::add(Var a, Var b) -> Var
{
    const auto va = value(a);
    const auto vb = value(b);
    if (va.size() != vb.size()) {
        throw DimensionError("tape: add of mismatched sizes");
    }
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = va[i] + vb[i];
    }
    return record(std::move(out), [a, b](Tape& t, Var self) {
        const auto g = t.grad(self);
        auto da = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[i] += g[i];
        }
        auto db = t.grad_mut(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            db[i] += g[i];
        }
    });
}

auto Tape::mix(Var a, Var b, double weight) -> Var
{
    const auto va = value(a);
    const auto vb = value(b);
    if (va.size() != vb.size()) {
        throw DimensionError("tape: mix of mismatched sizes");
    }
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = weight * va[i] + (1.0 - weight) * vb[i];
    }
    return record(std::move(out), [a, b, weight](Tape& t, Var self) {
        const auto g = t.grad(self);
        auto da = t.grad_mut(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            da[i] += weight * g[i];
        }
        auto db = t.grad_mut(b);
        for (std::size_t i = 0; i < g.size(); ++i) {
            db[i] += (1.0 - weight) * g[i];
        }
    });
}

auto Tape::concat(Var a, Var b) -> Var
{
    const auto va = value(a);
    const auto vb = value(b);
    std::vector<double> out(va.begin(), va.end());
    out.insert(out.end(), vb.begin(), vb.end());
    const auto na = va.size();
    return record(std::move(out), [a, b, na](Tape& t, Var self) {
        const auto g = t.grad(self);
        auto da = t.grad_mut(a);
        for (std::size_t i = 0; i < na; ++i) {
            da[i] += g[i];
        }
        auto db = t.grad_mut(b);
        for (std::size_t i = 0; i < db.size(); ++i) {
            db[i] += g[na + i];
        }
    });
}

auto Tape::sum(Var a) -> Var
{
    double s = 0.0;
    for (double v : value(a)) {
        s += v;
    }
    return record({s}, [a](Tape& t, Var self) {
        const double g = t.grad(self)[0];
        for (double& d : t.grad_mut(a)) {
            d += g;
        }
    });
}

auto Tape::sum_squares(Var a) -> Var
{
    double s = 0.0;
    for (double v : value(a)) {
        s += v * v;
    }
    return record({s}, [a](Tape& t, Var self) {
        const double g = t.grad(self)[0];
        const auto va = t.value(a);
        auto da = t.grad_mut(a);
        for (std::size_t i = 0; i < da.size(); ++i) {
            da[i] += 2.0 * va[i] * g;
        }
    });
}

auto Tape::linear_combination(std::span<const Var> terms,
                              std::span<const double> weights) -> Var
{
    if (terms.size() != weights.size()) {
        throw DimensionError("tape: linear_combination term/weight count mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        s += weights[i] * scalar(terms[i]);
    }
    std::vector<Var> ts(terms.begin(), terms.end());
    std::vector<double> ws(weights.begin(), weights.end());
    return record({s}, [ts = std::move(ts), ws = std::move(ws)](Tape& t, Var self) {
        const double g = t.grad(self)[0];
        for (std::size_t i = 0; i < ts.size(); ++i) {
            t.grad_mut(ts[i])[0] += ws[i] * g;
        }
    });
}

} // namespace raemepc
