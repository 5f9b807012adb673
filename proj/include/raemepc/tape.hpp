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

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace raemepc {

// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id;
};

struct LstmVars {
    Var h;
    Var c;
};

// Records a forward computation as a list of vector-valued nodes and replays
// it backwards. Layer parameters are not nodes: ops that read a layer take an
// optional gradient sink of the same layout and accumulate into it during
// backward(). A null sink means the layer is treated as constant.
//
// One tape serves one forward/backward pair on one thread.
class Tape {
public:
    // Receives the tape and the node being differentiated; reads
    // grad(self) and accumulates into the gradients of its inputs.
    using BackwardFn = std::function<void(Tape&, Var self)>;

    auto input(std::span<const double> values) -> Var;
    auto input(std::vector<double> values) -> Var;

    auto dense(const DenseLayer& layer, DenseLayer* grad, Var x) -> Var;
    auto lstm_step(const LstmCell& cell, LstmCell* grad, Var x, Var h, Var c)
      -> LstmVars;

    auto slice(Var a, std::size_t offset, std::size_t length) -> Var;
    auto add(Var a, Var b) -> Var;
    // weight * a + (1 - weight) * b
    auto mix(Var a, Var b, double weight) -> Var;
    auto concat(Var a, Var b) -> Var;
    auto sum(Var a) -> Var;
    auto sum_squares(Var a) -> Var;
    // Scalar sum_i weights[i] * terms[i]; every term must be a scalar.
    auto linear_combination(std::span<const Var> terms,
                            std::span<const double> weights) -> Var;

    // Escape hatch for fused ops defined outside this module.
    auto record(std::vector<double> value, BackwardFn backward) -> Var;

    [[nodiscard]] auto value(Var v) const -> std::span<const double>;
    [[nodiscard]] auto scalar(Var v) const -> double;
    // Valid after backward().
    [[nodiscard]] auto grad(Var v) const -> std::span<const double>;
    auto grad_mut(Var v) -> std::span<double>;

    // Reverse sweep seeded with d(loss)/d(loss) = 1. Node gradients are
    // recomputed from scratch on each call; layer sinks accumulate.
    void backward(Var loss);

    [[nodiscard]] auto size() const noexcept -> std::size_t { return nodes_.size(); }
    void clear() noexcept;

private:
    struct Node {
        std::vector<double> value;
        std::vector<double> grad;
        BackwardFn backward;
    };

    auto node(Var v) const -> const Node&;
    auto node(Var v) -> Node&;

    std::vector<Node> nodes_;
    bool has_grads_ = false;
};

} // namespace raemepc
