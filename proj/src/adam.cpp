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

#include "raemepc/adam.hpp"

#include "raemepc/errors.hpp"

#include <cmath>

namespace raemepc {

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads)
{
    if (params.size() != grads.size()) {
        throw DimensionError("adam: parameter/gradient count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(*params[i], *grads[i], "adam: parameter vs gradient");
    }
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    } else if (m_.size() != params.size()) {
        throw DimensionError("adam: parameter count changed between steps");
    }

    ++step_;
    const double t = static_cast<double>(step_);
    const double correction1 = 1.0 - std::pow(options_.beta1, t);
    const double correction2 = 1.0 - std::pow(options_.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(*params[i], m_[i], "adam: parameter vs moment buffer");
        auto p = params[i]->data();
        const auto g = grads[i]->data();
        auto m = m_[i].data();
        auto v = v_[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
            v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.eps);
        }
    }
}

auto global_norm(std::span<const Tensor* const> grads) -> double
{
    double sq = 0.0;
    for (const Tensor* g : grads) {
        for (double v : g->data()) {
            sq += v * v;
        }
    }
    return std::sqrt(sq);
}

auto clip_global_norm(std::span<Tensor* const> grads, double max_norm) -> double
{
    double sq = 0.0;
    for (const Tensor* g : grads) {
        for (double v : g->data()) {
            sq += v * v;
        }
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (Tensor* g : grads) {
            for (double& v : g->data()) {
                v *= scale;
            }
        }
    }
    return norm;
}

} // namespace raemepc
