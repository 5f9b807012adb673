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

#include <cstdint>
#include <span>
#include <vector>

namespace raemepc {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created on the first step
// and must keep matching the parameter shapes afterwards.
class Adam {
public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

    [[nodiscard]] auto options() const noexcept -> const AdamOptions& { return options_; }
    [[nodiscard]] auto step_count() const noexcept -> std::uint64_t { return step_; }
    [[nodiscard]] auto first_moments() const noexcept -> const std::vector<Tensor>&
    {
        return m_;
    }
    [[nodiscard]] auto second_moments() const noexcept -> const std::vector<Tensor>&
    {
        return v_;
    }

private:
    AdamOptions options_;
    std::uint64_t step_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

[[nodiscard]] auto global_norm(std::span<const Tensor* const> grads) -> double;

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
auto clip_global_norm(std::span<Tensor* const> grads, double max_norm) -> double;

} // namespace raemepc
