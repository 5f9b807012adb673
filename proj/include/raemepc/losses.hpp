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

#include "raemepc/tape.hpp"
#include "raemepc/tensor.hpp"

#include <span>
#include <vector>

namespace raemepc::loss {

struct LossWeights {
    double lambda_shape = 0.001;
    double lambda_pred = 1.0;
    double gamma = 0.01; // soft-DTW smoothing

    void validate() const;
};

// sum_t ||y_t - x_t||^2
auto recon_loss(const Tensor& reconstruction, const Tensor& window) -> double;
// sum_t ||y_t - x_{t + T/2}||^2
auto pred_loss(const Tensor& prediction, const Tensor& future) -> double;
auto total_loss(double recon, double shape, double pred, const LossWeights& weights) -> double;

// Dynamic-programming tables for soft-DTW between an n-row and an m-row
// sequence. `accumulated` and `alignment` are padded to (n+2) x (m+2).
struct SdtwWorkspace {
    Tensor cost;        // [n, m] squared Euclidean distances
    Tensor accumulated; // R; R(0,0) = 0, rest of row/column 0 is +inf
    Tensor alignment;   // E = d value / d cost, filled by the backward sweep
};

// Smoothed minimum -gamma * log(sum exp(-v / gamma)), max-shifted.
auto softmin(double a, double b, double c, double gamma) -> double;

auto sdtw(const Tensor& a, const Tensor& b, double gamma, SdtwWorkspace* workspace = nullptr)
  -> double;

struct SdtwGradient {
    double value;
    Tensor grad_a;
    Tensor grad_b;
};

auto sdtw_with_gradient(const Tensor& a, const Tensor& b, double gamma) -> SdtwGradient;

// Mean soft-DTW between the window and each coarser level's time-ordered
// output (levels 1 .. K-1; level 0 is excluded). Zero when K = 1.
// `per_resolution` holds outputs in emission order, finest first.
auto shape_loss(const Tensor& window, std::span<const Tensor> per_resolution, double gamma)
  -> double;

// Tape ops ---------------------------------------------------------------

// Scalar sum_t ||seq_t - target_t||^2; gradient flows into `seq` only.
auto squared_error(Tape& tape, std::span<const Var> seq, const Tensor& target) -> Var;

// Soft-DTW between a constant target and a recorded sequence.
auto soft_dtw(Tape& tape, const Tensor& target, std::span<const Var> seq, double gamma)
  -> Var;

// `per_resolution` in emission order, finest first.
auto shape_loss(Tape& tape,
                const Tensor& window,
                const std::vector<std::vector<Var>>& per_resolution,
                double gamma) -> Var;

} // namespace raemepc::loss
