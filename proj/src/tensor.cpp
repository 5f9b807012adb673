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

#include "raemepc/tensor.hpp"

#include "raemepc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace raemepc {

namespace {

auto element_count(const std::vector<std::size_t>& shape) -> std::size_t
{
    return std::accumulate(
      shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
  : shape_(std::move(shape)), data_(element_count(shape_), fill)
{}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
  : shape_(std::move(shape)), data_(std::move(data))
{
    if (element_count(shape_) != data_.size()) {
        throw DimensionError("tensor shape " + shape_string(shape_) + " needs "
                             + std::to_string(element_count(shape_))
                             + " values, got " + std::to_string(data_.size()));
    }
}

auto Tensor::vector(std::initializer_list<double> values) -> Tensor
{
    return Tensor({values.size()}, std::vector<double>(values));
}

auto Tensor::matrix(std::size_t rows,
                    std::size_t cols,
                    std::initializer_list<double> values) -> Tensor
{
    return Tensor({rows, cols}, std::vector<double>(values));
}

auto Tensor::rows() const noexcept -> std::size_t
{
    return shape_.empty() ? 0 : shape_[0];
}

auto Tensor::cols() const noexcept -> std::size_t
{
    return shape_.size() < 2 ? 1 : shape_[1];
}

void Tensor::fill(double value) noexcept
{
    std::fill(data_.begin(), data_.end(), value);
}

auto Tensor::all_finite() const noexcept -> bool
{
    return std::all_of(
      data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

auto shape_string(const std::vector<std::size_t>& shape) -> std::string
{
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context)
{
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(context) + ": shape "
                             + shape_string(a.shape()) + " vs "
                             + shape_string(b.shape()));
    }
}

} // namespace raemepc
