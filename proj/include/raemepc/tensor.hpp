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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace raemepc {

// Dense row-major array of doubles. Rank 1 holds vectors, rank 2 holds
// time-by-variable matrices and weight matrices.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static auto vector(std::initializer_list<double> values) -> Tensor;
    static auto matrix(std::size_t rows,
                       std::size_t cols,
                       std::initializer_list<double> values) -> Tensor;

    [[nodiscard]] auto shape() const noexcept -> const std::vector<std::size_t>&
    {
        return shape_;
    }
    [[nodiscard]] auto rank() const noexcept -> std::size_t { return shape_.size(); }
    [[nodiscard]] auto size() const noexcept -> std::size_t { return data_.size(); }
    [[nodiscard]] auto empty() const noexcept -> bool { return data_.empty(); }

    // Extents of a rank-2 tensor; rank-1 tensors are treated as a column.
    [[nodiscard]] auto rows() const noexcept -> std::size_t;
    [[nodiscard]] auto cols() const noexcept -> std::size_t;

    [[nodiscard]] auto data() noexcept -> std::span<double> { return data_; }
    [[nodiscard]] auto data() const noexcept -> std::span<const double>
    {
        return data_;
    }
    [[nodiscard]] auto values() const noexcept -> const std::vector<double>&
    {
        return data_;
    }

    auto operator[](std::size_t i) noexcept -> double& { return data_[i]; }
    auto operator[](std::size_t i) const noexcept -> double { return data_[i]; }
    auto operator()(std::size_t r, std::size_t c) noexcept -> double&
    {
        return data_[r * cols() + c];
    }
    auto operator()(std::size_t r, std::size_t c) const noexcept -> double
    {
        return data_[r * cols() + c];
    }

    [[nodiscard]] auto row(std::size_t r) noexcept -> std::span<double>
    {
        return std::span<double>(data_).subspan(r * cols(), cols());
    }
    [[nodiscard]] auto row(std::size_t r) const noexcept -> std::span<const double>
    {
        return std::span<const double>(data_).subspan(r * cols(), cols());
    }

    void fill(double value) noexcept;
    [[nodiscard]] auto all_finite() const noexcept -> bool;
    [[nodiscard]] auto same_shape(const Tensor& other) const noexcept -> bool
    {
        return shape_ == other.shape_;
    }

    auto operator==(const Tensor& other) const -> bool = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

[[nodiscard]] auto shape_string(const std::vector<std::size_t>& shape) -> std::string;

// Throws DimensionError with `context` in the message when shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

} // namespace raemepc
