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

#include <stdexcept>
#include <string>

namespace raemepc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Operation invoked in the wrong lifecycle state (e.g. backward with no
// recorded forward pass).
class StateError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line)
    {}

    [[nodiscard]] auto line() const noexcept -> std::size_t { return line_; }

private:
    std::size_t line_;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

// Non-finite value encountered during training or scoring.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace raemepc
