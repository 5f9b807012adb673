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

#include "raemepc/data.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace raemepc::synthetic {

// Quasi-periodic multivariate signal with injected anomalies in the test
// part: short spikes and sustained level shifts, each on one variable.
struct Spec {
    std::size_t dims = 2;
    std::size_t train_length = 4096;
    std::size_t test_length = 2048;
    double anomaly_fraction = 0.05; // target share of labeled test steps
    double noise = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Dataset {
    data::TimeSeries train; // all labels false
    data::TimeSeries test;
};

auto generate(const Spec& spec) -> Dataset;

// train.csv and test.csv with a "label" column.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

void write_csv(const data::TimeSeries& series, std::ostream& out);

} // namespace raemepc::synthetic
