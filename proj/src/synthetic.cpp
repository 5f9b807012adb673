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

#include "raemepc/synthetic.hpp"

#include "raemepc/errors.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

namespace raemepc::synthetic {

namespace {

struct Component {
    double period;
    double phase;
    double amplitude;
};

constexpr std::size_t edge_margin = 16;
constexpr std::size_t gap = 12;

} // namespace

void Spec::validate() const
{
    if (dims == 0) {
        throw ArgumentError("synthetic: dims must be positive");
    }
    if (train_length < 2 || test_length < 4 * edge_margin) {
        throw ArgumentError("synthetic: series too short");
    }
    if (!(anomaly_fraction >= 0.0 && anomaly_fraction < 0.5)) {
        throw ArgumentError("synthetic: anomaly_fraction must be in [0, 0.5)");
    }
    if (!(noise >= 0.0)) {
        throw ArgumentError("synthetic: noise must be nonnegative");
    }
}

auto generate(const Spec& spec) -> Dataset
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::vector<Component>> shape(spec.dims);
    for (auto& comps : shape) {
        comps.push_back({24.0 + 40.0 * unit(rng), 2.0 * std::numbers::pi * unit(rng), 1.0});
        comps.push_back({6.0 + 10.0 * unit(rng), 2.0 * std::numbers::pi * unit(rng), 0.3});
    }
    const auto signal = [&](std::size_t v, double t) {
        double s = 0.0;
        for (const auto& c : shape[v]) {
            s += c.amplitude * std::sin(2.0 * std::numbers::pi * t / c.period + c.phase);
        }
        return s;
    };
    const auto series = [&](std::size_t n, std::size_t t0) {
        data::TimeSeries out;
        out.values = Tensor({n, spec.dims});
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t v = 0; v < spec.dims; ++v) {
                out.values(t, v) = signal(v, static_cast<double>(t0 + t)) + spec.noise * gauss(rng);
            }
        }
        for (std::size_t v = 0; v < spec.dims; ++v) {
            out.variable_names.push_back("x" + std::to_string(v));
        }
        out.labels = std::vector<bool>(n, false);
        return out;
    };

    Dataset ds;
    ds.train = series(spec.train_length, 0);
    ds.test = series(spec.test_length, spec.train_length);

    auto& labels = *ds.test.labels;
    const auto n = spec.test_length;
    const auto target = static_cast<std::size_t>(std::llround(spec.anomaly_fraction * static_cast<double>(n)));
    std::vector<bool> reserved(n, false);
    std::size_t labeled = 0;
    for (std::size_t attempt = 0; labeled < target && attempt < 10000; ++attempt) {
        const bool spike = unit(rng) < 0.5;
        auto len = spike ? 1 + static_cast<std::size_t>(3.0 * unit(rng))
                         : 10 + static_cast<std::size_t>(11.0 * unit(rng));
        len = std::min(len, target - labeled);
        const auto span = n - 2 * edge_margin - len;
        const auto start = edge_margin + static_cast<std::size_t>(unit(rng) * static_cast<double>(span));
        const auto lo = start >= gap ? start - gap : 0;
        const auto hi = std::min(n, start + len + gap);
        bool clear = true;
        for (auto t = lo; t < hi; ++t) {
            clear = clear && !reserved[t];
        }
        if (!clear) {
            continue;
        }
        const auto v = static_cast<std::size_t>(unit(rng) * static_cast<double>(spec.dims)) % spec.dims;
        const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
        const double magnitude = spike ? 4.0 + 2.0 * unit(rng) : 2.5 + 1.0 * unit(rng);
        for (auto t = start; t < start + len; ++t) {
            ds.test.values(t, v) += sign * magnitude;
            labels[t] = true;
        }
        for (auto t = lo; t < hi; ++t) {
            reserved[t] = true;
        }
        labeled += len;
    }
    return ds;
}

void write_csv(const data::TimeSeries& series, std::ostream& out)
{
    for (std::size_t v = 0; v < series.dims(); ++v) {
        out << (v ? "," : "")
            << (v < series.variable_names.size() ? series.variable_names[v] : "x" + std::to_string(v));
    }
    if (series.labels) {
        out << ",label";
    }
    out << '\n';
    out.precision(17);
    for (std::size_t t = 0; t < series.length(); ++t) {
        for (std::size_t v = 0; v < series.dims(); ++v) {
            out << (v ? "," : "") << series.values(t, v);
        }
        if (series.labels) {
            out << ',' << ((*series.labels)[t] ? 1 : 0);
        }
        out << '\n';
    }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& [name, s] : {std::pair{"train.csv", &dataset.train}, std::pair{"test.csv", &dataset.test}}) {
        std::ofstream out(dir / name);
        if (!out) {
            throw ArgumentError("cannot write " + (dir / name).string());
        }
        write_csv(*s, out);
    }
}

} // namespace raemepc::synthetic
