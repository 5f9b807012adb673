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

#include "raemepc/data.hpp"

#include "raemepc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace raemepc::data {

namespace {

auto trim(std::string_view s) -> std::string_view
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

auto parse_double(std::string_view cell, std::size_t line) -> double
{
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') {
        cell.remove_prefix(1);
    }
    double value = 0.0;
    const auto* end = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc{} || ptr != end) {
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", line);
    }
    if (!std::isfinite(value)) {
        throw ParseError("non-finite value '" + std::string(cell) + "'", line);
    }
    return value;
}

auto parse_label(std::string_view cell, std::size_t line) -> bool
{
    cell = trim(cell);
    if (cell == "true" || cell == "True") {
        return true;
    }
    if (cell == "false" || cell == "False") {
        return false;
    }
    const double v = parse_double(cell, line);
    if (v != 0.0 && v != 1.0) {
        throw ParseError("label must be 0 or 1, got '" + std::string(cell) + "'", line);
    }
    return v == 1.0;
}

auto split(std::string_view line, char sep) -> std::vector<std::string_view>
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

auto split_whitespace(std::string_view line) -> std::vector<std::string_view>
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        const auto start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

struct RowSink {
    std::vector<double> values;
    std::vector<bool> labels;
    std::size_t width = 0;
    std::size_t rows = 0;

    void add(std::span<const std::string_view> cells,
             std::optional<std::size_t> label_index,
             std::size_t line)
    {
        const auto expected = width + (label_index ? 1 : 0);
        if (rows > 0 && cells.size() != expected) {
            throw ParseError("ragged row: expected " + std::to_string(expected)
                               + " cells, got " + std::to_string(cells.size()),
                             line);
        }
        if (rows == 0) {
            if (cells.size() < (label_index ? 2u : 1u)) {
                throw ParseError("row has no value columns", line);
            }
            width = cells.size() - (label_index ? 1 : 0);
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (label_index && i == *label_index) {
                labels.push_back(parse_label(cells[i], line));
            } else {
                values.push_back(parse_double(cells[i], line));
            }
        }
        ++rows;
    }
};

auto finish(RowSink sink, std::vector<std::string> names, bool has_labels) -> TimeSeries
{
    if (sink.rows == 0) {
        throw ParseError("no data rows", 0);
    }
    if (names.empty()) {
        for (std::size_t i = 0; i < sink.width; ++i) {
            names.push_back("x" + std::to_string(i));
        }
    }
    TimeSeries ts{Tensor({sink.rows, sink.width}, std::move(sink.values)), std::move(names), {}};
    if (has_labels) {
        ts.labels = std::move(sink.labels);
    }
    return ts;
}

auto parse_csv(std::istream& in) -> TimeSeries
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> names;
    std::optional<std::size_t> label_index;
    bool header_seen = false;
    RowSink sink;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto cells = split(trim(line), ',');
        if (!header_seen) {
            header_seen = true;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                const auto name = std::string(trim(cells[i]));
                if (name == "label") {
                    label_index = i;
                } else {
                    names.push_back(name);
                }
            }
            if (names.empty()) {
                throw ParseError("csv header has no value columns", line_no);
            }
            sink.width = names.size();
            continue;
        }
        if (cells.size() != names.size() + (label_index ? 1 : 0)) {
            throw ParseError("ragged row: expected "
                               + std::to_string(names.size() + (label_index ? 1 : 0))
                               + " cells, got " + std::to_string(cells.size()),
                             line_no);
        }
        sink.add(cells, label_index, line_no);
    }
    return finish(std::move(sink), std::move(names), label_index.has_value());
}

auto parse_whitespace(std::istream& in, bool label_column) -> TimeSeries
{
    std::string line;
    std::size_t line_no = 0;
    RowSink sink;
    while (std::getline(in, line)) {
        ++line_no;
        const auto cells = split_whitespace(line);
        if (cells.empty()) {
            continue;
        }
        std::optional<std::size_t> label_index;
        if (label_column) {
            label_index = cells.size() - 1;
        }
        sink.add(cells, label_index, line_no);
    }
    return finish(std::move(sink), {}, label_column);
}

} // namespace

auto parse_format(const std::string& name) -> SeriesFormat
{
    if (name == "auto" || name.empty()) {
        return SeriesFormat::automatic;
    }
    if (name == "whitespace" || name == "txt") {
        return SeriesFormat::whitespace;
    }
    if (name == "csv") {
        return SeriesFormat::csv;
    }
    throw ConfigError("unknown series format '" + name + "'");
}

auto parse_series(std::istream& in, const LoadOptions& options) -> TimeSeries
{
    auto format = options.format;
    std::string text;
    if (format == SeriesFormat::automatic) {
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
        const auto first_line = text.substr(0, text.find('\n'));
        format = first_line.find(',') != std::string::npos ? SeriesFormat::csv
                                                           : SeriesFormat::whitespace;
        std::istringstream again(text);
        return format == SeriesFormat::csv ? parse_csv(again)
                                           : parse_whitespace(again, options.label_column);
    }
    return format == SeriesFormat::csv ? parse_csv(in)
                                       : parse_whitespace(in, options.label_column);
}

auto load_series(const std::filesystem::path& path, const LoadOptions& options)
  -> TimeSeries
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot read '" + path.string() + "'", 0);
    }
    auto opts = options;
    if (opts.format == SeriesFormat::automatic && path.extension() == ".csv") {
        opts.format = SeriesFormat::csv;
    }
    try {
        return parse_series(in, opts);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

auto load_labels(const std::filesystem::path& path) -> std::vector<bool>
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot read '" + path.string() + "'", 0);
    }
    std::vector<bool> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto cell = trim(line);
        if (cell.empty()) {
            continue;
        }
        if (line_no == 1 && cell == "label") {
            continue;
        }
        labels.push_back(parse_label(cell, line_no));
    }
    return labels;
}

auto Standardizer::fit(const TimeSeries& train) -> Standardizer
{
    const auto n = train.length();
    const auto d = train.dims();
    if (n == 0 || d == 0) {
        throw InsufficientDataError("standardize: empty training series");
    }
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            s.mean[j] += train.values(t, j);
        }
    }
    for (double& m : s.mean) {
        m /= static_cast<double>(n);
    }
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            const double dev = train.values(t, j) - s.mean[j];
            s.stddev[j] += dev * dev;
        }
    }
    for (double& v : s.stddev) {
        v = std::max(std::sqrt(v / static_cast<double>(n)), std_floor);
    }
    return s;
}

auto Standardizer::apply(const TimeSeries& series) const -> TimeSeries
{
    if (series.dims() != dims()) {
        throw DimensionError("standardize: series has " + std::to_string(series.dims())
                             + " variables, statistics have " + std::to_string(dims()));
    }
    auto out = series;
    for (std::size_t t = 0; t < out.length(); ++t) {
        for (std::size_t j = 0; j < dims(); ++j) {
            out.values(t, j) = (series.values(t, j) - mean[j]) / stddev[j];
        }
    }
    return out;
}

auto Standardizer::invert(const TimeSeries& series) const -> TimeSeries
{
    if (series.dims() != dims()) {
        throw DimensionError("destandardize: dimension mismatch");
    }
    auto out = series;
    for (std::size_t t = 0; t < out.length(); ++t) {
        for (std::size_t j = 0; j < dims(); ++j) {
            out.values(t, j) = series.values(t, j) * stddev[j] + mean[j];
        }
    }
    return out;
}

auto standardize(const TimeSeries& train, std::span<const TimeSeries> others) -> Standardized
{
    auto stats = Standardizer::fit(train);
    Standardized out{stats.apply(train), {}, stats};
    for (const auto& s : others) {
        out.others.push_back(stats.apply(s));
    }
    return out;
}

void SplitSpec::validate() const
{
    if (window_length < 1) {
        throw ConfigError("window_length must be positive");
    }
    if (stride < 1 || stride > window_length) {
        throw ConfigError("stride must satisfy 1 <= stride <= window_length");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must lie in (0, 1)");
    }
}

auto window_origins(std::size_t n, std::size_t window, std::size_t stride, bool cover_tail)
  -> std::vector<std::size_t>
{
    if (window == 0 || stride == 0) {
        throw ArgumentError("window and stride must be positive");
    }
    if (n < window) {
        throw InsufficientDataError("series of length " + std::to_string(n)
                                    + " is shorter than the window length "
                                    + std::to_string(window));
    }
    std::vector<std::size_t> origins;
    for (std::size_t o = 0; o + window <= n; o += stride) {
        origins.push_back(o);
    }
    if (cover_tail && origins.back() + window < n) {
        origins.push_back(n - window);
    }
    return origins;
}

auto lookahead_offset(std::size_t window) noexcept -> std::size_t { return window / 2; }

auto make_windows(const TimeSeries& series, const SplitSpec& spec, bool with_targets)
  -> std::vector<WindowSample>
{
    spec.validate();
    const auto n = series.length();
    const auto d = series.dims();
    const auto t_len = spec.window_length;
    const auto shift = lookahead_offset(t_len);

    auto slice_rows = [&](std::size_t start) {
        const auto src = series.values.data().subspan(start * d, t_len * d);
        return Tensor({t_len, d}, std::vector<double>(src.begin(), src.end()));
    };

    std::vector<WindowSample> windows;
    for (const auto origin : window_origins(n, t_len, spec.stride, false)) {
        WindowSample w{slice_rows(origin), std::nullopt, origin};
        if (with_targets && origin + shift + t_len <= n) {
            w.prediction_target = slice_rows(origin + shift);
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

auto split_train_validation(std::vector<WindowSample> windows, double validation_fraction)
  -> WindowSplit
{
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must lie in (0, 1)");
    }
    if (windows.size() < 2) {
        throw InsufficientDataError("need at least two windows to hold out validation data");
    }
    auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(windows.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, windows.size() - 1);
    WindowSplit split;
    const auto cut = windows.size() - n_val;
    split.train.assign(std::make_move_iterator(windows.begin()),
                       std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(cut)));
    split.validation.assign(std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(cut)),
                            std::make_move_iterator(windows.end()));
    return split;
}

auto downsample_indices(std::size_t length, std::size_t target) -> std::vector<std::size_t>
{
    if (target == 0 || length == 0) {
        throw ArgumentError("downsample: lengths must be positive");
    }
    if (target > length) {
        throw ArgumentError("downsample: target length " + std::to_string(target)
                            + " exceeds window length " + std::to_string(length));
    }
    if (target == 1) {
        return {0};
    }
    // round-half-up(j * (length-1) / (target-1)) in exact integer arithmetic.
    const auto span = length - 1;
    const auto steps = target - 1;
    std::vector<std::size_t> idx(target);
    for (std::size_t j = 0; j < target; ++j) {
        idx[j] = (2 * j * span + steps) / (2 * steps);
    }
    return idx;
}

auto downsample(const Tensor& x, std::size_t target) -> Tensor
{
    const auto idx = downsample_indices(x.rows(), target);
    const auto d = x.cols();
    Tensor out({target, d});
    for (std::size_t j = 0; j < target; ++j) {
        const auto src = x.row(idx[j]);
        std::copy(src.begin(), src.end(), out.row(j).begin());
    }
    return out;
}

} // namespace raemepc::data
