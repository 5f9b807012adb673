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

#include "oracles.hpp"

#include "raemepc/data.hpp"
#include "raemepc/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

using namespace raemepc;
using namespace raemepc::data;

namespace {

auto parse(const std::string& text, LoadOptions opts = {}) -> TimeSeries
{
    std::istringstream in(text);
    return parse_series(in, opts);
}

auto series_from(const oracle::Mat& m) -> TimeSeries
{
    TimeSeries s;
    s.values = oracle::to_tensor(m);
    return s;
}

} // namespace

TEST_CASE("load_series examples")
{
    SUBCASE("univariate whitespace")
    {
        const auto s = parse("1\n2\n3\n", {SeriesFormat::whitespace, false});
        CHECK(s.length() == 3);
        CHECK(s.dims() == 1);
        CHECK(s.values.values() == std::vector<double>{1, 2, 3});
    }
    SUBCASE("csv with header")
    {
        const auto s = parse("x,y\n0.1,0.2\n0.3,0.4\n");
        CHECK(s.length() == 2);
        CHECK(s.dims() == 2);
        CHECK(s.variable_names == std::vector<std::string>{"x", "y"});
        CHECK(s.values(1, 0) == 0.3);
        CHECK_FALSE(s.labels.has_value());
    }
    SUBCASE("csv label column")
    {
        const auto s = parse("a,label,b\n1,0,2\n3,1,4\n");
        CHECK(s.dims() == 2);
        REQUIRE(s.labels);
        CHECK(*s.labels == std::vector<bool>{false, true});
        CHECK(s.values(1, 1) == 4.0);
    }
    SUBCASE("whitespace trailing label column")
    {
        const auto s = parse("1.5 2.5 0\n3.5 4.5 1\n", {SeriesFormat::whitespace, true});
        CHECK(s.dims() == 2);
        CHECK(*s.labels == std::vector<bool>{false, true});
    }
    SUBCASE("errors carry line numbers")
    {
        try {
            (void)parse("1 2\n3 4\n5\n", {SeriesFormat::whitespace, false});
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        try {
            (void)parse("x,y\n1,2\n3,abc\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS(load_series("/nonexistent/file.txt"), ParseError);
    }
    SUBCASE("file on disk: N equals line count")
    {
        const auto path = std::filesystem::temp_directory_path() / "raemepc_test_series.txt";
        {
            std::ofstream out(path);
            for (int i = 0; i < 17; ++i) {
                out << i * 0.5 << '\n';
            }
        }
        const auto s = load_series(path);
        CHECK(s.length() == 17);
        CHECK(s.dims() == 1);
        std::filesystem::remove(path);
    }
}

TEST_CASE("standardize examples and round trip")
{
    SUBCASE("train {0, 2} gives mean 1 std 1")
    {
        const auto train = series_from({{0.0}, {2.0}});
        const auto test = series_from({{1.0}});
        const std::vector<TimeSeries> others{test};
        const auto out = standardize(train, others);
        CHECK(out.stats.mean[0] == 1.0);
        CHECK(out.stats.stddev[0] == 1.0);
        CHECK(out.train.values.values() == std::vector<double>{-1.0, 1.0});
        CHECK(out.others[0].values[0] == 0.0);
    }
    SUBCASE("constant variable maps to zeros")
    {
        const auto out = standardize(series_from({{3.0, 1.0}, {3.0, 2.0}, {3.0, 4.0}}));
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(out.train.values(t, 0) == 0.0);
        }
    }
    SUBCASE("invert after apply is identity within 1e-12")
    {
        std::mt19937_64 rng(2);
        const auto raw = series_from(oracle::random_mat(50, 3, rng, -100, 100));
        const auto stats = Standardizer::fit(raw);
        const auto back = stats.invert(stats.apply(raw));
        for (std::size_t i = 0; i < raw.values.size(); ++i) {
            CHECK(std::abs(back.values[i] - raw.values[i]) < 1e-12);
        }
    }
}

TEST_CASE("window origins and lookahead targets")
{
    SUBCASE("N=12 T=4 stride=2")
    {
        CHECK(window_origins(12, 4, 2, false) == std::vector<std::size_t>{0, 2, 4, 6, 8});
    }
    SUBCASE("N=T gives one window")
    {
        const auto s = series_from(oracle::Mat(6, oracle::Vec{1.0}));
        CHECK(make_windows(s, SplitSpec{6, 3, 0.3}, true).size() == 1);
    }
    SUBCASE("N < T is an error")
    {
        const auto s = series_from(oracle::Mat(3, oracle::Vec{1.0}));
        CHECK_THROWS_AS(make_windows(s, SplitSpec{4, 2, 0.3}, true), InsufficientDataError);
    }
    SUBCASE("targets exist iff the lookahead slice fits")
    {
        oracle::Mat m;
        for (int t = 0; t < 20; ++t) {
            m.push_back({static_cast<double>(t)});
        }
        const auto windows = make_windows(series_from(m), SplitSpec{5, 2, 0.3}, true);
        for (const auto& w : windows) {
            const bool fits = w.origin + 2 + 5 <= 20;
            CHECK(w.prediction_target.has_value() == fits);
            CHECK(w.input(0, 0) == static_cast<double>(w.origin));
            if (w.prediction_target) {
                CHECK((*w.prediction_target)(0, 0) == static_cast<double>(w.origin + 2));
            }
        }
    }
    SUBCASE("tail-covering origins cover every step once stride <= T")
    {
        for (std::size_t n = 4; n < 40; ++n) {
            for (std::size_t t = 1; t <= std::min<std::size_t>(n, 9); ++t) {
                for (std::size_t stride = 1; stride <= t; ++stride) {
                    std::vector<int> cover(n, 0);
                    for (const auto o : window_origins(n, t, stride, true)) {
                        REQUIRE(o + t <= n);
                        for (std::size_t i = o; i < o + t; ++i) {
                            ++cover[i];
                        }
                    }
                    CHECK(std::count(cover.begin(), cover.end(), 0) == 0);
                }
            }
        }
    }
    SUBCASE("split spec validation")
    {
        CHECK_THROWS_AS((SplitSpec{4, 5, 0.3}.validate()), ConfigError);
        CHECK_THROWS_AS((SplitSpec{4, 0, 0.3}.validate()), ConfigError);
        CHECK_THROWS_AS((SplitSpec{4, 2, 1.0}.validate()), ConfigError);
        CHECK_THROWS_AS((SplitSpec{4, 2, 0.0}.validate()), ConfigError);
    }
}

TEST_CASE("chronological train/validation split")
{
    oracle::Mat m;
    for (int t = 0; t < 64; ++t) {
        m.push_back({static_cast<double>(t)});
    }
    const auto windows = make_windows(series_from(m), SplitSpec{4, 2, 0.3}, true);
    const auto split = split_train_validation(windows, 0.3);
    CHECK(split.train.size() + split.validation.size() == windows.size());
    CHECK(split.validation.size() == static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(windows.size()))));
    CHECK(split.train.back().origin < split.validation.front().origin);
}

TEST_CASE("downsampling")
{
    SUBCASE("T=12 L=3 picks 1-based rows 1, 7, 12")
    {
        CHECK(downsample_indices(12, 3) == std::vector<std::size_t>{0, 6, 11});
    }
    SUBCASE("identity at L=T, endpoints at L=2, first row at L=1")
    {
        for (std::size_t t = 2; t < 40; ++t) {
            std::vector<std::size_t> id(t);
            std::iota(id.begin(), id.end(), 0);
            CHECK(downsample_indices(t, t) == id);
            CHECK(downsample_indices(t, 2) == std::vector<std::size_t>{0, t - 1});
            CHECK(downsample_indices(t, 1) == std::vector<std::size_t>{0});
        }
    }
    SUBCASE("matches the rounding formula, endpoints kept, nondecreasing")
    {
        for (std::size_t t = 2; t <= 600; t += 7) {
            for (std::size_t l = 2; l <= t; l += 3) {
                const auto idx = downsample_indices(t, l);
                REQUIRE(idx.size() == l);
                CHECK(idx.front() == 0);
                CHECK(idx.back() == t - 1);
                for (std::size_t j = 0; j < l; ++j) {
                    CHECK(idx[j] == oracle::downsample_index(t, l, j));
                    if (j > 0) {
                        CHECK(idx[j] >= idx[j - 1]);
                    }
                }
            }
        }
    }
    SUBCASE("rows are copied")
    {
        std::mt19937_64 rng(4);
        const auto x = oracle::random_tensor({12, 2}, rng);
        CHECK(downsample(x, 12) == x);
        const auto y = downsample(x, 3);
        CHECK(y(1, 0) == x(6, 0));
        CHECK(y(2, 1) == x(11, 1));
        CHECK_THROWS_AS(downsample(x, 13), ArgumentError);
    }
}
