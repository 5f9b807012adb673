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

#include "raemepc/config.hpp"
#include "raemepc/errors.hpp"
#include "raemepc/pipeline.hpp"
#include "raemepc/synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace raemepc;
using namespace raemepc::pipeline;

TEST_CASE("config parsing")
{
    SUBCASE("defaults")
    {
        const auto c = parse_config("");
        CHECK(c.split.window_length == 64);
        CHECK(c.split.stride == 32);
        CHECK(c.split.validation_fraction == 0.3);
        CHECK(c.train.epochs == 200);
        CHECK(c.train.batch_size == 32);
        CHECK(c.train.learning_rate == 1e-3);
        CHECK(c.train.patience == 20);
        CHECK(c.train.clip_norm == 5.0);
        CHECK(c.train.weights.lambda_pred == 1.0);
        CHECK(c.model.noise_scale == 0.1);
        CHECK(c.grid.size() == 36);
        CHECK_FALSE(c.threshold.has_value());
        CHECK(c.detection_stride() == 32);
    }
    SUBCASE("presets")
    {
        const auto pd = parse_config("preset = power-demand\n");
        CHECK(pd.split.window_length == 512);
        CHECK(pd.split.stride == 256);
        const auto gesture = parse_config("preset = 2d-gesture\nstride = 16\n");
        CHECK(gesture.split.window_length == 64);
        CHECK(gesture.split.stride == 16);
        CHECK_THROWS_AS(parse_config("preset = nope\n"), ConfigError);
    }
    SUBCASE("values, comments, lists, paths")
    {
        const auto c = parse_config("# comment\n"
                                    "train_path = data/train.csv  # trailing\n"
                                    "hidden_dim = 16\n"
                                    "beta = 0.3\n"
                                    "grid_tau = 2, 4\n"
                                    "seed = 9\n"
                                    "threshold = 2.5\n",
                                    "/base");
        CHECK(c.train_path == std::filesystem::path("/base/data/train.csv"));
        CHECK(c.model.hidden_dim == 16);
        CHECK(c.model.beta == 0.3);
        CHECK(c.grid.taus == std::vector<std::size_t>{2, 4});
        CHECK(c.train.seed == 9);
        CHECK(c.model.seed == 9);
        CHECK(*c.threshold == 2.5);
    }
    SUBCASE("schema errors")
    {
        CHECK_THROWS_AS(parse_config("hiden_dim = 3\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("hidden_dim = three\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("hidden_dim = -3\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("beta = 0.1\nbeta = 0.2\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("stride = 100\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("tau = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("window_length = 8\ntau = 4\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("grid_beta = \n"), ConfigError);
    }
    SUBCASE("environment overrides file values")
    {
        const Environment env{{"RAEMEPC_HIDDEN_DIM", "8"}, {"RAEMEPC_PRESET", "power-demand"}};
        const auto c = parse_config("hidden_dim = 16\n", {}, env);
        CHECK(c.model.hidden_dim == 8);
        CHECK(c.split.window_length == 512);
    }
    SUBCASE("effective config reproduces the configuration")
    {
        const auto c = parse_config("preset = 2d-gesture\nhidden_dim = 16\ngrid_beta = 0.1\nthreshold = 1.5\n"
                                    "train_path = /x/train.csv\n");
        const auto text = effective_config(c);
        const auto again = parse_config(text);
        CHECK(effective_config(again) == text);
        CHECK(text.find("learning_rate = 0.001") != std::string::npos);
        CHECK(text.find("clip_norm = 5") != std::string::npos);
    }
}

TEST_CASE("synthetic data")
{
    synthetic::Spec spec;
    spec.seed = 3;
    const auto a = synthetic::generate(spec);
    const auto b = synthetic::generate(spec);
    CHECK(a.train.values == b.train.values);
    CHECK(a.test.values == b.test.values);
    CHECK(a.train.length() == 4096);
    CHECK(a.train.dims() == 2);
    CHECK(std::count(a.train.labels->begin(), a.train.labels->end(), true) == 0);
    const auto positives = std::count(a.test.labels->begin(), a.test.labels->end(), true);
    CHECK(positives == std::llround(0.05 * 2048));

    std::ostringstream out;
    synthetic::write_csv(a.test, out);
    std::istringstream in(out.str());
    const auto parsed = data::parse_series(in, {});
    CHECK(parsed.values == a.test.values);
    CHECK(*parsed.labels == *a.test.labels);
}

TEST_CASE("pipeline: train, checkpoint, score")
{
    synthetic::Spec spec;
    spec.train_length = 600;
    spec.test_length = 300;
    spec.seed = 4;
    const auto ds = synthetic::generate(spec);
    auto cfg = parse_config("window_length = 16\nstride = 8\nhidden_dim = 4\nepochs = 2\ntau = 2\n");
    const auto prepared = prepare(cfg, ds.train, ds.test);
    CHECK(prepared.dims() == 2);
    CHECK_FALSE(prepared.windows.validation.empty());
    const auto outcome = train_detector(cfg, prepared);
    CHECK(outcome.result.log.epochs.size() == 2);

    const auto restored = from_checkpoint(train::deserialize_checkpoint(
      train::serialize_checkpoint(to_checkpoint(outcome.detector))));
    const auto s1 = score(outcome.detector, ds.test, 8);
    const auto s2 = score(restored, ds.test, 8);
    CHECK(s1.scores == s2.scores);
    const auto report = test_metrics(outcome.detector, prepared, 8);
    CHECK(report.steps == 300);

    data::TimeSeries wrong;
    wrong.values = Tensor({40, 3});
    CHECK_THROWS_AS(score(outcome.detector, wrong, 8), DimensionError);

    train::Checkpoint bare = to_checkpoint(outcome.detector);
    bare.extras.clear();
    CHECK_THROWS_AS(from_checkpoint(bare), IntegrityError);
}
