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

#include "raemepc/errors.hpp"
#include "raemepc/model.hpp"
#include "raemepc/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace raemepc;
using namespace raemepc::model;

namespace {

auto config(std::size_t d, std::size_t t, std::size_t k, std::size_t tau, std::size_t h,
            double beta = 0.3, std::uint64_t seed = 1) -> ModelConfig
{
    ModelConfig c;
    c.dims = d;
    c.window_length = t;
    c.encoder_levels = k;
    c.decoder_levels = k;
    c.tau = tau;
    c.hidden_dim = h;
    c.beta = beta;
    c.seed = seed;
    return c;
}

void check_close(const Tensor& got, const oracle::Mat& want, double tol)
{
    REQUIRE(got.rows() == want.size());
    for (std::size_t r = 0; r < want.size(); ++r) {
        REQUIRE(got.cols() == want[r].size());
        for (std::size_t c = 0; c < want[r].size(); ++c) {
            CHECK(std::abs(got(r, c) - want[r][c]) <= tol);
        }
    }
}

auto sig(double z) -> double { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

TEST_CASE("resolution_lengths examples")
{
    CHECK(resolution_lengths(12, 2, 3) == std::vector<std::size_t>{12, 6, 3});
    CHECK(resolution_lengths(512, 4, 3) == std::vector<std::size_t>{512, 128, 32});
    CHECK(resolution_lengths(64, 4, 3) == std::vector<std::size_t>{64, 16, 4});
    CHECK(resolution_lengths(9, 3, 1) == std::vector<std::size_t>{9});
    CHECK_THROWS_AS(resolution_lengths(6, 4, 3), ConfigError);
    for (std::size_t t = 2; t <= 200; ++t) {
        for (std::size_t tau = 2; tau <= 4; ++tau) {
            for (std::size_t k = 1; k <= 3; ++k) {
                const auto want = oracle::resolution_lengths(t, tau, k);
                const bool valid = want.back() >= 2
                                   && std::adjacent_find(want.begin(), want.end(), std::less_equal<>()) == want.end();
                if (valid) {
                    CHECK(resolution_lengths(t, tau, k) == want);
                } else {
                    CHECK_THROWS_AS(resolution_lengths(t, tau, k), ConfigError);
                }
            }
        }
    }
}

TEST_CASE("config validation")
{
    auto c = config(2, 12, 3, 2, 4);
    CHECK_NOTHROW(c.validate());
    c.decoder_levels = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config(2, 12, 3, 1, 4);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config(2, 12, 3, 2, 4, 1.5);
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward matches the reference implementation")
{
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> pick(0, 1000);
    int checked = 0;
    while (checked < 60) {
        const auto k = 1 + pick(rng) % 3;
        const auto tau = 2 + pick(rng) % 3;
        const auto t = 2 + pick(rng) % 40;
        auto c = config(1 + pick(rng) % 4, t, k, tau, 1 + pick(rng) % 6,
                        static_cast<double>(pick(rng)) / 1000.0, pick(rng));
        try {
            c.validate();
        } catch (const ConfigError&) {
            continue;
        }
        ++checked;
        const auto params = ModelParams::init(c);
        const auto x = oracle::random_mat(t, c.dims, rng, -2, 2);
        const auto got = forward(params, c, oracle::to_tensor(x));
        const auto want = oracle::forward(params, c, x);
        CHECK(got.encoded.size() == c.hidden_dim);
        for (std::size_t j = 0; j < c.hidden_dim; ++j) {
            CHECK(std::abs(got.encoded[j] - want.encoded[j]) < 1e-12);
        }
        REQUIRE(got.recon_per_resolution.size() == k);
        for (std::size_t level = 0; level < k; ++level) {
            check_close(got.recon_per_resolution[level], want.emitted[level], 1e-12);
        }
        check_close(got.recon_final, want.recon, 1e-12);
        check_close(got.prediction, want.prediction, 1e-12);
    }
}

TEST_CASE("hand trace: hidden 1, d 1, T 2")
{
    const auto cfg = config(1, 2, 1, 2, 1, 0.5);
    auto p = ModelParams::zeros(cfg);
    const double wi[4] = {0.4, -0.2, 0.9, 0.3};
    const double wh[4] = {-0.5, 0.6, 0.1, 0.2};
    const double b[4] = {0.05, 1.0, -0.1, 0.0};
    for (std::size_t g = 0; g < 4; ++g) {
        p.encoder_cells[0].w_input(g, 0) = wi[g];
        p.encoder_cells[0].w_recurrent(g, 0) = wh[g];
        p.encoder_cells[0].bias[g] = b[g];
        p.decoder_cells[0].w_input(g, 0) = -wi[g];
        p.decoder_cells[0].w_recurrent(g, 0) = wh[3 - g];
        p.decoder_cells[0].bias[g] = b[g];
        p.predictor_cell.w_input(g, 0) = wh[g];
        p.predictor_cell.w_recurrent(g, 0) = wi[g];
        p.predictor_cell.bias[g] = -b[g];
    }
    p.encoder_aggregators[0].weight(0, 0) = 1.5;
    p.encoder_aggregators[0].bias[0] = -0.2;
    p.decoder_heads[0].weight(0, 0) = 2.0;
    p.decoder_heads[0].bias[0] = 0.1;
    p.predictor_head.weight(0, 0) = -1.0;
    p.predictor_head.bias[0] = 0.3;

    const double x1 = 0.8;
    const double x2 = -0.6;
    const auto step = [](const double* w_in, const double* w_rec, const double* bias, double x, double h,
                         double cprev, double& c_out) {
        const double i = sig(w_in[0] * x + w_rec[0] * h + bias[0]);
        const double f = sig(w_in[1] * x + w_rec[1] * h + bias[1]);
        const double g = std::tanh(w_in[2] * x + w_rec[2] * h + bias[2]);
        const double o = sig(w_in[3] * x + w_rec[3] * h + bias[3]);
        c_out = f * cprev + i * g;
        return o * std::tanh(c_out);
    };
    // encoder over (x1, x2)
    double c = 0.0;
    double h = step(wi, wh, b, x1, 0.0, 0.0, c);
    h = step(wi, wh, b, x2, h, c, c);
    const double he = 1.5 * h - 0.2;
    // decoder: first output from h^(E), then one step fed with it
    const double y2 = 2.0 * he + 0.1;
    const double dwi[4] = {-wi[0], -wi[1], -wi[2], -wi[3]};
    const double dwh[4] = {wh[3], wh[2], wh[1], wh[0]};
    double cd = 0.0;
    const double h1 = step(dwi, dwh, b, y2, he, 0.0, cd);
    const double y1 = 2.0 * h1 + 0.1;
    // predictor fed with x1, x2
    const double nb[4] = {-b[0], -b[1], -b[2], -b[3]};
    double cp = 0.0;
    const double p1 = step(wh, wi, nb, x1, he, 0.0, cp);
    const double p2 = step(wh, wi, nb, x2, p1, cp, cp);

    const auto out = forward(p, cfg, Tensor::matrix(2, 1, {x1, x2}));
    CHECK(out.encoded[0] == doctest::Approx(he).epsilon(1e-13));
    CHECK(out.recon_per_resolution[0](0, 0) == doctest::Approx(y2).epsilon(1e-13));
    CHECK(out.recon_per_resolution[0](1, 0) == doctest::Approx(y1).epsilon(1e-13));
    CHECK(out.recon_final(0, 0) == doctest::Approx(y1).epsilon(1e-13));
    CHECK(out.recon_final(1, 0) == doctest::Approx(y2).epsilon(1e-13));
    CHECK(out.prediction(0, 0) == doctest::Approx(-p1 + 0.3).epsilon(1e-13));
    CHECK(out.prediction(1, 0) == doctest::Approx(-p2 + 0.3).epsilon(1e-13));
}

TEST_CASE("zero-weight cases")
{
    const auto c = config(2, 12, 3, 2, 3);
    auto p = ModelParams::zeros(c);
    // Zero recurrent cells emit h = 0, so the aggregation chain reduces to
    // h = W0 (W1 (b2) + b1) + b0 with scalar-diagonal weights.
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < 3; ++j) {
            p.encoder_aggregators[k].weight(j, j) = 0.5 * static_cast<double>(k + 1);
            p.encoder_aggregators[k].bias[j] = static_cast<double>(k) - 0.5 * static_cast<double>(j);
        }
    }
    p.predictor_head.bias = Tensor::vector({0.7, -0.4});
    std::mt19937_64 rng(1);
    const auto x = oracle::random_tensor({12, 2}, rng);
    const auto out = forward(p, c, x);
    for (std::size_t j = 0; j < 3; ++j) {
        const double b2 = 2.0 - 0.5 * static_cast<double>(j);
        const double b1 = 1.0 - 0.5 * static_cast<double>(j);
        const double b0 = -0.5 * static_cast<double>(j);
        const double want = 0.5 * (1.0 * b2 + b1) + b0;
        CHECK(out.encoded[j] == doctest::Approx(want).epsilon(1e-14));
    }
    for (std::size_t t = 0; t < 12; ++t) {
        CHECK(out.prediction(t, 0) == 0.7);
        CHECK(out.prediction(t, 1) == -0.4);
    }
}

TEST_CASE("fusion convexity: beta 1 ignores coarser levels")
{
    std::mt19937_64 rng(8);
    const auto x = oracle::random_tensor({16, 2}, rng);
    auto c = config(2, 16, 3, 2, 4, 1.0, 5);
    auto p = ModelParams::init(c);
    const auto base = forward(p, c, x);
    // Perturbing coarse decoders and fusion layers must not move level 0.
    for (auto* t : {&p.decoder_cells[1].w_input, &p.decoder_cells[2].bias, &p.decoder_fusions[0].weight}) {
        for (auto& v : t->data()) {
            v += 0.37;
        }
    }
    const auto moved = forward(p, c, x);
    CHECK(moved.recon_final == base.recon_final);
    CHECK_FALSE(moved.recon_per_resolution[1] == base.recon_per_resolution[1]);

    SUBCASE("beta 0 uses only the fusion output")
    {
        auto c0 = config(2, 16, 2, 2, 4, 0.0, 5);
        const auto p0 = ModelParams::init(c0);
        const auto got = forward(p0, c0, x);
        const auto want = oracle::forward(p0, c0, oracle::to_mat(x));
        check_close(got.recon_final, want.recon, 1e-12);
    }
}

TEST_CASE("K=1 is plain reverse-order decoding")
{
    std::mt19937_64 rng(2);
    const auto c = config(3, 10, 1, 2, 5);
    const auto p = ModelParams::init(c);
    CHECK(p.decoder_fusions.empty());
    const auto x = oracle::random_tensor({10, 3}, rng);
    const auto out = forward(p, c, x);
    REQUIRE(out.recon_per_resolution.size() == 1);
    for (std::size_t t = 0; t < 10; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(out.recon_final(t, j) == out.recon_per_resolution[0](9 - t, j));
        }
    }
}

TEST_CASE("shape contract over the hyperparameter grid")
{
    std::mt19937_64 rng(6);
    for (const std::size_t h : {16, 32, 64}) {
        for (const std::size_t tau : {2, 3, 4}) {
            for (const double beta : {0.1, 0.3}) {
                const auto c = config(2, 64, 3, tau, h, beta);
                const auto p = ModelParams::init(c);
                const auto out = forward(p, c, oracle::random_tensor({64, 2}, rng));
                CHECK(out.recon_final.shape() == std::vector<std::size_t>{64, 2});
                CHECK(out.prediction.shape() == std::vector<std::size_t>{64, 2});
                const auto lens = resolution_lengths(64, tau, 3);
                for (std::size_t k = 0; k < 3; ++k) {
                    CHECK(out.recon_per_resolution[k].rows() == lens[k]);
                }
            }
        }
    }
}

TEST_CASE("determinism and noise")
{
    std::mt19937_64 rng(3);
    const auto c = config(2, 12, 3, 2, 4);
    const auto p = ModelParams::init(c);
    CHECK(p == ModelParams::init(c));
    const auto x = oracle::random_tensor({12, 2}, rng);
    const auto a = forward(p, c, x);
    const auto b = forward(p, c, x);
    CHECK(a.recon_final == b.recon_final);
    CHECK(a.prediction == b.prediction);
    CHECK(a.encoded == b.encoded);

    Rng r1(99);
    Rng r2(99);
    const auto n1 = forward(p, c, x, NoiseSource{&r1, 0.1});
    const auto n2 = forward(p, c, x, NoiseSource{&r2, 0.1});
    CHECK(n1.recon_final == n2.recon_final);
    CHECK_FALSE(n1.recon_final == a.recon_final);
    CHECK(n1.prediction == a.prediction);

    auto other = c;
    other.seed = 2;
    CHECK_FALSE(ModelParams::init(other) == p);
}

TEST_CASE("shape errors")
{
    const auto c = config(2, 12, 3, 2, 4);
    const auto p = ModelParams::init(c);
    CHECK_THROWS_AS(forward(p, c, Tensor({12, 3})), DimensionError);
    CHECK_THROWS_AS(forward(p, c, Tensor({11, 2})), DimensionError);
}

TEST_CASE("every parameter group receives gradient")
{
    std::mt19937_64 rng(12);
    const auto c = config(2, 12, 3, 2, 4);
    const auto p = ModelParams::init(c);
    auto g = ModelParams::zeros(c);
    data::WindowSample w{oracle::random_tensor({12, 2}, rng), oracle::random_tensor({12, 2}, rng), 0};
    const std::vector<data::WindowSample> batch{w};
    Rng noise_rng(1);
    (void)train::batch_loss(p, &g, c, batch, loss::LossWeights{}, NoiseSource{&noise_rng, 0.1});
    std::map<std::string, double> group_norm;
    g.for_each([&](const std::string& name, const Tensor& t) {
        const auto group = name.substr(0, name.rfind('.'));
        for (const double v : t.values()) {
            group_norm[group] += v * v;
        }
    });
    CHECK(group_norm.size() == 3 * 2 + 3 * 2 + 2 + 2);
    for (const auto& [name, norm] : group_norm) {
        INFO(name);
        CHECK(norm > 0.0);
    }
}
