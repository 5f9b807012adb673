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

// raemepc: train, detect, evaluate, grid, synthesize.
// Exit codes: 0 success, 2 usage/config/data errors, 3 numerical failure.

#include "raemepc/config.hpp"
#include "raemepc/errors.hpp"
#include "raemepc/pipeline.hpp"
#include "raemepc/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace raemepc;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_numerical = 3;

auto open_out(const fs::path& path) -> std::ofstream
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    auto out = open_out(path);
    out << text;
}

void require_file(const fs::path& path, const std::string& what)
{
    if (!fs::is_regular_file(path)) {
        throw ConfigError(what + " '" + path.string() + "' does not exist");
    }
}

void prepare_out_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw ConfigError("output directory '" + dir.string() + "' is not writable");
    }
}

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

auto resolve_config(const CommonOptions& opts) -> pipeline::RunConfig
{
    require_file(opts.config_path, "config");
    auto cfg = pipeline::load_config(opts.config_path, pipeline::process_environment());
    if (opts.seed) {
        cfg.train.seed = *opts.seed;
        cfg.model.seed = *opts.seed;
    }
    if (opts.out) {
        cfg.out_dir = *opts.out;
    }
    require_file(cfg.train_path, "train_path");
    if (!cfg.test_path.empty()) {
        require_file(cfg.test_path, "test_path");
    }
    if (!cfg.test_labels_path.empty()) {
        require_file(cfg.test_labels_path, "test_labels_path");
    }
    prepare_out_dir(cfg.out_dir);
    return cfg;
}

// Artifacts shared by `train` and a grid's best point.
void write_model_artifacts(const fs::path& dir,
                           const pipeline::RunConfig& cfg,
                           const pipeline::Detector& detector,
                           const train::TrainResult& result)
{
    train::save_checkpoint(pipeline::to_checkpoint(detector), dir / "checkpoint.bin");
    {
        auto out = open_out(dir / "train_log.csv");
        result.log.write_csv(out);
    }
    write_text(dir / "gaussian.json", detect::to_json_string(detector.gaussian) + "\n");
    write_text(dir / "effective_config.txt", pipeline::effective_config(cfg));
}

void write_metadata(const fs::path& dir,
                    const std::string& command,
                    double seconds,
                    const train::TrainResult* result)
{
    nlohmann::ordered_json meta;
    meta["command"] = command;
    meta["wall_seconds"] = seconds;
    meta["finished_at_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count();
    if (result != nullptr) {
        meta["best_epoch"] = result->best_epoch;
        meta["best_validation_total"] = result->best_validation;
        meta["epochs_run"] = result->log.epochs.size();
        std::vector<double> epoch_seconds;
        for (const auto& e : result->log.epochs) {
            epoch_seconds.push_back(e.seconds);
        }
        meta["epoch_seconds"] = epoch_seconds;
    }
    write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

auto seconds_since(std::chrono::steady_clock::time_point start) -> double
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

auto run_train(const CommonOptions& opts, bool quiet) -> int
{
    const auto start = std::chrono::steady_clock::now();
    const auto cfg = resolve_config(opts);
    const auto data = pipeline::prepare(cfg);
    const auto outcome = pipeline::train_detector(cfg, data, [quiet](const train::EpochRecord& e) {
        if (!quiet) {
            std::cerr << "epoch " << e.epoch << " train " << e.train.total << " val "
                      << e.validation_total << '\n';
        }
    });
    write_model_artifacts(cfg.out_dir, cfg, outcome.detector, outcome.result);
    write_metadata(cfg.out_dir, "train", seconds_since(start), &outcome.result);
    std::cout << "best epoch " << outcome.result.best_epoch << ", validation loss "
              << outcome.result.best_validation << '\n';
    return 0;
}

struct DetectOptions {
    std::string checkpoint;
    std::string test;
    std::string labels;
    std::string format = "auto";
    bool label_column = false;
    std::optional<double> threshold;
    std::optional<std::size_t> stride;
    std::string out = ".";
};

auto run_detect(const DetectOptions& opts) -> int
{
    require_file(opts.checkpoint, "checkpoint");
    require_file(opts.test, "test series");
    prepare_out_dir(opts.out);
    const auto detector = pipeline::from_checkpoint(train::load_checkpoint(opts.checkpoint));
    const data::LoadOptions load{data::parse_format(opts.format), opts.label_column};
    auto test = data::load_series(opts.test, load);
    if (!opts.labels.empty()) {
        require_file(opts.labels, "labels");
        test.labels = data::load_labels(opts.labels);
    }
    if (test.labels && test.labels->size() != test.length()) {
        throw DimensionError("labels do not align with the test series");
    }
    if (opts.threshold && !(*opts.threshold >= 0.0)) {
        throw ArgumentError("threshold must be nonnegative");
    }
    // Default stride: half a window, matching the training split.
    const auto stride = opts.stride.value_or(std::max<std::size_t>(1, detector.config.window_length / 2));
    const auto series = pipeline::score(detector, test, stride, opts.threshold);
    auto out = open_out(fs::path(opts.out) / "scores.csv");
    detect::write_scores_csv(out, series, test.labels);
    return 0;
}

struct EvaluateOptions {
    std::string scores;
    std::string labels;
    std::string out = ".";
};

auto run_evaluate(const EvaluateOptions& opts) -> int
{
    require_file(opts.scores, "scores");
    prepare_out_dir(opts.out);
    std::ifstream in(opts.scores);
    auto file = detect::read_scores_csv(in);
    std::vector<bool> labels;
    if (!opts.labels.empty()) {
        require_file(opts.labels, "labels");
        labels = data::load_labels(opts.labels);
    } else if (file.true_labels) {
        labels = *file.true_labels;
    } else {
        throw ArgumentError("no labels: pass --labels or a scores file with a true_label column");
    }
    if (labels.size() != file.scores.size()) {
        throw DimensionError(std::to_string(labels.size()) + " labels for "
                             + std::to_string(file.scores.size()) + " scores");
    }
    const auto report = eval::evaluate(eval::LabeledScores{std::move(file.scores), std::move(labels)});
    write_text(fs::path(opts.out) / "metrics.json", eval::to_json_string(report) + "\n");
    write_text(fs::path(opts.out) / "metrics.csv", eval::csv_header() + "\n" + eval::csv_row(report) + "\n");
    std::cout << "auroc " << report.auroc << " auprc " << report.auprc << " best_f1 " << report.f1.f1
              << '\n';
    return 0;
}

auto grid_header(const std::vector<std::string>& extra) -> std::string
{
    std::string h = "index,hidden_dim,tau,beta,lambda_shape,ok,validation_total,best_epoch,epochs_run";
    for (const auto& e : extra) {
        h += "," + e;
    }
    return h + ",error";
}

auto grid_line(const train::GridRow& r, const std::vector<std::string>& extra) -> std::string
{
    std::ostringstream s;
    s.precision(17);
    s << r.point.index << ',' << r.point.hidden_dim << ',' << r.point.tau << ',' << r.point.beta << ','
      << r.point.lambda_shape << ',' << (r.ok ? 1 : 0) << ',';
    if (r.ok) {
        s << r.validation_total;
    }
    s << ',' << r.best_epoch << ',' << r.epochs_run;
    for (const auto& name : extra) {
        s << ',';
        for (const auto& [k, v] : r.extra) {
            if (k == name) {
                s << v;
            }
        }
    }
    std::string err = r.error;
    for (auto& ch : err) {
        if (ch == ',' || ch == '\n') {
            ch = ';';
        }
    }
    s << ',' << err;
    return s.str();
}

auto run_grid(const CommonOptions& opts, std::size_t jobs) -> int
{
    const auto start = std::chrono::steady_clock::now();
    auto cfg = resolve_config(opts);
    const auto data = pipeline::prepare(cfg);
    const auto base = pipeline::model_config(cfg, data.dims());
    auto hooks = pipeline::grid_hooks(cfg, data);
    std::vector<std::string> extra;
    if (hooks.evaluate) {
        extra = {"test_auroc", "test_auprc", "test_best_f1"};
    }

    // Completed rows reach disk immediately so an interrupted grid keeps them.
    const auto progress_path = cfg.out_dir / "grid_progress.csv";
    auto progress = open_out(progress_path);
    progress << grid_header(extra) << '\n' << std::flush;
    std::mutex progress_mutex;
    hooks.on_row = [&](const train::GridRow& row) {
        const std::lock_guard lock(progress_mutex);
        progress << grid_line(row, extra) << '\n' << std::flush;
        std::cerr << "grid point " << row.point.index << (row.ok ? " done" : " failed") << '\n';
    };

    const auto outcome = train::grid_search(base, cfg.train, cfg.grid, data.windows, jobs, hooks);
    progress.close();

    {
        auto out = open_out(cfg.out_dir / "grid_results.csv");
        out << grid_header(extra) << '\n';
        for (const auto& row : outcome.rows) {
            out << grid_line(row, extra) << '\n';
        }
    }
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : outcome.rows) {
        nlohmann::ordered_json j;
        j["index"] = r.point.index;
        j["hidden_dim"] = r.point.hidden_dim;
        j["tau"] = r.point.tau;
        j["beta"] = r.point.beta;
        j["lambda_shape"] = r.point.lambda_shape;
        j["ok"] = r.ok;
        j["validation_total"] = r.ok ? nlohmann::ordered_json(r.validation_total) : nlohmann::ordered_json();
        j["best_epoch"] = r.best_epoch;
        j["epochs_run"] = r.epochs_run;
        for (const auto& [k, v] : r.extra) {
            j[k] = v;
        }
        if (!r.ok) {
            j["error"] = r.error;
        }
        rows.push_back(j);
    }
    write_text(cfg.out_dir / "grid_results.json", rows.dump(2) + "\n");

    if (!outcome.best || !outcome.best_result) {
        std::cerr << "error: every grid point failed\n";
        return exit_numerical;
    }
    const auto& best = outcome.rows[*outcome.best];
    auto best_cfg = cfg;
    best_cfg.model.hidden_dim = best.point.hidden_dim;
    best_cfg.model.tau = best.point.tau;
    best_cfg.model.beta = best.point.beta;
    best_cfg.train.weights.lambda_shape = best.point.lambda_shape;
    const auto detector = pipeline::fit_detector(outcome.best_config, outcome.best_result->params,
                                                 data.stats, data.windows.validation);
    write_model_artifacts(cfg.out_dir, best_cfg, detector, *outcome.best_result);
    write_metadata(cfg.out_dir, "grid", seconds_since(start), &*outcome.best_result);
    std::cout << "best grid point " << best.point.index << " (hidden " << best.point.hidden_dim
              << ", tau " << best.point.tau << ", beta " << best.point.beta << ", lambda_shape "
              << best.point.lambda_shape << "), validation loss " << best.validation_total << '\n';
    return 0;
}

struct SynthOptions {
    synthetic::Spec spec;
    std::string out = "synthetic";
};

auto run_synthesize(const SynthOptions& opts) -> int
{
    prepare_out_dir(opts.out);
    synthetic::write_dataset(synthetic::generate(opts.spec), opts.out);
    return 0;
}

} // namespace

auto main(int argc, char** argv) -> int
{
    CLI::App app{"RAE-MEPC multivariate time-series anomaly detector"};
    app.require_subcommand(1);

    CommonOptions train_opts;
    bool quiet = false;
    auto* train_cmd = app.add_subcommand("train", "train a model and fit the residual detector");
    train_cmd->add_option("--config", train_opts.config_path, "run config file")->required();
    train_cmd->add_option("--seed", train_opts.seed, "override the config seed");
    train_cmd->add_option("--out", train_opts.out, "output directory");
    train_cmd->add_flag("--quiet", quiet, "suppress per-epoch progress");

    DetectOptions detect_opts;
    auto* detect_cmd = app.add_subcommand("detect", "score a test series with a checkpoint");
    detect_cmd->add_option("--checkpoint", detect_opts.checkpoint)->required();
    detect_cmd->add_option("--test", detect_opts.test, "test series file")->required();
    detect_cmd->add_option("--labels", detect_opts.labels, "ground-truth labels, one per line");
    detect_cmd->add_option("--format", detect_opts.format, "auto, csv or whitespace");
    detect_cmd->add_flag("--label-column", detect_opts.label_column,
                         "whitespace format: last column is the label");
    detect_cmd->add_option("--threshold", detect_opts.threshold, "flag steps with score > threshold");
    detect_cmd->add_option("--stride", detect_opts.stride, "window stride (default T/2)");
    detect_cmd->add_option("--out", detect_opts.out, "output directory");

    EvaluateOptions eval_opts;
    auto* eval_cmd = app.add_subcommand("evaluate", "AUROC, AUPRC and best F1 of a scores file");
    eval_cmd->add_option("--scores", eval_opts.scores)->required();
    eval_cmd->add_option("--labels", eval_opts.labels, "labels file (default: true_label column)");
    eval_cmd->add_option("--out", eval_opts.out, "output directory");

    CommonOptions grid_opts;
    std::size_t jobs = 1;
    auto* grid_cmd = app.add_subcommand("grid", "hyperparameter grid search");
    grid_cmd->add_option("--config", grid_opts.config_path, "run config file")->required();
    grid_cmd->add_option("--seed", grid_opts.seed, "override the config seed");
    grid_cmd->add_option("--out", grid_opts.out, "output directory");
    grid_cmd->add_option("--jobs", jobs, "parallel grid points")->check(CLI::PositiveNumber);

    SynthOptions synth_opts;
    auto* synth_cmd = app.add_subcommand("synthesize", "generate the synthetic sine dataset");
    synth_cmd->add_option("--out", synth_opts.out, "output directory");
    synth_cmd->add_option("--seed", synth_opts.spec.seed);
    synth_cmd->add_option("--dims", synth_opts.spec.dims);
    synth_cmd->add_option("--train-length", synth_opts.spec.train_length);
    synth_cmd->add_option("--test-length", synth_opts.spec.test_length);
    synth_cmd->add_option("--anomaly-fraction", synth_opts.spec.anomaly_fraction);
    synth_cmd->add_option("--noise", synth_opts.spec.noise);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*train_cmd) {
            return run_train(train_opts, quiet);
        }
        if (*detect_cmd) {
            return run_detect(detect_opts);
        }
        if (*eval_cmd) {
            return run_evaluate(eval_opts);
        }
        if (*grid_cmd) {
            return run_grid(grid_opts, jobs);
        }
        if (*synth_cmd) {
            return run_synthesize(synth_opts);
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
