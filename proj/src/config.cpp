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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

extern char** environ; // NOLINT

namespace raemepc::pipeline {

namespace {

auto trim(std::string s) -> std::string
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

auto to_size(const std::string& key, const std::string& v) -> std::size_t
{
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    }
    return out;
}

auto to_double(const std::string& key, const std::string& v) -> double
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

auto to_bool(const std::string& key, const std::string& v) -> bool
{
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

template <typename T, typename Fn>
auto to_list(const std::string& key, const std::string& v, Fn&& convert) -> std::vector<T>
{
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(convert(key, trim(item)));
    }
    if (out.empty()) {
        throw ConfigError(key + ": expected a comma-separated list");
    }
    return out;
}

template <typename T>
auto join(const std::vector<T>& v) -> std::string
{
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) {
        out << (i ? ", " : "") << v[i];
    }
    return out.str();
}

auto num(double v) -> std::string
{
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

struct Context {
    RunConfig& cfg;
    std::filesystem::path base;

    [[nodiscard]] auto path(const std::string& v) const -> std::filesystem::path
    {
        if (v.empty()) {
            return {};
        }
        std::filesystem::path p(v);
        return (p.is_relative() && !base.empty()) ? base / p : p;
    }
};

struct Field {
    const char* key;
    std::function<void(Context&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

auto format_name(data::SeriesFormat f) -> std::string
{
    switch (f) {
    case data::SeriesFormat::whitespace:
        return "whitespace";
    case data::SeriesFormat::csv:
        return "csv";
    default:
        return "auto";
    }
}

void apply_preset(RunConfig& cfg, const std::string& name)
{
    if (name.empty() || name == "none") {
        cfg.preset.clear();
        return;
    }
    if (name == "power-demand") {
        cfg.split.window_length = 512;
        cfg.split.stride = 256;
    } else if (name == "2d-gesture" || name == "synthetic") {
        cfg.split.window_length = 64;
        cfg.split.stride = 32;
    } else {
        throw ConfigError("preset: unknown preset '" + name + "'");
    }
    cfg.preset = name;
}

auto schema() -> const std::vector<Field>&
{
    static const std::vector<Field> fields = {
      {"train_path",
       [](Context& c, const std::string& v) { c.cfg.train_path = c.path(v); },
       [](const RunConfig& c) { return c.train_path.string(); }},
      {"test_path",
       [](Context& c, const std::string& v) { c.cfg.test_path = c.path(v); },
       [](const RunConfig& c) { return c.test_path.string(); }},
      {"test_labels_path",
       [](Context& c, const std::string& v) { c.cfg.test_labels_path = c.path(v); },
       [](const RunConfig& c) { return c.test_labels_path.string(); }},
      {"format",
       [](Context& c, const std::string& v) { c.cfg.load.format = data::parse_format(v); },
       [](const RunConfig& c) { return format_name(c.load.format); }},
      {"label_column",
       [](Context& c, const std::string& v) { c.cfg.load.label_column = to_bool("label_column", v); },
       [](const RunConfig& c) { return std::string(c.load.label_column ? "true" : "false"); }},
      {"window_length",
       [](Context& c, const std::string& v) { c.cfg.split.window_length = to_size("window_length", v); },
       [](const RunConfig& c) { return std::to_string(c.split.window_length); }},
      {"stride",
       [](Context& c, const std::string& v) { c.cfg.split.stride = to_size("stride", v); },
       [](const RunConfig& c) { return std::to_string(c.split.stride); }},
      {"validation_fraction",
       [](Context& c, const std::string& v) { c.cfg.split.validation_fraction = to_double("validation_fraction", v); },
       [](const RunConfig& c) { return num(c.split.validation_fraction); }},
      {"encoder_levels",
       [](Context& c, const std::string& v) { c.cfg.model.encoder_levels = to_size("encoder_levels", v); },
       [](const RunConfig& c) { return std::to_string(c.model.encoder_levels); }},
      {"decoder_levels",
       [](Context& c, const std::string& v) { c.cfg.model.decoder_levels = to_size("decoder_levels", v); },
       [](const RunConfig& c) { return std::to_string(c.model.decoder_levels); }},
      {"tau",
       [](Context& c, const std::string& v) { c.cfg.model.tau = to_size("tau", v); },
       [](const RunConfig& c) { return std::to_string(c.model.tau); }},
      {"hidden_dim",
       [](Context& c, const std::string& v) { c.cfg.model.hidden_dim = to_size("hidden_dim", v); },
       [](const RunConfig& c) { return std::to_string(c.model.hidden_dim); }},
      {"beta",
       [](Context& c, const std::string& v) { c.cfg.model.beta = to_double("beta", v); },
       [](const RunConfig& c) { return num(c.model.beta); }},
      {"noise_scale",
       [](Context& c, const std::string& v) { c.cfg.model.noise_scale = to_double("noise_scale", v); },
       [](const RunConfig& c) { return num(c.model.noise_scale); }},
      {"lambda_shape",
       [](Context& c, const std::string& v) { c.cfg.train.weights.lambda_shape = to_double("lambda_shape", v); },
       [](const RunConfig& c) { return num(c.train.weights.lambda_shape); }},
      {"lambda_pred",
       [](Context& c, const std::string& v) { c.cfg.train.weights.lambda_pred = to_double("lambda_pred", v); },
       [](const RunConfig& c) { return num(c.train.weights.lambda_pred); }},
      {"gamma",
       [](Context& c, const std::string& v) { c.cfg.train.weights.gamma = to_double("gamma", v); },
       [](const RunConfig& c) { return num(c.train.weights.gamma); }},
      {"epochs",
       [](Context& c, const std::string& v) { c.cfg.train.epochs = to_size("epochs", v); },
       [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
      {"batch_size",
       [](Context& c, const std::string& v) { c.cfg.train.batch_size = to_size("batch_size", v); },
       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      {"learning_rate",
       [](Context& c, const std::string& v) { c.cfg.train.learning_rate = to_double("learning_rate", v); },
       [](const RunConfig& c) { return num(c.train.learning_rate); }},
      {"patience",
       [](Context& c, const std::string& v) { c.cfg.train.patience = to_size("patience", v); },
       [](const RunConfig& c) { return std::to_string(c.train.patience); }},
      {"clip_norm",
       [](Context& c, const std::string& v) { c.cfg.train.clip_norm = to_double("clip_norm", v); },
       [](const RunConfig& c) { return num(c.train.clip_norm); }},
      {"seed",
       [](Context& c, const std::string& v) {
           const auto s = to_size("seed", v);
           c.cfg.train.seed = s;
           c.cfg.model.seed = s;
       },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {"grid_hidden_dim",
       [](Context& c, const std::string& v) { c.cfg.grid.hidden_dims = to_list<std::size_t>("grid_hidden_dim", v, to_size); },
       [](const RunConfig& c) { return join(c.grid.hidden_dims); }},
      {"grid_tau",
       [](Context& c, const std::string& v) { c.cfg.grid.taus = to_list<std::size_t>("grid_tau", v, to_size); },
       [](const RunConfig& c) { return join(c.grid.taus); }},
      {"grid_beta",
       [](Context& c, const std::string& v) { c.cfg.grid.betas = to_list<double>("grid_beta", v, to_double); },
       [](const RunConfig& c) { return join(c.grid.betas); }},
      {"grid_lambda_shape",
       [](Context& c, const std::string& v) { c.cfg.grid.lambda_shapes = to_list<double>("grid_lambda_shape", v, to_double); },
       [](const RunConfig& c) { return join(c.grid.lambda_shapes); }},
      {"threshold",
       [](Context& c, const std::string& v) {
           if (v.empty() || v == "none") {
               c.cfg.threshold.reset();
           } else {
               c.cfg.threshold = to_double("threshold", v);
           }
       },
       [](const RunConfig& c) { return c.threshold ? num(*c.threshold) : std::string("none"); }},
      {"inference_stride",
       [](Context& c, const std::string& v) {
           if (v.empty() || v == "none") {
               c.cfg.inference_stride.reset();
           } else {
               c.cfg.inference_stride = to_size("inference_stride", v);
           }
       },
       [](const RunConfig& c) {
           return c.inference_stride ? std::to_string(*c.inference_stride) : std::string("none");
       }},
      {"out_dir",
       [](Context& c, const std::string& v) { c.cfg.out_dir = c.path(v); },
       [](const RunConfig& c) { return c.out_dir.string(); }},
    };
    return fields;
}

auto env_name(const std::string& key) -> std::string
{
    std::string out = "RAEMEPC_";
    for (const char ch : key) {
        out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return out;
}

void validate(const RunConfig& cfg)
{
    cfg.split.validate();
    cfg.train.validate();
    cfg.grid.validate();
    if (cfg.threshold && !(*cfg.threshold >= 0.0)) {
        throw ConfigError("threshold must be nonnegative");
    }
    if (cfg.inference_stride && *cfg.inference_stride == 0) {
        throw ConfigError("inference_stride must be positive");
    }
    auto m = cfg.model;
    m.dims = 1;
    m.window_length = cfg.split.window_length;
    m.validate();
}

} // namespace

auto process_environment() -> Environment
{
    Environment env;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        const std::string entry(*e);
        if (entry.rfind("RAEMEPC_", 0) == 0) {
            const auto eq = entry.find('=');
            if (eq != std::string::npos) {
                env[entry.substr(0, eq)] = entry.substr(eq + 1);
            }
        }
    }
    return env;
}

auto parse_config(const std::string& text,
                  const std::filesystem::path& base_dir,
                  const Environment& env) -> RunConfig
{
    std::map<std::string, std::string> raw;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (!raw.emplace(key, value).second) {
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    const auto& fields = schema();
    for (const auto& [key, value] : raw) {
        if (key == "preset") {
            continue;
        }
        const bool known = std::any_of(fields.begin(), fields.end(),
                                       [&](const Field& f) { return key == f.key; });
        if (!known) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    for (const auto& [name, value] : env) {
        if (name == "RAEMEPC_PRESET") {
            raw["preset"] = value;
            continue;
        }
        for (const auto& f : fields) {
            if (name == env_name(f.key)) {
                raw[f.key] = value;
            }
        }
    }

    RunConfig cfg;
    Context ctx{cfg, base_dir};
    // Presets set defaults that explicit keys may override.
    if (const auto it = raw.find("preset"); it != raw.end()) {
        apply_preset(cfg, it->second);
    }
    for (const auto& f : fields) {
        if (const auto it = raw.find(f.key); it != raw.end()) {
            f.set(ctx, it->second);
        }
    }
    validate(cfg);
    return cfg;
}

auto load_config(const std::filesystem::path& path, const Environment& env) -> RunConfig
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path(), env);
}

auto effective_config(const RunConfig& config) -> std::string
{
    std::ostringstream out;
    out << "# effective configuration, all defaults resolved\n";
    out << "preset = " << (config.preset.empty() ? "none" : config.preset) << '\n';
    for (const auto& f : schema()) {
        out << f.key << " = " << f.get(config) << '\n';
    }
    return out.str();
}

} // namespace raemepc::pipeline
