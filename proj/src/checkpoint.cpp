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

#include "raemepc/checkpoint.hpp"

#include "raemepc/errors.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace raemepc::train {

namespace {

constexpr char magic[8] = {'R', 'A', 'E', 'M', 'E', 'P', 'C', '\0'};

class Writer {
public:
    template <typename T>
    void put(T v)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void put_string(const std::string& s)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }
    void put_doubles(std::span<const double> v)
    {
        out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    void put_tensor(const std::string& name, const Tensor& t)
    {
        put_string(name);
        put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (const auto e : t.shape()) {
            put<std::uint64_t>(e);
        }
        put_doubles(t.data());
    }
    [[nodiscard]] auto str() && -> std::string { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : in_(bytes) {}

    template <typename T>
    auto get() -> T
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    auto get_string() -> std::string
    {
        const auto n = get<std::uint32_t>();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    auto get_doubles(std::size_t n) -> std::vector<double>
    {
        if (n > (in_.size() - pos_) / sizeof(double)) {
            throw IntegrityError("checkpoint: truncated tensor data");
        }
        std::vector<double> v(n);
        std::memcpy(v.data(), in_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return v;
    }
    auto get_tensor() -> std::pair<std::string, Tensor>
    {
        auto name = get_string();
        const auto rank = get<std::uint32_t>();
        if (rank > 8) {
            throw IntegrityError("checkpoint: implausible tensor rank");
        }
        std::vector<std::size_t> shape(rank);
        std::size_t count = 1;
        for (auto& e : shape) {
            e = static_cast<std::size_t>(get<std::uint64_t>());
            count *= e;
        }
        return {std::move(name), Tensor(std::move(shape), get_doubles(count))};
    }
    [[nodiscard]] auto done() const noexcept -> bool { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const
    {
        if (n > in_.size() - pos_) {
            throw IntegrityError("checkpoint: truncated payload");
        }
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

auto crc_of(std::string_view bytes) -> std::uint32_t
{
    return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

} // namespace

auto Checkpoint::extra(const std::string& name) const -> const Tensor*
{
    for (const auto& [n, t] : extras) {
        if (n == name) {
            return &t;
        }
    }
    return nullptr;
}

auto serialize_checkpoint(const Checkpoint& ckpt) -> std::string
{
    Writer payload;
    const auto& c = ckpt.config;
    for (const std::uint64_t v : {std::uint64_t{c.dims},
                                  std::uint64_t{c.window_length},
                                  std::uint64_t{c.encoder_levels},
                                  std::uint64_t{c.decoder_levels},
                                  std::uint64_t{c.tau},
                                  std::uint64_t{c.hidden_dim}}) {
        payload.put(v);
    }
    payload.put(c.beta);
    payload.put(c.noise_scale);
    payload.put(c.seed);

    payload.put<std::uint64_t>(ckpt.stats.mean.size());
    payload.put_doubles(ckpt.stats.mean);
    payload.put_doubles(ckpt.stats.stddev);

    std::uint64_t count = 0;
    ckpt.params.for_each([&](const std::string&, const Tensor&) { ++count; });
    payload.put(count);
    ckpt.params.for_each(
      [&](const std::string& name, const Tensor& t) { payload.put_tensor(name, t); });

    payload.put<std::uint64_t>(ckpt.extras.size());
    for (const auto& [name, t] : ckpt.extras) {
        payload.put_tensor(name, t);
    }
    const auto body = std::move(payload).str();

    Writer file;
    for (const char ch : magic) {
        file.put(ch);
    }
    file.put(checkpoint_version);
    file.put<std::uint64_t>(body.size());
    auto out = std::move(file).str();
    out += body;
    Writer tail;
    tail.put(crc_of(body));
    out += std::move(tail).str();
    return out;
}

auto deserialize_checkpoint(const std::string& bytes) -> Checkpoint
{
    constexpr std::size_t header = sizeof(magic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < header + sizeof(std::uint32_t)) {
        throw IntegrityError("checkpoint: file too short");
    }
    if (std::memcmp(bytes.data(), magic, sizeof(magic)) != 0) {
        throw IntegrityError("checkpoint: bad magic");
    }
    Reader head(std::string_view(bytes).substr(sizeof(magic), header - sizeof(magic)));
    const auto version = head.get<std::uint32_t>();
    if (version != checkpoint_version) {
        throw IntegrityError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto size = head.get<std::uint64_t>();
    if (size != bytes.size() - header - sizeof(std::uint32_t)) {
        throw IntegrityError("checkpoint: payload size does not match file size");
    }
    const auto body = std::string_view(bytes).substr(header, size);
    Reader tail(std::string_view(bytes).substr(header + size));
    if (tail.get<std::uint32_t>() != crc_of(body)) {
        throw IntegrityError("checkpoint: checksum mismatch");
    }

    Reader r(body);
    Checkpoint ckpt;
    auto& c = ckpt.config;
    c.dims = r.get<std::uint64_t>();
    c.window_length = r.get<std::uint64_t>();
    c.encoder_levels = r.get<std::uint64_t>();
    c.decoder_levels = r.get<std::uint64_t>();
    c.tau = r.get<std::uint64_t>();
    c.hidden_dim = r.get<std::uint64_t>();
    c.beta = r.get<double>();
    c.noise_scale = r.get<double>();
    c.seed = r.get<std::uint64_t>();

    const auto d = r.get<std::uint64_t>();
    ckpt.stats.mean = r.get_doubles(d);
    ckpt.stats.stddev = r.get_doubles(d);

    std::map<std::string, Tensor> stored;
    const auto count = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        auto [name, t] = r.get_tensor();
        stored.emplace(std::move(name), std::move(t));
    }
    const auto n_extras = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_extras; ++i) {
        ckpt.extras.push_back(r.get_tensor());
    }
    if (!r.done()) {
        throw IntegrityError("checkpoint: trailing bytes in payload");
    }

    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw IntegrityError(std::string("checkpoint: invalid model config: ") + e.what());
    }
    if (ckpt.stats.dims() != c.dims) {
        throw DimensionError("checkpoint: standardization has " + std::to_string(d)
                             + " variables, model expects " + std::to_string(c.dims));
    }
    ckpt.params = model::ModelParams::zeros(c);
    std::size_t matched = 0;
    ckpt.params.for_each([&](const std::string& name, Tensor& t) {
        const auto it = stored.find(name);
        if (it == stored.end()) {
            throw IntegrityError("checkpoint: missing tensor " + name);
        }
        if (!it->second.same_shape(t)) {
            throw DimensionError("checkpoint: tensor " + name + " has shape "
                                 + shape_string(it->second.shape()) + ", config implies "
                                 + shape_string(t.shape()));
        }
        t = it->second;
        ++matched;
    });
    if (matched != stored.size()) {
        throw IntegrityError("checkpoint: unexpected extra parameter tensors");
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    const auto bytes = serialize_checkpoint(ckpt);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write checkpoint '" + tmp + "'");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error("failed writing checkpoint '" + tmp + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

auto load_checkpoint(const std::filesystem::path& path, std::optional<std::size_t> expected_dims)
  -> Checkpoint
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot read checkpoint '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    auto ckpt = deserialize_checkpoint(buf.str());
    if (expected_dims && *expected_dims != ckpt.config.dims) {
        throw DimensionError("checkpoint was trained on " + std::to_string(ckpt.config.dims)
                             + " variables, data has " + std::to_string(*expected_dims));
    }
    return ckpt;
}

} // namespace raemepc::train
