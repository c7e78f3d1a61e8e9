#include "fcgaga/checkpoint.hpp"

#include <fmt/format.h>

#include <cstring>
#include <fstream>

namespace fcgaga {
namespace {

constexpr char kMagic[8] = {'F', 'C', 'G', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename T>
  void pod(const T& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void u64(std::uint64_t v) { pod(v); }
  void str(std::string_view s) {
    u64(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(std::span<const double> v) {
    u64(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  template <typename T>
  T pod() {
    T v{};
    if (!is_.read(reinterpret_cast<char*>(&v), sizeof(T))) fail("truncated file");
    return v;
  }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::string str() {
    const auto n = u64();
    if (n > (1u << 20)) fail("implausible string length");
    std::string s(n, '\0');
    if (!is_.read(s.data(), static_cast<std::streamsize>(n))) fail("truncated string");
    return s;
  }
  std::vector<double> doubles(std::size_t expected) {
    const auto n = u64();
    if (n != expected) fail(fmt::format("array of {} values, expected {}", n, expected));
    std::vector<double> v(n);
    if (!is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
      fail("truncated array");
    }
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const { throw CheckpointError(source_ + ": " + what); }

 private:
  std::istream& is_;
  std::string source_;
};

void write_config(Writer& w, const ModelConfig& c) {
  for (auto v : {c.num_nodes, c.history, c.horizon, c.embedding_dim, c.hidden_dim, c.fc_layers, c.blocks, c.layers}) {
    w.u64(v);
  }
  w.pod(c.epsilon);
  w.str(to_string(c.gate));
  w.pod(static_cast<std::uint8_t>(c.time_features.time_of_day));
  w.pod(static_cast<std::uint8_t>(c.time_features.day_of_week));
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  for (auto* field : {&c.num_nodes, &c.history, &c.horizon, &c.embedding_dim, &c.hidden_dim, &c.fc_layers, &c.blocks,
                      &c.layers}) {
    *field = r.u64();
  }
  c.epsilon = r.pod<double>();
  try {
    c.gate = parse_gate_variant(r.str());
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  c.time_features.time_of_day = r.pod<std::uint8_t>() != 0;
  c.time_features.day_of_week = r.pod<std::uint8_t>() != 0;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(fmt::format("stored config is invalid: {}", e.what()));
  }
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.pod(kVersion);
    write_config(w, checkpoint.config);
    w.u64(checkpoint.epoch);
    w.u64(checkpoint.seed);
    const auto params = checkpoint.params.named_parameters();
    w.u64(params.size());
    for (const auto& p : params) {
      w.str(p.name);
      w.u64(p.tensor.rank());
      for (auto e : p.tensor.shape()) w.u64(e);
      w.doubles(p.tensor.values());
    }
    w.pod(static_cast<std::uint8_t>(checkpoint.optimizer.has_value()));
    if (checkpoint.optimizer) {
      const auto& s = *checkpoint.optimizer;
      w.u64(s.step);
      w.u64(s.first_moment.size());
      for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
        w.doubles(s.first_moment[i]);
        w.doubles(s.second_moment[i]);
      }
    }
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint");
  if (const auto v = r.pod<std::uint32_t>(); v != kVersion) r.fail(fmt::format("unsupported version {}", v));

  Checkpoint ck;
  ck.config = read_config(r);
  ck.epoch = r.u64();
  ck.seed = r.u64();
  ck.params = init_params(ck.config, 0);
  const auto params = ck.params.named_parameters();
  if (const auto n = r.u64(); n != params.size()) {
    r.fail(fmt::format("{} parameter tensors, config implies {}", n, params.size()));
  }
  for (const auto& p : params) {
    const auto name = r.str();
    if (name != p.name) r.fail(fmt::format("parameter '{}' where '{}' was expected", name, p.name));
    Shape shape(r.u64());
    for (auto& e : shape) e = r.u64();
    if (shape != p.tensor.shape()) {
      r.fail(fmt::format("parameter '{}' has shape {}, config implies {}", name, to_string(shape),
                         to_string(p.tensor.shape())));
    }
    const auto values = r.doubles(p.tensor.numel());
    auto target = p.tensor;
    std::copy(values.begin(), values.end(), target.data().begin());
  }
  if (r.pod<std::uint8_t>() != 0) {
    AdamState s;
    s.step = r.u64();
    if (const auto n = r.u64(); n != params.size()) r.fail("optimizer state does not mirror the parameters");
    for (const auto& p : params) {
      s.first_moment.push_back(r.doubles(p.tensor.numel()));
      s.second_moment.push_back(r.doubles(p.tensor.numel()));
    }
    ck.optimizer = std::move(s);
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  return ck;
}

}  // namespace fcgaga
