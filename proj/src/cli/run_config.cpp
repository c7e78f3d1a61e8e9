#include <fmt/format.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <spdlog/version.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <variant>

#include "fcgaga/cli.hpp"

namespace fcgaga {
namespace {

using FieldRef = std::variant<std::size_t*, double*, bool*, std::string*, GateVariant*>;

std::vector<std::pair<std::string_view, FieldRef>> fields(RunConfig& c) {
  auto& m = c.model;
  auto& s = c.synth;
  return {
      {"dataset_path", &c.dataset_path},
      {"dataset_format", &c.dataset_format},
      {"adjacency_path", &c.adjacency_path},
      {"coordinates_path", &c.coordinates_path},
      {"output_dir", &c.output_dir},
      {"num_nodes", &m.num_nodes},
      {"history", &m.history},
      {"horizon", &m.horizon},
      {"embedding_dim", &m.embedding_dim},
      {"hidden_dim", &m.hidden_dim},
      {"fc_layers", &m.fc_layers},
      {"blocks", &m.blocks},
      {"layers", &m.layers},
      {"epsilon", &m.epsilon},
      {"gate", &m.gate},
      {"time_of_day", &m.time_features.time_of_day},
      {"day_of_week", &m.time_features.day_of_week},
      {"epochs", &c.epochs},
      {"batches_per_epoch", &c.batches_per_epoch},
      {"batch_size", &c.batch_size},
      {"weight_decay", &c.weight_decay},
      {"learning_rate", &c.learning_rate},
      {"lr_anneal_start", &c.lr_anneal_start},
      {"lr_anneal_every", &c.lr_anneal_every},
      {"seed", &c.seed},
      {"deterministic", &c.deterministic},
      {"train_fraction", &c.train_fraction},
      {"validation_fraction", &c.validation_fraction},
      {"test_fraction", &c.test_fraction},
      {"eval_batch_size", &c.eval_batch_size},
      {"ablation_seeds", &c.ablation_seeds},
      {"export_anchors", &c.export_anchors},
      {"synth_steps", &s.num_steps},
      {"synth_ring_neighbors", &s.ring_neighbors},
      {"synth_baseline_min", &s.baseline_min},
      {"synth_baseline_max", &s.baseline_max},
      {"synth_seasonal_amplitude", &s.seasonal_amplitude},
      {"synth_period", &s.period},
      {"synth_lag", &s.lag},
      {"synth_coupling", &s.coupling},
      {"synth_noise", &s.noise},
      {"synth_event_rate", &s.event_rate},
      {"synth_event_depth", &s.event_depth},
      {"synth_event_decay", &s.event_decay},
  };
}

void assign(FieldRef ref, std::string_view key, const nlohmann::json& value) {
  auto bad = [&](const char* expected) {
    return ConfigError(fmt::format("config key '{}': expected {}, got {}", key, expected, value.dump()));
  };
  std::visit(
      [&](auto* field) {
        using T = std::remove_pointer_t<decltype(field)>;
        if constexpr (std::is_same_v<T, std::size_t>) {
          if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
            throw bad("a non-negative integer");
          }
          *field = value.get<std::size_t>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!value.is_number()) throw bad("a number");
          *field = value.get<double>();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!value.is_boolean()) throw bad("true or false");
          *field = value.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (!value.is_string()) throw bad("a string");
          *field = value.get<std::string>();
        } else {
          if (!value.is_string()) throw bad("a gate variant name");
          *field = parse_gate_variant(value.get<std::string>());
        }
      },
      ref);
}

nlohmann::json to_json(FieldRef ref) {
  return std::visit(
      [](auto* field) -> nlohmann::json {
        if constexpr (std::is_same_v<std::remove_pointer_t<decltype(field)>, GateVariant>) {
          return std::string(to_string(*field));
        } else {
          return *field;
        }
      },
      ref);
}

void validate(const RunConfig& c) {
  c.model.validate();
  parse_panel_format(c.dataset_format);
  if (c.epochs == 0 || c.batches_per_epoch == 0 || c.batch_size == 0 || c.eval_batch_size == 0) {
    throw ConfigError("epochs, batches_per_epoch, batch_size and eval_batch_size must be positive");
  }
  if (c.lr_anneal_every == 0 || c.lr_anneal_start == 0) throw ConfigError("lr anneal start and period must be positive");
  if (!(c.learning_rate > 0.0) || !(c.weight_decay >= 0.0)) {
    throw ConfigError("learning_rate must be > 0 and weight_decay >= 0");
  }
  if (c.ablation_seeds == 0) throw ConfigError("ablation_seeds must be positive");
  const double total = c.train_fraction + c.validation_fraction + c.test_fraction;
  if (!(c.train_fraction > 0 && c.validation_fraction > 0 && c.test_fraction > 0) || std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be positive and sum to 1");
  }
  auto synth = c.synth;
  synth.num_nodes = c.model.num_nodes;
  try {
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.epochs = epochs;
  o.batches_per_epoch = batches_per_epoch;
  o.batch_size = batch_size;
  o.weight_decay = weight_decay;
  o.schedule = {learning_rate, lr_anneal_start, lr_anneal_every};
  o.seed = seed;
  o.split = {train_fraction, validation_fraction, test_fraction};
  o.eval_batch_size = eval_batch_size;
  return o;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  auto fa = fields(const_cast<RunConfig&>(a));
  auto fb = fields(const_cast<RunConfig&>(b));
  for (std::size_t k = 0; k < fa.size(); ++k) {
    const bool same = std::visit(
        [&](auto* x) { return *x == *std::get<std::remove_cvref_t<decltype(x)>>(fb[k].second); }, fa[k].second);
    if (!same) return false;
  }
  return true;
}

RunConfig parse_run_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig config;
  auto table = fields(config);
  for (const auto& [key, value] : doc.items()) {
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    assign(it->second, key, value);
  }
  validate(config);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kExitMissingFile, "config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& config) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [key, ref] : fields(const_cast<RunConfig&>(config))) doc[std::string(key)] = to_json(ref);
  return doc.dump(2);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string out;
  for (unsigned int k = 0; k < length; ++k) out += fmt::format("{:02x}", digest[k]);
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string config_hash(const RunConfig& config) { return sha256_hex(serialize_run_config(config)); }

void write_manifest(const std::filesystem::path& dir, std::string_view command, const RunConfig& config,
                    const std::vector<std::filesystem::path>& artifacts) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& a : artifacts) {
    const auto full = dir / a;
    files.push_back({{"path", a.generic_string()},
                     {"bytes", std::filesystem::file_size(full)},
                     {"sha256", sha256_file(full)}});
  }
  nlohmann::json doc = {
      {"command", command},
      {"config_hash", config_hash(config)},
      {"seed", config.seed},
      {"deterministic", config.deterministic},
      {"config", nlohmann::json::parse(serialize_run_config(config))},
      {"versions",
       {{"fcgaga", FCGAGA_VERSION},
        {"compiler", __VERSION__},
        {"fmt", FMT_VERSION},
        {"spdlog", fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)},
        {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                      NLOHMANN_JSON_VERSION_PATCH)},
        {"openssl", OPENSSL_VERSION_TEXT}}},
      {"artifacts", files},
  };
  std::ofstream out(dir / fmt::format("manifest_{}.json", command));
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << doc.dump(2) << '\n';
}

void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string("NA"); };
  out << "horizon,label,mae,mape_pct,rmse,count\n";
  for (const auto& h : report.horizons) {
    out << fmt::format("{},{},{},{},{},{}\n", h.horizon, horizon_label(h.horizon), cell(h.mae), cell(h.mape_pct),
                       cell(h.rmse), h.count);
  }
}

}  // namespace fcgaga
