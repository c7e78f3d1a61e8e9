#include <fmt/format.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fcgaga/data.hpp"

namespace fcgaga {
namespace {

constexpr char kCacheMagic[8] = {'F', 'C', 'G', 'P', 'A', 'N', 'E', 'L'};
constexpr std::uint32_t kCacheVersion = 1;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& source) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw ParseError(source, 0, "truncated binary cache");
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SpeedPanel load_cache(const std::filesystem::path& path) {
  const auto source = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + source);
  char magic[sizeof kCacheMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) {
    throw ParseError(source, 0, "not a panel cache (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in, source);
  if (version != kCacheVersion) throw ParseError(source, 0, fmt::format("unsupported cache version {}", version));
  const auto n = read_pod<std::uint64_t>(in, source);
  const auto t = read_pod<std::uint64_t>(in, source);
  const auto start = read_pod<std::int64_t>(in, source);
  if (n == 0 || t == 0) throw ParseError(source, 0, "empty panel");

  SpeedPanel panel;
  panel.node_ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = read_pod<std::uint32_t>(in, source);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw ParseError(source, 0, "truncated node id table");
    panel.node_ids.push_back(std::move(id));
  }
  panel.timestamps.resize(t);
  for (std::uint64_t s = 0; s < t; ++s) panel.timestamps[s] = start + static_cast<std::int64_t>(s) * kPanelStepSeconds;
  panel.values.resize(n * t);
  if (!in.read(reinterpret_cast<char*>(panel.values.data()), static_cast<std::streamsize>(n * t * sizeof(double)))) {
    throw ParseError(source, 0, "truncated value block");
  }
  try {
    panel.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
  return panel;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? fmt::format("{}:{}: {}", source, line, what) : fmt::format("{}: {}", source, what)),
      line_(line) {}

void SpeedPanel::validate() const {
  if (node_ids.empty()) throw std::invalid_argument("panel has no nodes");
  if (timestamps.empty()) throw std::invalid_argument("panel has no time steps");
  if (values.size() != num_nodes() * num_steps()) {
    throw std::invalid_argument(fmt::format("panel holds {} values, expected {} x {}", values.size(), num_steps(),
                                            num_nodes()));
  }
  for (std::size_t s = 1; s < timestamps.size(); ++s) {
    if (timestamps[s] - timestamps[s - 1] != kPanelStepSeconds) {
      throw std::invalid_argument(fmt::format("timestamp spacing at step {} is {} s, expected {} s", s,
                                              timestamps[s] - timestamps[s - 1], kPanelStepSeconds));
    }
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]) || values[k] < 0.0) {
      throw std::invalid_argument(fmt::format("invalid speed {} at step {}, node {}", values[k], k / num_nodes(),
                                              k % num_nodes()));
    }
  }
}

PanelFormat parse_panel_format(std::string_view name) {
  if (name == "csv") return PanelFormat::kCsv;
  if (name == "binary_cache") return PanelFormat::kBinaryCache;
  throw std::invalid_argument(fmt::format("unknown panel format '{}' (expected csv or binary_cache)", name));
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DD?HH:MM[:SS]
  if (text.size() != 16 && text.size() != 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || (text[10] != ' ' && text[10] != 'T') || text[13] != ':') return std::nullopt;
  if (text.size() == 19 && text[16] != ':') return std::nullopt;
  int year = 0;
  unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_number(text.substr(0, 4), year) || !parse_number(text.substr(5, 2), month) ||
      !parse_number(text.substr(8, 2), day) || !parse_number(text.substr(11, 2), hour) ||
      !parse_number(text.substr(14, 2), minute)) {
    return std::nullopt;
  }
  if (text.size() == 19 && !parse_number(text.substr(17, 2), second)) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) return std::nullopt;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t seconds) {
  using namespace std::chrono;
  const auto tp = sys_seconds{std::chrono::seconds{seconds}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}:{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count());
}

SpeedPanel parse_panel_csv(std::string_view text, const std::string& source) {
  SpeedPanel panel;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (header) {
      if (fields.size() < 2) throw ParseError(source, line_no, "header needs a timestamp column and at least one node");
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i].empty()) throw ParseError(source, line_no, fmt::format("empty node id in column {}", i + 1));
        panel.node_ids.emplace_back(fields[i]);
      }
      header = false;
      continue;
    }
    if (fields.size() != panel.node_ids.size() + 1) {
      throw ParseError(source, line_no,
                       fmt::format("ragged row: {} fields, expected {}", fields.size(), panel.node_ids.size() + 1));
    }
    const auto ts = parse_timestamp(fields[0]);
    if (!ts) throw ParseError(source, line_no, fmt::format("bad timestamp '{}'", fields[0]));
    if (!panel.timestamps.empty()) {
      const auto delta = *ts - panel.timestamps.back();
      if (delta <= 0) throw ParseError(source, line_no, fmt::format("non-monotone timestamp '{}'", fields[0]));
      if (delta != kPanelStepSeconds) {
        throw ParseError(source, line_no,
                         fmt::format("timestamp '{}' is {} s after the previous row, expected {} s", fields[0], delta,
                                     kPanelStepSeconds));
      }
    }
    panel.timestamps.push_back(*ts);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      if (!parse_number(fields[i], v) || !std::isfinite(v)) {
        throw ParseError(source, line_no, fmt::format("non-numeric speed '{}' in column {}", fields[i], i + 1));
      }
      if (v < 0.0) throw ParseError(source, line_no, fmt::format("negative speed {} in column {}", v, i + 1));
      panel.values.push_back(v);
    }
  }
  if (header) throw ParseError(source, 0, "empty file");
  if (panel.timestamps.empty()) throw ParseError(source, line_no, "no data rows");
  return panel;
}

SpeedPanel load_panel(const std::filesystem::path& path, PanelFormat format) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("panel file not found: " + path.string());
  if (format == PanelFormat::kBinaryCache) return load_cache(path);
  return parse_panel_csv(read_file(path), path.string());
}

void save_panel_csv(const SpeedPanel& panel, const std::filesystem::path& path) {
  panel.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "timestamp";
  for (const auto& id : panel.node_ids) out << ',' << id;
  out << '\n';
  for (std::size_t s = 0; s < panel.num_steps(); ++s) {
    out << format_timestamp(panel.timestamps[s]);
    for (std::size_t i = 0; i < panel.num_nodes(); ++i) out << ',' << fmt::format("{}", panel.at(s, i));
    out << '\n';
  }
}

void save_panel_cache(const SpeedPanel& panel, const std::filesystem::path& path) {
  panel.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kCacheMagic, sizeof kCacheMagic);
  write_pod(out, kCacheVersion);
  write_pod(out, static_cast<std::uint64_t>(panel.num_nodes()));
  write_pod(out, static_cast<std::uint64_t>(panel.num_steps()));
  write_pod(out, panel.timestamps.front());
  for (const auto& id : panel.node_ids) {
    write_pod(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  out.write(reinterpret_cast<const char*>(panel.values.data()),
            static_cast<std::streamsize>(panel.values.size() * sizeof(double)));
}

}  // namespace fcgaga
