#include "fieldpod/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "fieldpod/error.hpp"
#include "text_util.hpp"

namespace fieldpod {

namespace kv {
namespace {

[[noreturn]] void fail(std::size_t line, std::string_view what) {
  throw Error(ErrorCode::Parse, fmt::format("line {}: {}", line, what));
}

bool bare_key(std::string_view key) {
  return !key.empty() && std::all_of(key.begin(), key.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

// Strips a trailing comment that is outside any quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

Value parse_value(std::string_view text, std::size_t line) {
  if (text.empty()) fail(line, "missing value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') fail(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      char c = text[i];
      if (c == '"') fail(line, "unescaped quote in string");
      if (c == '\\') {
        if (i + 2 >= text.size()) fail(line, "dangling escape");
        switch (text[++i]) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: fail(line, "unsupported escape");
        }
      }
      out.push_back(c);
    }
    return out;
  }
  if (text == "true") return true;
  if (text == "false") return false;
  std::string digits;
  for (char c : text) {
    if (c != '_') digits.push_back(c);
  }
  try {
    return detail::parse_number(digits, "value");
  } catch (const Error&) {
    fail(line, fmt::format("cannot parse value '{}'", text));
  }
}

}  // namespace

Document parse(std::string_view text) {
  Document doc;
  Table* current = &doc.root;
  std::set<std::string, std::less<>> seen_tables;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const auto line = detail::trim(strip_comment(raw));
    if (line.empty()) return;
    if (line.starts_with("[[")) {
      if (!line.ends_with("]]")) fail(line_no, "malformed array header");
      const auto name = std::string(detail::trim(line.substr(2, line.size() - 4)));
      if (!bare_key(name)) fail(line_no, fmt::format("bad table name '{}'", name));
      if (doc.tables.count(name)) fail(line_no, fmt::format("'{}' is already a table", name));
      auto& vec = doc.arrays[name];
      vec.push_back(Table{{}, line_no});
      current = &vec.back();
      return;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed table header");
      const auto name = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (!bare_key(name)) fail(line_no, fmt::format("bad table name '{}'", name));
      if (!seen_tables.insert(name).second || doc.arrays.count(name)) {
        fail(line_no, fmt::format("table '{}' defined twice", name));
      }
      current = &doc.tables[name];
      current->line = line_no;
      return;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const auto key = std::string(detail::trim(line.substr(0, eq)));
    if (!bare_key(key)) fail(line_no, fmt::format("bad key '{}'", key));
    if (current->values.count(key)) fail(line_no, fmt::format("duplicate key '{}'", key));
    current->values.emplace(key, parse_value(detail::trim(line.substr(eq + 1)), line_no));
  });
  return doc;
}

}  // namespace kv

bool Scenario::broker_down_at(double sim_s) const {
  return std::any_of(broker_faults.begin(), broker_faults.end(),
                     [sim_s](const BrokerFault& f) { return f.contains(sim_s); });
}

namespace {

// Typed accessors over one table that reject keys nobody asked for.
class Reader {
 public:
  Reader(const kv::Table& table, std::string section) : table_(table), section_(std::move(section)) {}

  std::optional<double> number(std::string_view key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (const auto* d = std::get_if<double>(v)) return *d;
    throw bad(key, "a number");
  }
  std::optional<std::string> string(std::string_view key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    throw bad(key, "a string");
  }
  std::optional<bool> boolean(std::string_view key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (const auto* b = std::get_if<bool>(v)) return *b;
    throw bad(key, "true or false");
  }
  double required_number(std::string_view key) {
    if (auto v = number(key)) return *v;
    throw missing(key);
  }
  std::string required_string(std::string_view key) {
    if (auto v = string(key)) return *v;
    throw missing(key);
  }

  std::string name(std::string_view key) const { return fmt::format("{}.{}", section_, key); }

  /// Call after reading: any key never looked up is a typo.
  void finish() const {
    for (const auto& [key, value] : table_.values) {
      if (!used_.count(key)) {
        throw Error(ErrorCode::Configuration, fmt::format("unknown key '{}' in scenario", name(key)), name(key));
      }
    }
  }

 private:
  const kv::Value* find(std::string_view key) {
    used_.insert(std::string(key));
    auto it = table_.values.find(key);
    return it == table_.values.end() ? nullptr : &it->second;
  }
  Error bad(std::string_view key, std::string_view expected) const {
    return Error(ErrorCode::Configuration, fmt::format("scenario key '{}' must be {}", name(key), expected), name(key));
  }
  Error missing(std::string_view key) const {
    return Error(ErrorCode::Configuration, fmt::format("scenario key '{}' is required", name(key)), name(key));
  }

  const kv::Table& table_;
  std::string section_;
  std::set<std::string, std::less<>> used_;
};

std::filesystem::path existing_file(const std::filesystem::path& base, const std::string& rel,
                                    const std::string& key) {
  std::filesystem::path p(rel);
  if (p.is_relative()) p = base / p;
  if (!std::filesystem::is_regular_file(p)) {
    throw Error(ErrorCode::NotFound, fmt::format("file {} referenced by '{}' does not exist", p.string(), key), key);
  }
  return p;
}

template <typename T>
T wrap_config(const std::string& key, auto&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(ErrorCode::Configuration, fmt::format("scenario key '{}': {}", key, e.what()), key);
  }
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  const auto doc = kv::parse(text);
  Scenario sc;
  sc.start_utc = parse_utc("2021-01-01T00:00:00Z");

  static const std::set<std::string, std::less<>> known_tables = {"device", "sensors", "storage", "policy",
                                                                 "application", "site"};
  static const std::set<std::string, std::less<>> known_arrays = {"network", "broker_fault"};
  for (const auto& [name, t] : doc.tables) {
    if (!known_tables.count(name)) {
      throw Error(ErrorCode::Configuration, fmt::format("unknown scenario table [{}]", name), name);
    }
  }
  for (const auto& [name, t] : doc.arrays) {
    if (!known_arrays.count(name)) {
      throw Error(ErrorCode::Configuration, fmt::format("unknown scenario table [[{}]]", name), name);
    }
  }
  if (!doc.root.values.empty()) {
    throw Error(ErrorCode::Configuration,
                fmt::format("key '{}' must live inside a table", doc.root.values.begin()->first));
  }

  auto table = [&](std::string_view name) -> const kv::Table* {
    auto it = doc.tables.find(name);
    return it == doc.tables.end() ? nullptr : &it->second;
  };

  if (const auto* t = table("device")) {
    Reader r(*t, "device");
    auto& s = sc.settings;
    if (auto v = r.string("device_id")) s.device_id = *v;
    if (auto v = r.number("config_window_s")) s.config_window_s = *v;
    if (auto v = r.number("sample_period_s")) s.sample_period_s = *v;
    if (auto v = r.number("time_scale")) s.time_scale = *v;
    if (auto v = r.string("topic_prefix")) s.topic_prefix = *v;
    if (auto v = r.string("broker")) s.broker_address = *v;
    sc.duration_s = r.number("duration_s");
    if (auto v = r.number("manual_ttl_s")) sc.manual_ttl_s = *v;
    if (auto v = r.string("start_utc")) {
      sc.start_utc = wrap_config<UtcTime>(r.name("start_utc"), [&] { return parse_utc(*v); });
    }
    r.finish();
    if (sc.duration_s && !(*sc.duration_s > 0)) {
      throw Error(ErrorCode::Configuration, "device.duration_s must be positive", "device.duration_s");
    }
    if (!(sc.manual_ttl_s > 0)) {
      throw Error(ErrorCode::Configuration, "device.manual_ttl_s must be positive", "device.manual_ttl_s");
    }
  }

  if (const auto* t = table("sensors")) {
    Reader r(*t, "sensors");
    const auto mode = r.string("mode").value_or("simulated");
    if (mode == "simulated") {
      sc.sensor_mode = SensorMode::Simulated;
    } else if (mode == "replay") {
      sc.sensor_mode = SensorMode::Replay;
    } else {
      throw Error(ErrorCode::Configuration, fmt::format("sensors.mode '{}' is not simulated or replay", mode),
                  "sensors.mode");
    }
    if (auto v = r.number("seed")) {
      if (*v < 0 || std::floor(*v) != *v) {
        throw Error(ErrorCode::Configuration, "sensors.seed must be a non-negative integer", "sensors.seed");
      }
      sc.seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = r.string("replay")) sc.replay_csv = existing_file(base_dir, *v, "sensors.replay");
    r.finish();
    if (sc.sensor_mode == SensorMode::Replay && sc.replay_csv.empty()) {
      throw Error(ErrorCode::Configuration, "sensors.replay is required in replay mode", "sensors.replay");
    }
  }

  if (const auto* t = table("storage")) {
    Reader r(*t, "storage");
    sc.storage_fail_after_s = r.number("fail_after_s");
    r.finish();
  }

  if (const auto* t = table("policy")) {
    Reader r(*t, "policy");
    DecisionPolicy p;
    p.sm_low = r.required_number("sm_low");
    p.sm_high = r.required_number("sm_high");
    r.finish();
    wrap_config<int>("policy", [&] { p.validate(); return 0; });
    sc.policy = p;
  }

  if (const auto* t = table("application")) {
    Reader r(*t, "application");
    ApplicationInput a;
    a.crop_name = r.required_string("crop");
    a.soil_name = r.required_string("soil");
    const auto date = r.required_string("plant_date");
    a.plant_date = wrap_config<Date>(r.name("plant_date"), [&] { return Date::parse(date); });
    a.area_m2 = r.required_number("area_m2");
    a.flow_lph = r.required_number("flow_lph");
    r.finish();
    sc.application = a;
  }

  if (const auto* t = table("site")) {
    Reader r(*t, "site");
    SiteSettings site;
    site.latitude_deg = r.required_number("latitude_deg");
    site.weather_csv = existing_file(base_dir, r.required_string("weather"), "site.weather");
    if (auto v = r.number("efficiency")) site.efficiency = *v;
    r.finish();
    if (std::abs(site.latitude_deg) >= 66.5) {
      throw Error(ErrorCode::Configuration, "site.latitude_deg must lie between the polar circles",
                  "site.latitude_deg");
    }
    if (!(site.efficiency > 0 && site.efficiency <= 1)) {
      throw Error(ErrorCode::Configuration, "site.efficiency must be in (0, 1]", "site.efficiency");
    }
    sc.site = site;
  }

  if (auto it = doc.arrays.find("network"); it != doc.arrays.end()) {
    for (const auto& t : it->second) {
      Reader r(t, "network");
      NetworkInfo n;
      n.ssid = r.required_string("ssid");
      const auto rssi = r.required_number("rssi_dbm");
      if (std::floor(rssi) != rssi) {
        throw Error(ErrorCode::Configuration, "network.rssi_dbm must be an integer", "network.rssi_dbm");
      }
      n.rssi_dbm = static_cast<int>(rssi);
      n.security = wrap_config<Security>(r.name("security"),
                                         [&] { return parse_security(r.string("security").value_or("open")); });
      n.connected = r.boolean("connected").value_or(false);
      r.finish();
      sc.networks.push_back(n);
    }
    wrap_config<int>("network", [&] { SimulatedWifi check(sc.networks); return 0; });
  }

  if (auto it = doc.arrays.find("broker_fault"); it != doc.arrays.end()) {
    for (const auto& t : it->second) {
      Reader r(t, "broker_fault");
      BrokerFault f{r.required_number("down_from_s"), r.required_number("down_until_s")};
      r.finish();
      if (!(f.down_from_s >= 0 && f.down_until_s > f.down_from_s)) {
        throw Error(ErrorCode::Configuration,
                    fmt::format("broker_fault at line {} must satisfy 0 <= down_from_s < down_until_s", t.line),
                    "broker_fault");
      }
      sc.broker_faults.push_back(f);
    }
    std::sort(sc.broker_faults.begin(), sc.broker_faults.end(),
              [](const auto& a, const auto& b) { return a.down_from_s < b.down_from_s; });
    for (std::size_t i = 1; i < sc.broker_faults.size(); ++i) {
      if (sc.broker_faults[i].down_from_s < sc.broker_faults[i - 1].down_until_s) {
        throw Error(ErrorCode::Configuration, "broker_fault intervals overlap", "broker_fault");
      }
    }
  }

  sc.settings.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  const auto text = detail::read_file(path.string(), "scenario");
  return parse_scenario(text, path.parent_path());
}

}  // namespace fieldpod
