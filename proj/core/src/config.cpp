#include "pcdiff/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>

#include "pcdiff/csv.hpp"

namespace pcdiff {

namespace {

struct KeySpec {
  std::string key;
  std::string default_value;
  std::function<void(const std::string& key, const std::string& value)> check;
};

double as_double(const std::string& key, const std::string& v) {
  try {
    const double d = parse_double(v);
    if (!std::isfinite(d)) throw ConfigError(key, "value must be finite");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

std::int64_t as_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::size_t> as_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& f : split_csv_line(v)) {
    const auto n = as_int(key, f);
    if (n < 1) throw ConfigError(key, "layer widths must be >= 1");
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

auto int_at_least(std::int64_t lo) {
  return [lo](const std::string& k, const std::string& v) {
    if (as_int(k, v) < lo) throw ConfigError(k, "must be >= " + std::to_string(lo));
  };
}

auto positive_double() {
  return [](const std::string& k, const std::string& v) {
    if (!(as_double(k, v) > 0.0)) throw ConfigError(k, "must be > 0");
  };
}

auto open_unit_interval() {
  return [](const std::string& k, const std::string& v) {
    const double d = as_double(k, v);
    if (!(d > 0.0 && d < 1.0)) throw ConfigError(k, "must lie in (0, 1)");
  };
}

auto one_of(std::vector<std::string> options) {
  return [options](const std::string& k, const std::string& v) {
    if (std::find(options.begin(), options.end(), v) == options.end()) {
      std::string list;
      for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
      throw ConfigError(k, "must be one of {" + list + "}, got '" + v + "'");
    }
  };
}

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> table = {
      {"schedule.T", "50", int_at_least(2)},
      {"schedule.beta_start", "0.0001", open_unit_interval()},
      {"schedule.beta_end", "0.02", open_unit_interval()},
      {"train.steps", "5000", int_at_least(1)},
      {"train.batch", "128", int_at_least(1)},
      {"train.lr", "0.001", positive_double()},
      {"train.ema", "0.995",
       [](const std::string& k, const std::string& v) {
         const double d = as_double(k, v);
         if (!(d >= 0.0 && d < 1.0)) throw ConfigError(k, "must lie in [0, 1)");
       }},
      {"model.hidden", "64,64,64", [](const std::string& k, const std::string& v) { as_sizes(k, v); }},
      {"classifier.steps", "2000", int_at_least(1)},
      {"classifier.batch", "64", int_at_least(1)},
      {"classifier.lr", "0.0001", positive_double()},
      {"classifier.hidden", "32,32", [](const std::string& k, const std::string& v) { as_sizes(k, v); }},
      {"classifier.time_conditioned", "true", [](const std::string& k, const std::string& v) { as_bool(k, v); }},
      {"pc.beta", "0.1", positive_double()},
      {"pc.shared_noise", "false", [](const std::string& k, const std::string& v) { as_bool(k, v); }},
      {"guidance.gamma", "1.0",
       [](const std::string& k, const std::string& v) {
         if (as_double(k, v) < 0.0) throw ConfigError(k, "must be >= 0");
       }},
      {"guidance.M", "5", int_at_least(0)},
      {"guidance.rejection", "true", [](const std::string& k, const std::string& v) { as_bool(k, v); }},
      {"guidance.policy", "capped", one_of({"capped", "uncapped"})},
      {"data.task", "two_mode", one_of({"two_mode", "two_mode_1d", "two_moons"})},
      {"data.n", "10000", int_at_least(2)},
      {"data.pairs", "4000", int_at_least(1)},
      {"sample.n", "1000", int_at_least(1)},
      {"seed", "7", int_at_least(0)},
  };
  return table;
}

const KeySpec& spec_for(const std::string& key) {
  for (const auto& s : specs()) {
    if (s.key == key) return s;
  }
  throw ConfigError(key, "unknown configuration key");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config::Config() {
  for (const auto& s : specs()) values_[s.key] = s.default_value;
}

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : specs()) k.push_back(s.key);
    return k;
  }();
  return keys;
}

void Config::set(const std::string& key, const std::string& value) {
  const KeySpec& s = spec_for(key);
  s.check(key, value);
  values_[key] = value;
  explicit_.insert(key);
}

Config Config::parse(std::istream& is) {
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  return parse(is);
}

std::string Config::get_string(const std::string& key) const {
  spec_for(key);
  return values_.at(key);
}

double Config::get_double(const std::string& key) const { return as_double(key, get_string(key)); }
std::int64_t Config::get_int(const std::string& key) const { return as_int(key, get_string(key)); }
bool Config::get_bool(const std::string& key) const { return as_bool(key, get_string(key)); }
std::vector<std::size_t> Config::get_sizes(const std::string& key) const { return as_sizes(key, get_string(key)); }

void Config::validate() const {
  if (get_double("schedule.beta_start") > get_double("schedule.beta_end")) {
    throw ConfigError("schedule.beta_start", "must be <= schedule.beta_end");
  }
}

}  // namespace pcdiff
