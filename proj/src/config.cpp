#include "cavlock/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cavlock/error.hpp"

namespace cavlock {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "g", "kappa", "gamma", "gamma_d", "gamma_p", "n_atoms", "alpha_in_sq",
      "alpha_in_sq_over_I0", "theta", "NC_eff", "units",
      "axis1", "axis2", "outputs", "normalize_linewidth", "folds", "threads",
      "omega_min", "omega_max", "n_omega", "T",
      "seed", "dt", "duration", "n_trajectories", "welch_segment", "record_stride",
      "ugf", "bare_psd"};
  return keys;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Config Config::parse(const std::string& text, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  const auto& known = known_config_keys();
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(line);
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, where + ": expected `name = value`, got `" + body + "`");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!valid_key(key)) {
      throw Error(ErrorCode::ParseError, where + ": malformed key `" + key + "`");
    }
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::ParseError, where + ": unknown key `" + key + "`");
    }
    if (value.empty()) throw Error(ErrorCode::ParseError, where + ": key `" + key + "` has no value");
    if (cfg.entries_.count(key)) {
      throw Error(ErrorCode::ParseError, where + ": duplicate key `" + key + "`");
    }
    cfg.entries_[key] = ConfigEntry{value, line};
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::optional<double> Config::number(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  const std::string& v = it->second.value;
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw Error(ErrorCode::ParseError, source_ + ":" + std::to_string(it->second.line) +
                                           ": key `" + key + "` expects a number, got `" + v + "`");
  }
  return out;
}

std::optional<std::string> Config::text(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

void Config::set(const std::string& key, const std::string& value) {
  entries_[key] = ConfigEntry{value, 0};
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, e] : entries_) out += k + " = " + e.value + "\n";
  return out;
}

std::uint64_t Config::hash() const { return fnv1a64(canonical()); }

}  // namespace cavlock
