#include "cpof/run_config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace cpof {

ConfigError::ConfigError(std::size_t line, const std::string& message)
    : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

double to_double(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE) throw ParameterError("expected a number, got '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParameterError("expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParameterError("expected true or false, got '" + s + "'");
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Background parse_background(const std::string& v) {
  const auto parts = split(v, ':');
  if (parts.size() == 2 && parts[0] == "flat") return FlatBackground{to_double(parts[1])};
  if (parts.size() == 4 && parts[0] == "textured") {
    return TexturedBackground{to_double(parts[1]), to_double(parts[2]), to_double(parts[3])};
  }
  throw ParameterError("background must be flat:<level> or textured:<corr_len>:<amplitude>:<mean>");
}

Placements parse_placements(const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) throw ParameterError("placements must start with fixed:, labels: or count:");
  const std::string kind = v.substr(0, colon);
  const std::string rest = v.substr(colon + 1);
  if (kind == "labels") return RandomLabels{split(rest, ',')};
  if (kind == "count") {
    const auto parts = split(rest, ':');
    if (parts.size() != 2) throw ParameterError("placements count form is count:<min>-<max>:<label>,<label>");
    const auto range = split(parts[0], '-');
    if (range.size() != 2) throw ParameterError("count range must be <min>-<max>");
    return RandomCount{to_uint(range[0]), to_uint(range[1]), split(parts[1], ',')};
  }
  if (kind == "fixed") {
    std::vector<Placement> out;
    for (const std::string& item : split(rest, ';')) {
      const auto at = item.find('@');
      const auto comma = item.find(',', at == std::string::npos ? 0 : at);
      if (at == std::string::npos || comma == std::string::npos) {
        throw ParameterError("fixed placement must be <label>@<row>,<col>");
      }
      out.push_back(Placement{trim(item.substr(0, at)), to_uint(trim(item.substr(at + 1, comma - at - 1))),
                              to_uint(trim(item.substr(comma + 1)))});
    }
    return out;
  }
  throw ParameterError("unknown placements kind '" + kind + "'");
}

std::string format_placements(const Placements& p) {
  std::string out;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  if (const auto* fixed = std::get_if<std::vector<Placement>>(&p)) {
    out = "fixed:";
    for (std::size_t i = 0; i < fixed->size(); ++i) {
      const auto& q = (*fixed)[i];
      out += (i ? ";" : "") + q.label + "@" + std::to_string(q.row) + "," + std::to_string(q.col);
    }
  } else if (const auto* labels = std::get_if<RandomLabels>(&p)) {
    out = "labels:" + join(labels->labels);
  } else {
    const auto& rc = std::get<RandomCount>(p);
    out = "count:" + std::to_string(rc.min_count) + "-" + std::to_string(rc.max_count) + ":" + join(rc.pool);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"side", [](ExperimentConfig& c, const std::string& v) { c.scene.side = to_uint(v); }},
      {"background", [](ExperimentConfig& c, const std::string& v) { c.scene.background = parse_background(v); }},
      {"placements", [](ExperimentConfig& c, const std::string& v) { c.scene.placements = parse_placements(v); }},
      {"bit_depth", [](ExperimentConfig& c, const std::string& v) { c.scene.bit_depth = static_cast<int>(to_uint(v)); }},
      {"dictionary", [](ExperimentConfig& c, const std::string& v) { c.dictionary = split(v, ','); }},
      {"basis", [](ExperimentConfig& c, const std::string& v) { c.basis = parse_basis(v); }},
      {"mode", [](ExperimentConfig& c, const std::string& v) { c.mode = parse_mode(v); }},
      {"rho_grid",
       [](ExperimentConfig& c, const std::string& v) {
         c.rho_grid.clear();
         for (const auto& item : split(v, ',')) c.rho_grid.push_back(to_double(item));
       }},
      {"snr_db", [](ExperimentConfig& c, const std::string& v) { c.snr_db = to_double(v); }},
      {"trials_per_point", [](ExperimentConfig& c, const std::string& v) { c.trials_per_point = to_uint(v); }},
      {"base_seed", [](ExperimentConfig& c, const std::string& v) { c.base_seed = to_uint(v); }},
      {"scene_seed",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "per-trial") {
           c.scene_seed.reset();
         } else {
           c.scene_seed = to_uint(v);
         }
       }},
      {"radius", [](ExperimentConfig& c, const std::string& v) { c.radius = to_double(v); }},
      {"exclusion_radius", [](ExperimentConfig& c, const std::string& v) { c.exclusion_radius = to_double(v); }},
      {"known_count", [](ExperimentConfig& c, const std::string& v) { c.known_count = to_bool(v); }},
      {"binary_differential", [](ExperimentConfig& c, const std::string& v) { c.binary_differential = to_bool(v); }},
      {"residual_floor_db", [](ExperimentConfig& c, const std::string& v) { c.residual_floor_db = to_double(v); }},
      {"tol", [](ExperimentConfig& c, const std::string& v) { c.solver.tol = to_double(v); }},
      {"pg_tol", [](ExperimentConfig& c, const std::string& v) { c.solver.pg_tol_factor = to_double(v); }},
      {"max_iter", [](ExperimentConfig& c, const std::string& v) { c.solver.max_iter = static_cast<int>(to_uint(v)); }},
      {"sigma_tol", [](ExperimentConfig& c, const std::string& v) { c.solver.sigma_tol = to_double(v); }},
      {"max_newton",
       [](ExperimentConfig& c, const std::string& v) { c.solver.max_newton = static_cast<int>(to_uint(v)); }},
  };
  return table;
}

std::string serialize(const ExperimentConfig& c, bool with_trials) {
  std::ostringstream os;
  os << "side = " << c.scene.side << '\n';
  if (const auto* flat_bg = std::get_if<FlatBackground>(&c.scene.background)) {
    os << "background = flat:" << fmt(flat_bg->level) << '\n';
  } else {
    const auto& t = std::get<TexturedBackground>(c.scene.background);
    os << "background = textured:" << fmt(t.correlation_length) << ':' << fmt(t.amplitude) << ':' << fmt(t.mean)
       << '\n';
  }
  os << "placements = " << format_placements(c.scene.placements) << '\n';
  os << "bit_depth = " << c.scene.bit_depth << '\n';
  os << "dictionary = ";
  for (std::size_t i = 0; i < c.dictionary.size(); ++i) os << (i ? "," : "") << c.dictionary[i];
  os << '\n';
  os << "basis = " << to_string(c.basis) << '\n';
  os << "mode = " << to_string(c.mode) << '\n';
  os << "rho_grid = ";
  for (std::size_t i = 0; i < c.rho_grid.size(); ++i) os << (i ? "," : "") << fmt(c.rho_grid[i]);
  os << '\n';
  os << "snr_db = " << fmt(c.snr_db) << '\n';
  if (with_trials) os << "trials_per_point = " << c.trials_per_point << '\n';
  os << "base_seed = " << c.base_seed << '\n';
  os << "scene_seed = " << (c.scene_seed ? std::to_string(*c.scene_seed) : std::string("per-trial")) << '\n';
  os << "radius = " << fmt(c.radius) << '\n';
  os << "exclusion_radius = " << fmt(c.exclusion_radius) << '\n';
  os << "known_count = " << (c.known_count ? "true" : "false") << '\n';
  os << "binary_differential = " << (c.binary_differential ? "true" : "false") << '\n';
  os << "residual_floor_db = " << fmt(c.residual_floor_db) << '\n';
  os << "tol = " << fmt(c.solver.tol) << '\n';
  os << "pg_tol = " << fmt(c.solver.pg_tol_factor) << '\n';
  os << "max_iter = " << c.solver.max_iter << '\n';
  os << "sigma_tol = " << fmt(c.solver.sigma_tol) << '\n';
  os << "max_newton = " << c.solver.max_newton << '\n';
  return os.str();
}

}  // namespace

ExperimentConfig parse_run_config(std::istream& is) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(line_no, "duplicate key '" + key + "'");
    try {
      it->second(config, value);
    } catch (const Error& e) {
      throw ConfigError(line_no, key + ": " + e.what());
    }
  }
  try {
    validate(config);
  } catch (const Error& e) {
    throw ConfigError(0, e.what());
  }
  return config;
}

ExperimentConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(0, "cannot open config file " + path.string());
  return parse_run_config(is);
}

void write_run_config(std::ostream& os, const ExperimentConfig& config) { os << serialize(config, true); }

std::uint64_t config_fingerprint(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : serialize(config, false)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cpof
