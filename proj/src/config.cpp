#include "gbml/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace gbml::expcli {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> table{
      {"seed", "0"},
      {"trials", "100"},
      {"out", "out"},
      {"checkpoint", ""},

      {"cert.bins", "5"},
      {"cert.label_dim", "1"},
      {"cert.epsilon", "1e-6"},
      {"cert.alpha", "1e-3"},
      {"cert.domain_lo", "-1"},
      {"cert.domain_hi", "1"},
      {"cert.kernel", "symmetric"},
      {"cert.selector_offset", "0"},

      {"maml.alpha", "0.001"},
      {"maml.inner_steps", "5"},
      {"maml.meta_batch", "25"},
      {"maml.meta_iterations", "10000"},
      {"maml.k_shot", "5"},
      {"maml.query_size", "10"},
      {"maml.hidden", "100,100"},
      {"maml.bias_transform_dim", "10"},
      {"maml.outer_lr", "0.001"},
      {"maml.loss", "half_squared"},
      {"maml.first_order", "0"},
      {"maml.log_interval", "100"},

      {"sinusoid.amp_lo", "0.1"},
      {"sinusoid.amp_hi", "5"},
      {"sinusoid.phase_lo", "0"},
      {"sinusoid.phase_hi", "3.141592653589793"},
      {"sinusoid.input_lo", "-5"},
      {"sinusoid.input_hi", "5"},

      {"eval.query_size", "100"},
      {"eval.steps", "10"},

      {"finetune.max_steps", "100"},
      {"finetune.alpha", "0.001"},
      {"finetune.scratch_optimizer", "adam"},
      {"finetune.scratch_lr", "0.03"},

      {"ood.axis", "amplitude"},
      {"ood.grid", "5,6,7,8,9,10"},
      {"ood.steps", "5"},

      {"depth.depths", "1,2,3,4,5"},
      {"depth.seeds", "3"},
      {"depth.target_params", "40000"},
      {"depth.alpha", "0.001"},
      {"depth.meta_iterations", "2500"},
      {"depth.meta_batch", "10"},
      {"depth.k_shot", "40"},
      {"depth.query_size", "40"},
      {"depth.outer_lr", "0.001"},
      {"depth.oracle_iterations", "5000"},
      {"depth.oracle_lr", "0.01"},
      {"depth.oracle_lr_final", "0"},
      {"depth.oracle_batch", "25"},
      {"depth.oracle_points", "20"},
      {"depth.eval_tasks", "50"},

      {"dump.family", "sinusoid"},
      {"dump.count", "10"},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a finite number");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a non-negative integer");
  }
  return v;
}

}  // namespace

Config::Config() : values_(defaults()) {}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void Config::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::parse(std::istream& is, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (!values_.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    values_[key] = trim(line.substr(eq + 1));
  }
}

void Config::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  parse(is, path.string());
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double Config::number(const std::string& key) const { return parse_double(key, raw(key)); }

std::size_t Config::count(const std::string& key) const {
  return static_cast<std::size_t>(parse_unsigned(key, raw(key)));
}

std::uint64_t Config::seed() const { return parse_unsigned("seed", raw("seed")); }

bool Config::flag(const std::string& key) const {
  const auto& v = raw(key);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<double> Config::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(raw(key), ',')) out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::size_t> Config::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split(raw(key), ',')) {
    out.push_back(static_cast<std::size_t>(parse_unsigned(key, item)));
  }
  return out;
}

std::string Config::snapshot() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (!out.empty()) out += ' ';
    out += k + "=" + v;
  }
  return out;
}

}  // namespace gbml::expcli
