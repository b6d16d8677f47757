#include "coldl/stats.hpp"

#include <iomanip>
#include <sstream>

#include "coldl/common.hpp"
#include <nlohmann/json.hpp>

namespace coldl {

namespace {

bool is_timing_key(const std::string& key) { return key.size() >= 3 && key.compare(key.size() - 3, 3, "_ms") == 0; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void StatsReport::set_max(const std::string& key, std::uint64_t value) {
  auto& v = counters_[key];
  if (value > v) v = value;
}

double StatsReport::get(const std::string& key) const {
  if (auto it = counters_.find(key); it != counters_.end()) return static_cast<double>(it->second);
  if (auto it = timings_.find(key); it != timings_.end()) return it->second;
  return 0.0;
}

std::uint64_t StatsReport::counter(const std::string& key) const {
  auto it = counters_.find(key);
  return it == counters_.end() ? 0 : it->second;
}

std::string StatsReport::to_text() const {
  std::map<std::string, std::string> lines;
  for (const auto& [k, v] : counters_) lines[k] = std::to_string(v);
  for (const auto& [k, v] : timings_) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    lines[k] = os.str();
  }
  std::string out;
  for (const auto& [k, v] : lines) out += k + " = " + v + "\n";
  return out;
}

std::string StatsReport::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  std::map<std::string, nlohmann::ordered_json> sorted;
  for (const auto& [k, v] : counters_) sorted[k] = v;
  for (const auto& [k, v] : timings_) sorted[k] = v;
  for (auto& [k, v] : sorted) j[k] = std::move(v);
  return j.dump(2) + "\n";
}

StatsReport StatsReport::parse(const std::string& content) {
  StatsReport out;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed stats JSON: ") + e.what());
    }
    for (const auto& [k, v] : j.items()) {
      if (!v.is_number()) throw InputError("stats value for '" + k + "' is not a number");
      if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0 && !is_timing_key(k)))
        out.counters_[k] = v.get<std::uint64_t>();
      else
        out.timings_[k] = v.get<double>();
    }
    return out;
  }
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InputError("stats line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    try {
      std::size_t used = 0;
      if (is_timing_key(key) || val.find_first_of(".eE") != std::string::npos) {
        out.timings_[key] = std::stod(val, &used);
      } else {
        out.counters_[key] = std::stoull(val, &used);
      }
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw InputError("stats line " + std::to_string(lineno) + ": bad value '" + val + "'");
    }
  }
  return out;
}

}  // namespace coldl
