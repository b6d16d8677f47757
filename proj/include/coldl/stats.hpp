#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace coldl {

/// Named run counters and timings. Counters only grow during a run.
class StatsReport {
 public:
  void add(const std::string& key, std::uint64_t delta = 1) { counters_[key] += delta; }
  void set_max(const std::string& key, std::uint64_t value);
  void set(const std::string& key, std::uint64_t value) { counters_[key] = value; }
  void add_time(const std::string& key, double ms) { timings_[key] += ms; }

  /// Counter or timing value; 0 for an absent key.
  double get(const std::string& key) const;
  std::uint64_t counter(const std::string& key) const;
  bool has(const std::string& key) const { return counters_.count(key) || timings_.count(key); }

  const std::map<std::string, std::uint64_t>& counters() const noexcept { return counters_; }
  const std::map<std::string, double>& timings() const noexcept { return timings_; }

  /// `key = value` lines sorted by key.
  std::string to_text() const;
  std::string to_json() const;
  /// Accepts either format. Throws InputError on malformed content.
  static StatsReport parse(const std::string& content);

 private:
  std::map<std::string, std::uint64_t> counters_;
  std::map<std::string, double> timings_;
};

}  // namespace coldl
