#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mono3d/common.hpp"

namespace mono3d {

// Flat key=value configuration with a closed key registry. Unknown keys are
// rejected; every key has a documented default. Values stay strings until a
// typed getter parses them.
class RunConfig {
 public:
  RunConfig();  // defaults only

  void load_file(const std::string& path);
  void parse_stream(const std::string& text, const std::string& origin);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;
  std::vector<std::string> get_names(const std::string& key) const;

  // Anchor scale list; accepts an explicit list or the tokens
  // "exp16"/"exp12" for the exponential height table.
  std::vector<double> scales() const;

  // Effective configuration, reloadable through parse_stream.
  std::string dump() const;
  static std::string documented_defaults();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mono3d
