#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

namespace iongate {

/// Reject documents carrying keys outside the schema.
inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
  if (!j.is_object()) throw std::invalid_argument(context + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw std::invalid_argument(context + ": unknown key \"" + it.key() + "\"");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T def) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return def;
  return it->get<T>();
}

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& required,
                         const std::string& context) {
  for (const auto& k : required)
    if (!j.contains(k))
      throw std::invalid_argument(context + ": missing required key \"" + k + "\"");
}

}  // namespace iongate
