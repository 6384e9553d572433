#pragma once

#include "tats/error.hpp"

#include <set>
#include <string>

#include <nlohmann/json.hpp>

namespace tats {

using Json = nlohmann::json;

// Reads optional fields from a JSON object and rejects keys nobody asked for.
class StrictReader {
 public:
  StrictReader(const Json& object, std::string context) : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
  }

  template <class T>
  StrictReader& read(const char* key, T& value) {
    seen_.insert(key);
    if (auto it = object_.find(key); it != object_.end()) {
      try {
        value = it->template get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(context_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : object_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(context_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const Json& object_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace tats
