// src/json_fields.hpp

// Copyright 2026  The svc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SVC_SRC_JSON_FIELDS_HPP_
#define SVC_SRC_JSON_FIELDS_HPP_

#include <set>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "svc/errors.hpp"

namespace svc {

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ArgumentError(what + " is not valid JSON: " + e.what());
  }
}

// Strict reader over one JSON object: typed lookups plus a final check that
// no unknown key was present.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object()) throw ArgumentError(label("") + " must be a JSON object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_same_v<V, bool>) {
      if (!it->is_boolean()) throw ArgumentError("config field '" + label(key) + "' must be a boolean");
      out = it->template get<bool>();
    } else if constexpr (std::is_integral_v<V>) {
      if (!it->is_number_integer())
        throw ArgumentError("config field '" + label(key) + "' must be an integer");
      if constexpr (std::is_unsigned_v<V>) {
        if (it->is_number_unsigned()) {
          out = it->template get<V>();
        } else {
          const auto v = it->template get<long long>();
          if (v < 0) throw ArgumentError("config field '" + label(key) + "' must be >= 0");
          out = static_cast<V>(v);
        }
      } else {
        out = it->template get<V>();
      }
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!it->is_number()) throw ArgumentError("config field '" + label(key) + "' must be a number");
      out = it->template get<V>();
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!it->is_string()) throw ArgumentError("config field '" + label(key) + "' must be a string");
      out = it->template get<std::string>();
    } else {
      try {
        out = it->template get<V>();
      } catch (const nlohmann::json::exception&) {
        throw ArgumentError("config field '" + label(key) + "' has the wrong type");
      }
    }
  }

  const nlohmann::json* object(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    if (!it->is_object()) throw ArgumentError("config field '" + label(key) + "' must be an object");
    return &*it;
  }

  const nlohmann::json* array(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    if (!it->is_array()) throw ArgumentError("config field '" + label(key) + "' must be an array");
    return &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key()))
        throw ArgumentError("unknown config field '" + label(it.key()) + "'");
    }
  }

 private:
  std::string label(const std::string& key) const {
    if (scope_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? scope_ : scope_ + "." + key;
  }

  const nlohmann::json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

}  // namespace svc

#endif  // SVC_SRC_JSON_FIELDS_HPP_
