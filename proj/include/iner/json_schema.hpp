#pragma once

// A deliberately small structural checker for the JSON schema subset the
// shipped schema files use: type, properties, required, items, enum,
// additionalProperties.

#include <string>

#include "json.hpp"

namespace iner {

namespace detail {

inline bool type_matches(const nlohmann::json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "number") return value.is_number();
  if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
  if (type == "boolean") return value.is_boolean();
  if (type == "null") return value.is_null();
  return false;
}

inline bool validate_at(const nlohmann::json& value, const nlohmann::json& schema,
                        const std::string& path, std::string* error) {
  auto fail = [&](const std::string& why) {
    if (error) *error = path + ": " + why;
    return false;
  };

  if (schema.contains("type") && !type_matches(value, schema["type"].get<std::string>()))
    return fail("expected type " + schema["type"].get<std::string>());

  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& allowed : schema["enum"]) ok |= allowed == value;
    if (!ok) return fail("value not in enum");
  }

  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!value.contains(key.get<std::string>()))
          return fail("missing required key '" + key.get<std::string>() + "'");
    const nlohmann::json* props = schema.contains("properties") ? &schema["properties"] : nullptr;
    for (auto it = value.begin(); it != value.end(); ++it) {
      if (props && props->contains(it.key())) {
        if (!validate_at(it.value(), (*props)[it.key()], path + "/" + it.key(), error))
          return false;
      } else if (schema.contains("additionalProperties")) {
        const auto& ap = schema["additionalProperties"];
        if (ap.is_boolean() && !ap.get<bool>())
          return fail("unexpected key '" + it.key() + "'");
        if (ap.is_object() && !validate_at(it.value(), ap, path + "/" + it.key(), error))
          return false;
      }
    }
  }

  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i)
      if (!validate_at(value[i], schema["items"], path + "/" + std::to_string(i), error))
        return false;
  }
  return true;
}

}  // namespace detail

inline bool validate_json_schema(const nlohmann::json& instance, const nlohmann::json& schema,
                                 std::string* error = nullptr) {
  return detail::validate_at(instance, schema, "$", error);
}

}  // namespace iner
