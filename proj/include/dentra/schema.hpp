// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dentra/json.hpp"

namespace dentra::schema {

struct Issue {
    std::string path;  // JSON pointer
    std::string message;
};

// Checks that `document` is a well-formed schema in the supported subset:
// type, properties, required, additionalProperties, items, enum, const,
// minimum/maximum (and exclusive forms), minLength/maxLength, minItems/maxItems,
// pattern, anyOf/oneOf/allOf, plus annotation keywords. Returns the first problem.
std::optional<Issue> check_document(const json& document);

// Validates `instance` against `schema`; returns every violation, empty when valid.
std::vector<Issue> validate(const json& schema, const json& instance);

inline bool is_valid(const json& schema, const json& instance) {
    return validate(schema, instance).empty();
}

// Rewrites string-encoded scalars where the schema asks for them:
//   "0.5" -> 0.5 for number, "3" -> 3 for integer, "true"/"false" -> bool for boolean.
// Anything that does not parse cleanly is left untouched for validate() to report.
json coerce_scalars(const json& schema, json instance);

}  // namespace dentra::schema
