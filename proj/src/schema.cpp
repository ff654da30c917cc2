// SPDX-License-Identifier: Apache-2.0
#include "dentra/schema.hpp"

#include <charconv>
#include <cmath>
#include <regex>
#include <set>

#include "dentra/text.hpp"

namespace dentra::schema {

namespace {

const std::set<std::string> kTypes = {"null", "boolean", "object", "array",
                                      "number", "integer", "string"};

const std::set<std::string> kAnnotations = {"$schema", "$id", "$comment", "title",
                                            "description", "default", "examples",
                                            "format", "readOnly", "writeOnly", "deprecated"};

std::string escape_pointer(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out.push_back(c);
    }
    return out;
}

std::string child(const std::string& path, const std::string& key) {
    return path + "/" + escape_pointer(key);
}

std::string child(const std::string& path, std::size_t index) {
    return path + "/" + std::to_string(index);
}

bool is_non_negative_int(const json& v) {
    return (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0));
}

std::optional<Issue> check_at(const json& s, const std::string& path) {
    if (s.is_boolean()) return std::nullopt;
    if (!s.is_object()) return Issue{path, "schema must be an object or boolean"};

    for (auto it = s.begin(); it != s.end(); ++it) {
        const std::string& key = it.key();
        const json& v = it.value();
        const std::string at = child(path, key);
        if (key == "type") {
            if (v.is_string()) {
                if (!kTypes.count(v.get<std::string>()))
                    return Issue{at, "unknown type \"" + v.get<std::string>() + "\""};
            } else if (v.is_array() && !v.empty()) {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (!v[i].is_string() || !kTypes.count(v[i].get<std::string>()))
                        return Issue{child(at, i), "unknown type"};
                }
            } else {
                return Issue{at, "type must be a string or non-empty array"};
            }
        } else if (key == "properties") {
            if (!v.is_object()) return Issue{at, "properties must be an object"};
            for (auto p = v.begin(); p != v.end(); ++p) {
                if (auto issue = check_at(p.value(), child(at, p.key()))) return issue;
            }
        } else if (key == "required") {
            if (!v.is_array()) return Issue{at, "required must be an array"};
            std::set<std::string> seen;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!v[i].is_string()) return Issue{child(at, i), "required entries must be strings"};
                if (!seen.insert(v[i].get<std::string>()).second)
                    return Issue{child(at, i), "duplicate required entry"};
            }
        } else if (key == "additionalProperties" || key == "items" || key == "not") {
            if (auto issue = check_at(v, at)) return issue;
        } else if (key == "anyOf" || key == "oneOf" || key == "allOf") {
            if (!v.is_array() || v.empty()) return Issue{at, key + " must be a non-empty array"};
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (auto issue = check_at(v[i], child(at, i))) return issue;
            }
        } else if (key == "enum") {
            if (!v.is_array() || v.empty()) return Issue{at, "enum must be a non-empty array"};
        } else if (key == "const") {
            // any value
        } else if (key == "minimum" || key == "maximum" || key == "exclusiveMinimum" ||
                   key == "exclusiveMaximum") {
            if (!v.is_number()) return Issue{at, key + " must be a number"};
        } else if (key == "minLength" || key == "maxLength" || key == "minItems" ||
                   key == "maxItems") {
            if (!is_non_negative_int(v)) return Issue{at, key + " must be a non-negative integer"};
        } else if (key == "pattern") {
            if (!v.is_string()) return Issue{at, "pattern must be a string"};
            try {
                std::regex re(v.get<std::string>(), std::regex::ECMAScript);
            } catch (const std::regex_error&) {
                return Issue{at, "pattern is not a valid regular expression"};
            }
        } else if (kAnnotations.count(key)) {
            // annotation only
        } else {
            return Issue{at, "unsupported keyword \"" + key + "\""};
        }
    }
    return std::nullopt;
}

bool type_matches(const std::string& type, const json& v) {
    if (type == "null") return v.is_null();
    if (type == "boolean") return v.is_boolean();
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") {
        if (v.is_number_integer()) return true;
        if (v.is_number_float()) {
            const double d = v.get<double>();
            return std::isfinite(d) && std::floor(d) == d;
        }
        return false;
    }
    return false;
}

std::vector<std::string> declared_types(const json& s) {
    if (!s.is_object() || !s.contains("type")) return {};
    const json& t = s["type"];
    if (t.is_string()) return {t.get<std::string>()};
    std::vector<std::string> out;
    for (const auto& e : t) out.push_back(e.get<std::string>());
    return out;
}

void validate_at(const json& s, const json& v, const std::string& path,
                 std::vector<Issue>& issues) {
    if (s.is_boolean()) {
        if (!s.get<bool>()) issues.push_back({path, "no value is allowed here"});
        return;
    }
    if (!s.is_object()) return;

    if (auto types = declared_types(s); !types.empty()) {
        bool any = false;
        for (const auto& t : types) any = any || type_matches(t, v);
        if (!any) {
            std::string expected;
            for (const auto& t : types) expected += (expected.empty() ? "" : "|") + t;
            issues.push_back({path, "expected " + expected + ", got " + v.type_name()});
            return;
        }
    }
    if (s.contains("enum")) {
        bool found = false;
        for (const auto& e : s["enum"]) found = found || e == v;
        if (!found) issues.push_back({path, "value not in enum"});
    }
    if (s.contains("const") && s["const"] != v) issues.push_back({path, "value differs from const"});

    if (v.is_number()) {
        const double d = v.get<double>();
        if (s.contains("minimum") && d < s["minimum"].get<double>())
            issues.push_back({path, "below minimum"});
        if (s.contains("maximum") && d > s["maximum"].get<double>())
            issues.push_back({path, "above maximum"});
        if (s.contains("exclusiveMinimum") && d <= s["exclusiveMinimum"].get<double>())
            issues.push_back({path, "not above exclusiveMinimum"});
        if (s.contains("exclusiveMaximum") && d >= s["exclusiveMaximum"].get<double>())
            issues.push_back({path, "not below exclusiveMaximum"});
    }
    if (v.is_string()) {
        const auto& str = v.get_ref<const std::string&>();
        std::size_t length = 0;
        for (std::size_t pos = 0; pos < str.size(); ++length) text::next_code_point(str, pos);
        if (s.contains("minLength") && length < s["minLength"].get<std::size_t>())
            issues.push_back({path, "shorter than minLength"});
        if (s.contains("maxLength") && length > s["maxLength"].get<std::size_t>())
            issues.push_back({path, "longer than maxLength"});
        if (s.contains("pattern")) {
            std::regex re(s["pattern"].get<std::string>(), std::regex::ECMAScript);
            if (!std::regex_search(str, re)) issues.push_back({path, "does not match pattern"});
        }
    }
    if (v.is_array()) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
            issues.push_back({path, "fewer than minItems"});
        if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
            issues.push_back({path, "more than maxItems"});
        if (s.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i)
                validate_at(s["items"], v[i], child(path, i), issues);
        }
    }
    if (v.is_object()) {
        if (s.contains("required")) {
            for (const auto& r : s["required"]) {
                const auto key = r.get<std::string>();
                if (!v.contains(key)) issues.push_back({child(path, key), "required property missing"});
            }
        }
        const json* props = s.contains("properties") ? &s["properties"] : nullptr;
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (props && props->contains(it.key())) {
                validate_at((*props)[it.key()], it.value(), child(path, it.key()), issues);
            } else if (s.contains("additionalProperties")) {
                validate_at(s["additionalProperties"], it.value(), child(path, it.key()), issues);
            }
        }
    }
    if (s.contains("allOf")) {
        for (const auto& sub : s["allOf"]) validate_at(sub, v, path, issues);
    }
    if (s.contains("anyOf")) {
        bool any = false;
        for (const auto& sub : s["anyOf"]) {
            std::vector<Issue> local;
            validate_at(sub, v, path, local);
            any = any || local.empty();
        }
        if (!any) issues.push_back({path, "matches none of anyOf"});
    }
    if (s.contains("oneOf")) {
        int matches = 0;
        for (const auto& sub : s["oneOf"]) {
            std::vector<Issue> local;
            validate_at(sub, v, path, local);
            matches += local.empty() ? 1 : 0;
        }
        if (matches != 1) issues.push_back({path, "must match exactly one of oneOf"});
    }
    if (s.contains("not")) {
        std::vector<Issue> local;
        validate_at(s["not"], v, path, local);
        if (local.empty()) issues.push_back({path, "matches a forbidden schema"});
    }
}

std::optional<json> parse_number(const std::string& raw, bool integer_only) {
    const std::string t = text::trim(raw);
    if (t.empty()) return std::nullopt;
    if (integer_only) {
        long long value = 0;
        auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec != std::errc{} || end != t.data() + t.size()) return std::nullopt;
        return json(value);
    }
    double value = 0;
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || end != t.data() + t.size() || !std::isfinite(value))
        return std::nullopt;
    return json(value);
}

}  // namespace

std::optional<Issue> check_document(const json& document) {
    if (!document.is_object() && !document.is_boolean())
        return Issue{"", "schema must be an object or boolean"};
    return check_at(document, "");
}

std::vector<Issue> validate(const json& schema, const json& instance) {
    std::vector<Issue> issues;
    validate_at(schema, instance, "", issues);
    return issues;
}

json coerce_scalars(const json& schema, json instance) {
    if (!schema.is_object()) return instance;
    const auto types = declared_types(schema);
    auto accepts = [&](const char* t) {
        for (const auto& x : types)
            if (x == t) return true;
        return false;
    };
    if (instance.is_string() && !types.empty() && !accepts("string")) {
        const auto raw = instance.get<std::string>();
        if (accepts("integer")) {
            if (auto n = parse_number(raw, true)) return *n;
        }
        if (accepts("number")) {
            if (auto n = parse_number(raw, false)) return *n;
        }
        if (accepts("boolean")) {
            const auto lower = text::to_lower(text::trim(raw));
            if (lower == "true") return true;
            if (lower == "false") return false;
        }
        return instance;
    }
    if (instance.is_object() && schema.contains("properties")) {
        const json& props = schema["properties"];
        for (auto it = instance.begin(); it != instance.end(); ++it) {
            if (props.contains(it.key())) it.value() = coerce_scalars(props[it.key()], it.value());
        }
    }
    if (instance.is_array() && schema.contains("items")) {
        for (auto& e : instance) e = coerce_scalars(schema["items"], e);
    }
    return instance;
}

}  // namespace dentra::schema
