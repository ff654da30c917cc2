// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dentra {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invariant violations on domain values; `fields` lists every offending field.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> fields)
        : Error("validation failed: " + join(fields)), fields_(std::move(fields)) {}
    ValidationError(std::string field, const std::string& message)
        : Error("validation failed: " + field + ": " + message), fields_{std::move(field)} {}

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    static std::string join(const std::vector<std::string>& parts) {
        std::string out;
        for (const auto& p : parts) {
            if (!out.empty()) out += "; ";
            out += p;
        }
        return out;
    }
    std::vector<std::string> fields_;
};

// JSON-schema problems; `path` is a JSON pointer into the schema or instance.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& message)
        : Error("schema error at \"" + path + "\": " + message), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

class CorruptFileError : public Error {
public:
    using Error::Error;
};

class GatewayError : public Error {
public:
    enum class Kind { unreachable, timeout, http_status, malformed, dimension_mismatch };

    GatewayError(Kind kind, const std::string& message, int http_status = 0)
        : Error(message), kind_(kind), http_status_(http_status) {}

    Kind kind() const noexcept { return kind_; }
    int http_status() const noexcept { return http_status_; }

private:
    Kind kind_;
    int http_status_;
};

}  // namespace dentra
