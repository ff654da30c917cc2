// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dentra {

struct Artifact {
    std::string id;  // sha256 hex of the bytes
    std::string media_type;
    std::vector<std::uint8_t> bytes;
};

// Content-addressed store for uploaded images and tool outputs. Identical bytes
// share one id. Optionally mirrored to a directory (<id>.bin plus <id>.type).
class ArtifactStore {
public:
    explicit ArtifactStore(std::optional<std::filesystem::path> dir = std::nullopt);

    std::string put(std::span<const std::uint8_t> bytes, std::string media_type);
    std::optional<Artifact> get(const std::string& id) const;
    bool contains(const std::string& id) const;
    std::size_t size() const;

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mu_;
    std::map<std::string, Artifact> items_;
};

}  // namespace dentra
