// SPDX-License-Identifier: Apache-2.0
#include "dentra/artifacts.hpp"

#include <fstream>
#include <iterator>

#include "dentra/crypto.hpp"

namespace dentra {

namespace fs = std::filesystem;

ArtifactStore::ArtifactStore(std::optional<fs::path> dir) : dir_(std::move(dir)) {
    if (dir_) fs::create_directories(*dir_);
}

std::string ArtifactStore::put(std::span<const std::uint8_t> bytes, std::string media_type) {
    std::string id = crypto::sha256_hex(bytes);
    std::lock_guard lock(mu_);
    if (items_.count(id)) return id;
    if (dir_) {
        std::ofstream(*dir_ / (id + ".bin"), std::ios::binary)
            .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        std::ofstream(*dir_ / (id + ".type")) << media_type;
    }
    items_.emplace(id, Artifact{id, std::move(media_type), {bytes.begin(), bytes.end()}});
    return id;
}

std::optional<Artifact> ArtifactStore::get(const std::string& id) const {
    std::lock_guard lock(mu_);
    if (auto it = items_.find(id); it != items_.end()) return it->second;
    if (!dir_ || id.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
    std::ifstream bin(*dir_ / (id + ".bin"), std::ios::binary);
    if (!bin) return std::nullopt;
    Artifact a{id, "application/octet-stream", {std::istreambuf_iterator<char>(bin), {}}};
    std::ifstream type(*dir_ / (id + ".type"));
    if (type) std::getline(type, a.media_type);
    return a;
}

bool ArtifactStore::contains(const std::string& id) const { return get(id).has_value(); }

std::size_t ArtifactStore::size() const {
    std::lock_guard lock(mu_);
    return items_.size();
}

}  // namespace dentra
