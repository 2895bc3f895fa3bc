#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace mdn {

inline constexpr const char* kToolName = "mdn";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kManifestFormatVersion = 1;

// FNV-1a 64-bit digest of a file's bytes, as 16 hex chars.
std::string fnv1a64_file(const std::string& path);

// Every command writes a manifest next to its outputs. Manifests carry no
// timestamps; reruns with equal inputs produce byte-identical manifests and
// outputs.
struct RunManifest {
    std::string command;
    nlohmann::json options;  // resolved configuration, flag values included
    nlohmann::json seeds;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
    std::vector<std::string> outputs;

    void add_input(const std::string& path);
    nlohmann::json to_json() const;
    void save(const std::string& path) const;
};

}  // namespace mdn
