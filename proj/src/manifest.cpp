#include "mdn/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mdn {

std::string fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fnv1a64_file: cannot open " + path);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, fnv1a64_file(path));
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["format_version"] = kManifestFormatVersion;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    j["command"] = command;
    j["options"] = options;
    j["seeds"] = seeds;
    nlohmann::json ins = nlohmann::json::array();
    for (const auto& [path, digest] : inputs) {
        ins.push_back({{"path", path}, {"fnv1a64", digest}});
    }
    j["inputs"] = std::move(ins);
    j["outputs"] = outputs;
    return j;
}

void RunManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("RunManifest: cannot open " + path);
    out << to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("RunManifest: write failed for " + path);
}

}  // namespace mdn
