#pragma once

// Run manifests: every file-producing command records what it wrote and the
// SHA-256 of each output, so downstream consumers can detect stale or
// tampered artifacts.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

namespace lux::manifest {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("digest context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        EVP_DigestUpdate(ctx, buf, size_t(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

struct RunManifest {
    std::string subcommand;
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;

    json to_json() const {
        json outs = json::array();
        for (const auto& p : outputs) outs.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        return json{{"version", kVersion},
                    {"subcommand", subcommand},
                    {"argv", argv},
                    {"seed", seed},
                    {"outputs", outs}};
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << to_json().dump(2) << "\n";
    }
};

}  // namespace lux::manifest
