#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace oppbench::detail {

inline std::string to_hex(const unsigned char* data, std::size_t len) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
            throw std::runtime_error("failed to initialise SHA-256 context");
        }
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view chunk) {
        if (EVP_DigestUpdate(ctx_, chunk.data(), chunk.size()) != 1) {
            throw std::runtime_error("SHA-256 update failed");
        }
    }

    std::array<unsigned char, 32> finish() {
        std::array<unsigned char, 32> out{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, out.data(), &len) != 1 || len != out.size()) {
            throw std::runtime_error("SHA-256 finalise failed");
        }
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data);
    auto digest = h.finish();
    return to_hex(digest.data(), digest.size());
}

inline std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
    Sha256 h;
    char buf[1 << 15];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
    }
    auto digest = h.finish();
    return to_hex(digest.data(), digest.size());
}

/// First 8 digest bytes as a big-endian integer. Stable across platforms.
inline std::uint64_t sha256_prefix64(std::string_view data) {
    Sha256 h;
    h.update(data);
    auto digest = h.finish();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | digest[static_cast<std::size_t>(i)];
    return v;
}

} // namespace oppbench::detail
