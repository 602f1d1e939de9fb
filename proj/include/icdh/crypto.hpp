#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "icdh/error.hpp"
#include "icdh/image.hpp"

namespace icdh {

inline std::string to_hex(const std::uint8_t* data, std::size_t n)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(2 * n, '0');
    for (std::size_t i = 0; i < n; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xF];
    }
    return out;
}

/// Incremental SHA-256.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new())
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(const void* data, std::size_t n)
    {
        if (EVP_DigestUpdate(ctx_, data, n) != 1) throw Error("SHA-256 update failed");
        return *this;
    }
    Sha256& update(std::string_view s) { return update(s.data(), s.size()); }

    std::string hex()
    {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, md, &len) != 1) throw Error("SHA-256 final failed");
        return to_hex(md, len);
    }

private:
    EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(const Bytes& bytes) { return Sha256().update(bytes.data(), bytes.size()).hex(); }

inline std::string base64_encode(const Bytes& bytes)
{
    if (bytes.empty()) return {};
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

inline Bytes base64_decode(std::string_view text)
{
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ' && c != '\t') clean.push_back(c);
    }
    if (clean.empty()) return {};
    if (clean.size() % 4 != 0) throw ParseError("base64: length is not a multiple of 4");
    Bytes out(3 * clean.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) throw ParseError("base64: invalid input");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock counts padding as zero bytes.
    if (clean.back() == '=') --len;
    if (clean[clean.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

} // namespace icdh
