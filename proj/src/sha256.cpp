#include "spinqnd/sha256.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <openssl/evp.h>

namespace sq::io {

namespace {

std::string to_hex(const unsigned char* digest, unsigned len) {
    std::string out(2 * len, '0');
    static const char* hex = "0123456789abcdef";
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = hex[digest[i] >> 4];
        out[2 * i + 1] = hex[digest[i] & 0xF];
    }
    return out;
}

} // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw std::runtime_error("sha256 failure");
    return to_hex(digest, len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failure");
    std::array<char, 1 << 16> buf;
    while (f) {
        f.read(buf.data(), buf.size());
        const std::streamsize got = f.gcount();
        if (got > 0 &&
            EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(got)) != 1)
            throw std::runtime_error("sha256 failure");
    }
    if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw std::runtime_error("sha256 failure");
    return to_hex(digest, len);
}

} // namespace sq::io
