#include "oocrel/digest.hpp"

#include <openssl/evp.h>

#include <fstream>

#include "oocrel/errors.hpp"

namespace oocrel {

Sha256::Sha256() {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: failed to initialize digest context");
    }
    ctx_ = ctx;
}

Sha256::~Sha256() {
    if (ctx_ != nullptr) {
        EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
    }
}

void Sha256::update(const void* data, size_t size) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, size) != 1) {
        throw std::runtime_error("sha256: digest update failed");
    }
}

void Sha256::update(const std::string& text) { update(text.data(), text.size()); }

std::string Sha256::hex_digest() {
    unsigned char raw[EVP_MAX_MD_SIZE];
    unsigned int raw_len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), raw, &raw_len) != 1) {
        throw std::runtime_error("sha256: digest finalization failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(raw_len * 2);
    for (unsigned int i = 0; i < raw_len; ++i) {
        out.push_back(hex[raw[i] >> 4]);
        out.push_back(hex[raw[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex(const void* data, size_t size) {
    Sha256 hasher;
    hasher.update(data, size);
    return hasher.hex_digest();
}

std::string sha256_hex(const std::string& text) { return sha256_hex(text.data(), text.size()); }

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file for hashing: " + path);
    }
    Sha256 hasher;
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof(buffer));
        const std::streamsize got = in.gcount();
        if (got > 0) {
            hasher.update(buffer, static_cast<size_t>(got));
        }
    }
    return hasher.hex_digest();
}

} // namespace oocrel
