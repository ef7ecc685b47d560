#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace oocrel {

// Incremental SHA-256 hasher producing lowercase hex digests.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, size_t size);
    void update(const std::string& text);

    template <typename T>
    void update_pod(const T& value) {
        update(&value, sizeof(T));
    }

    // Finalizes and returns the hex digest; the hasher may not be reused.
    std::string hex_digest();

private:
    void* ctx_ = nullptr;
};

std::string sha256_hex(const void* data, size_t size);
std::string sha256_hex(const std::string& text);
std::string sha256_file_hex(const std::string& path);

} // namespace oocrel
