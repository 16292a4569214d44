#ifndef GBMOPT_DIGEST_HPP
#define GBMOPT_DIGEST_HPP

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "gbmopt/archive.hpp"
#include "gbmopt/core.hpp"

namespace gbm {

/// Lower-case hex SHA-256 of a byte buffer.
inline std::string sha256_hex(const unsigned char* data, std::size_t size) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data, size, md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::io, "SHA-256 computation failed");
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

inline std::string sha256_hex(const std::vector<unsigned char>& bytes) { return sha256_hex(bytes.data(), bytes.size()); }

inline std::string file_sha256(const std::string& path) { return sha256_hex(read_bytes(path)); }

/// Digest of a field's PFLD encoding.
inline std::string field_digest(const ScalarField& f) { return sha256_hex(encode_archive(FieldSeries{f})); }

}  // namespace gbm

#endif
