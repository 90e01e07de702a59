#pragma once

#include <cstddef>
#include <string>

namespace foredif {

/// SHA-256 hex digest of a byte buffer.
std::string sha256_hex(const void* data, size_t len);

/// SHA-256 hex digest of a file's contents. Throws IoError if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace foredif
