#pragma once

#include <cstddef>
#include <cstdint>

namespace foredif {

/// Incremental CRC64 (ECMA-182 polynomial). Used as the integrity
/// footer of dataset and checkpoint files.
class Crc64 {
public:
    void update(const void* data, size_t len);
    uint64_t value() const { return ~state_; }

private:
    uint64_t state_ = ~0ULL;
};

uint64_t crc64(const void* data, size_t len);

}  // namespace foredif
