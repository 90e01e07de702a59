#include "foredif/crc64.hpp"

#include <array>

namespace foredif {

namespace {

constexpr uint64_t kPoly = 0x42f0e1eba9ea3693ULL;  // ECMA-182

constexpr std::array<uint64_t, 256> make_table() {
    std::array<uint64_t, 256> table{};
    for (uint64_t i = 0; i < 256; ++i) {
        uint64_t crc = i << 56;
        for (int bit = 0; bit < 8; ++bit) {
            crc = (crc & 0x8000000000000000ULL) ? (crc << 1) ^ kPoly : (crc << 1);
        }
        table[i] = crc;
    }
    return table;
}

constexpr auto kTable = make_table();

}  // namespace

void Crc64::update(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t crc = state_;
    for (size_t i = 0; i < len; ++i) {
        crc = (crc << 8) ^ kTable[((crc >> 56) ^ p[i]) & 0xff];
    }
    state_ = crc;
}

uint64_t crc64(const void* data, size_t len) {
    Crc64 c;
    c.update(data, len);
    return c.value();
}

}  // namespace foredif
