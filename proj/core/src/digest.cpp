#include "foredif/digest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "foredif/common.hpp"

namespace foredif {

namespace {

std::string to_hex(const unsigned char* bytes, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = digits[bytes[i] >> 4];
        out[2 * i + 1] = digits[bytes[i] & 0xf];
    }
    return out;
}

struct CtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

}  // namespace

std::string sha256_hex(const void* data, size_t len) {
    std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
    FD_CHECK(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1,
             "sha256 init failed");
    FD_CHECK(EVP_DigestUpdate(ctx.get(), data, len) == 1, "sha256 update failed");
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned md_len = 0;
    FD_CHECK(EVP_DigestFinal_ex(ctx.get(), md, &md_len) == 1, "sha256 final failed");
    return to_hex(md, md_len);
}

std::string sha256_file(const std::string& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"),
                                                      &std::fclose);
    FD_CHECK_T(IoError, f != nullptr, "cannot open file for hashing: ", path);

    std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
    FD_CHECK(ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1,
             "sha256 init failed");
    std::vector<unsigned char> buf(1 << 16);
    size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), f.get())) > 0) {
        FD_CHECK(EVP_DigestUpdate(ctx.get(), buf.data(), n) == 1, "sha256 update failed");
    }
    FD_CHECK_T(IoError, !std::ferror(f.get()), "read error while hashing: ", path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned md_len = 0;
    FD_CHECK(EVP_DigestFinal_ex(ctx.get(), md, &md_len) == 1, "sha256 final failed");
    return to_hex(md, md_len);
}

}  // namespace foredif
