#include "sgxmr/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <atomic>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace sgxmr {

namespace {

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("invalid hex digit in key");
}

struct CipherCtxFree {
    void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

std::atomic<uint64_t> g_nonce_counter{0};

uint32_t nonce_prefix() {
    static const uint32_t prefix = [] {
        uint32_t p = 0;
        if (RAND_bytes(reinterpret_cast<unsigned char*>(&p), sizeof(p)) != 1)
            throw std::runtime_error("RAND_bytes failed");
        return p;
    }();
    return prefix;
}

}  // namespace

SealKey SealKey::from_hex(std::string_view hex) {
    if (hex.size() != 2 * kSealKeySize)
        throw std::invalid_argument("seal key must be 32 hex characters");
    SealKey key;
    for (size_t i = 0; i < kSealKeySize; ++i)
        key.bytes[i] = static_cast<uint8_t>(hex_nibble(hex[2 * i]) << 4 |
                                            hex_nibble(hex[2 * i + 1]));
    return key;
}

SealKey SealKey::random() {
    SealKey key;
    if (RAND_bytes(key.bytes.data(), key.bytes.size()) != 1)
        throw std::runtime_error("RAND_bytes failed");
    return key;
}

Nonce next_nonce() {
    Nonce nonce{};
    const uint32_t prefix = nonce_prefix();
    const uint64_t counter = g_nonce_counter.fetch_add(1);
    std::memcpy(nonce.data(), &prefix, 4);
    std::memcpy(nonce.data() + 4, &counter, 8);
    return nonce;
}

uint64_t nonce_counter(const Nonce& nonce) {
    uint64_t counter = 0;
    std::memcpy(&counter, nonce.data() + 4, 8);
    return counter;
}

void aead_seal(const SealKey& key, const Nonce& nonce,
               std::span<const uint8_t> aad, std::span<const uint8_t> plain,
               uint8_t* cipher_out, AuthTag& tag_out) {
    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    int len = 0;
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr,
                           key.bytes.data(), nonce.data()) != 1)
        throw std::runtime_error("EVP_EncryptInit_ex failed");
    if (!aad.empty() &&
        EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                          static_cast<int>(aad.size())) != 1)
        throw std::runtime_error("EVP_EncryptUpdate (aad) failed");
    if (!plain.empty() &&
        EVP_EncryptUpdate(ctx.get(), cipher_out, &len, plain.data(),
                          static_cast<int>(plain.size())) != 1)
        throw std::runtime_error("EVP_EncryptUpdate failed");
    if (EVP_EncryptFinal_ex(ctx.get(), cipher_out + plain.size(), &len) != 1)
        throw std::runtime_error("EVP_EncryptFinal_ex failed");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAuthTagSize,
                            tag_out.data()) != 1)
        throw std::runtime_error("EVP_CTRL_GCM_GET_TAG failed");
}

bool aead_open(const SealKey& key, const Nonce& nonce,
               std::span<const uint8_t> aad, std::span<const uint8_t> cipher,
               const AuthTag& tag, uint8_t* plain_out) {
    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    int len = 0;
    if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr,
                           key.bytes.data(), nonce.data()) != 1)
        throw std::runtime_error("EVP_DecryptInit_ex failed");
    if (!aad.empty() &&
        EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                          static_cast<int>(aad.size())) != 1)
        throw std::runtime_error("EVP_DecryptUpdate (aad) failed");
    if (!cipher.empty() &&
        EVP_DecryptUpdate(ctx.get(), plain_out, &len, cipher.data(),
                          static_cast<int>(cipher.size())) != 1)
        throw std::runtime_error("EVP_DecryptUpdate failed");
    AuthTag tag_copy = tag;  // EVP_CTRL_GCM_SET_TAG wants a mutable pointer
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAuthTagSize,
                            tag_copy.data()) != 1)
        throw std::runtime_error("EVP_CTRL_GCM_SET_TAG failed");
    return EVP_DecryptFinal_ex(ctx.get(), plain_out + cipher.size(), &len) == 1;
}

}  // namespace sgxmr
