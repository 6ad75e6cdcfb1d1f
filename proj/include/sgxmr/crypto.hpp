#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace sgxmr {

inline constexpr size_t kSealKeySize = 16;   // AES-128
inline constexpr size_t kNonceSize = 12;
inline constexpr size_t kAuthTagSize = 16;

/// 128-bit sealing secret. Lives only in the simulated trusted region;
/// nothing in this codebase writes it into a block file or trace.
struct SealKey {
    std::array<uint8_t, kSealKeySize> bytes{};

    static SealKey from_hex(std::string_view hex);  // 32 hex chars
    static SealKey random();
};

using Nonce = std::array<uint8_t, kNonceSize>;
using AuthTag = std::array<uint8_t, kAuthTagSize>;

/// Fresh 96-bit nonce: 4 random bytes fixed per process, then a monotone
/// 64-bit counter. Never repeats under one key within a process lifetime.
Nonce next_nonce();

/// Counter part of a nonce produced by next_nonce; used by tests to check
/// monotonicity.
uint64_t nonce_counter(const Nonce& nonce);

/// AES-128-GCM, one-shot. Ciphertext length equals plaintext length.
void aead_seal(const SealKey& key, const Nonce& nonce,
               std::span<const uint8_t> aad, std::span<const uint8_t> plain,
               uint8_t* cipher_out, AuthTag& tag_out);

/// Returns false when the tag (over aad and ciphertext) does not verify;
/// plain_out is unspecified in that case.
bool aead_open(const SealKey& key, const Nonce& nonce,
               std::span<const uint8_t> aad, std::span<const uint8_t> cipher,
               const AuthTag& tag, uint8_t* plain_out);

}  // namespace sgxmr
