#pragma once

// AES-256 and the CCM construction BitLocker uses to wrap the VMK: 12-byte
// nonce, 16-byte tag, 3-byte length field, no associated data. Counter block
// 0 masks the MAC; counters 1.. mask the payload.

#include <array>
#include <cstdint>
#include <span>

#include "vmkcrack/bytes.hpp"
#include "vmkcrack/kdf.hpp"
#include "vmkcrack/protector.hpp"

namespace vmkcrack::ccm {

using Block = std::array<std::uint8_t, 16>;

inline constexpr std::uint32_t kMaxCounter = 1u << 24;

// Fixed by the 12-byte nonce: L = 15 - 12 = 3.
inline constexpr std::uint8_t kCounterFlags = 0x02;
// Adata = 0, M' = (16 - 2) / 2 = 7, L' = 2.
inline constexpr std::uint8_t kMacFlags = 0x3a;

/// Expanded AES-256 key (FIPS-197).
class AesKey256 {
public:
    explicit AesKey256(std::span<const std::uint8_t, 32> key);
    explicit AesKey256(const kdf::IntermediateKey& key) : AesKey256(std::span<const std::uint8_t, 32>(key.key)) {}

    Block encrypt_block(const Block& in) const;

    const std::array<std::array<std::uint8_t, 16>, 15>& round_keys() const noexcept { return round_keys_; }

private:
    std::array<std::array<std::uint8_t, 16>, 15> round_keys_{};
};

inline Block aes256_encrypt_block(const AesKey256& key, const Block& block) { return key.encrypt_block(block); }

/// AES over flags || nonce || counter (3 bytes, big-endian). Throws
/// Error(Range) if counter >= 2^24.
Block keystream_block(const AesKey256& key, const Nonce& nonce, std::uint32_t counter);

/// Payload XOR keystream blocks 1, 2, ...
Bytes decrypt_vmk(const AesKey256& key, const Nonce& nonce, ByteView encrypted_payload);

/// Encrypted MAC XOR keystream block 0.
Mac decrypt_mac(const AesKey256& key, const Nonce& nonce, const Mac& encrypted_mac);

/// CBC-MAC over B0 || zero-padded plaintext.
Mac compute_cbc_mac(const AesKey256& key, const Nonce& nonce, ByteView plaintext);

struct HeaderPolicy {
    // Also require encryption type 0x2003 exactly.
    bool strict_type = false;
};

/// Cheap plausibility test on the first 12 decrypted bytes: size 44,
/// version 1, encryption type in [0x2000, 0x2005].
bool check_vmk_header(ByteView plaintext, HeaderPolicy policy = {});

enum class VerifyMode { Fast, FullMac };

const char* mode_name(VerifyMode m) noexcept;

/// Fast: header check only. FullMac: header check and MAC comparison.
bool verify_candidate(const kdf::IntermediateKey& key, const VmkProtector& protector, VerifyMode mode,
                      HeaderPolicy policy = {});

/// Same test on an already expanded key; also hands back the plaintext.
bool verify_candidate(const AesKey256& key, const VmkProtector& protector, VerifyMode mode, Bytes* plaintext,
                      HeaderPolicy policy = {});

struct EncryptedVmk {
    Mac mac;
    Bytes ciphertext;
};

/// Forward direction, for building fixtures. Throws Error(FixtureInvariant)
/// when the plaintext fails check_vmk_header.
EncryptedVmk encrypt_vmk_fixture(const AesKey256& key, const Nonce& nonce, ByteView vmk_plaintext);

}  // namespace vmkcrack::ccm
