#include "vmkcrack/ccm.hpp"

#include <algorithm>
#include <cstring>

#include "vmkcrack/error.hpp"

namespace vmkcrack::ccm {

const char* mode_name(VerifyMode m) noexcept { return m == VerifyMode::Fast ? "fast" : "mac"; }

Block keystream_block(const AesKey256& key, const Nonce& nonce, std::uint32_t counter) {
    if (counter >= kMaxCounter) throw Error(Errc::Range, "CCM counter exceeds 24 bits");
    Block ctr{};
    ctr[0] = kCounterFlags;
    std::memcpy(ctr.data() + 1, nonce.data(), nonce.size());
    ctr[13] = static_cast<std::uint8_t>(counter >> 16);
    ctr[14] = static_cast<std::uint8_t>(counter >> 8);
    ctr[15] = static_cast<std::uint8_t>(counter);
    return key.encrypt_block(ctr);
}

Bytes decrypt_vmk(const AesKey256& key, const Nonce& nonce, ByteView encrypted_payload) {
    if (encrypted_payload.size() > static_cast<std::size_t>(kMaxCounter - 1) * 16) {
        throw Error(Errc::Range, "CCM payload too long");
    }
    Bytes out(encrypted_payload.begin(), encrypted_payload.end());
    std::uint32_t counter = 1;
    for (std::size_t pos = 0; pos < out.size(); pos += 16, ++counter) {
        const Block ks = keystream_block(key, nonce, counter);
        const std::size_t n = std::min<std::size_t>(16, out.size() - pos);
        for (std::size_t i = 0; i < n; ++i) out[pos + i] ^= ks[i];
    }
    return out;
}

Mac decrypt_mac(const AesKey256& key, const Nonce& nonce, const Mac& encrypted_mac) {
    const Block ks = keystream_block(key, nonce, 0);
    Mac out;
    for (int i = 0; i < 16; ++i) out[i] = encrypted_mac[i] ^ ks[i];
    return out;
}

Mac compute_cbc_mac(const AesKey256& key, const Nonce& nonce, ByteView plaintext) {
    if (plaintext.size() >= kMaxCounter) throw Error(Errc::Range, "CCM plaintext length exceeds 3-byte field");
    Block state{};
    state[0] = kMacFlags;
    std::memcpy(state.data() + 1, nonce.data(), nonce.size());
    const auto len = static_cast<std::uint32_t>(plaintext.size());
    state[13] = static_cast<std::uint8_t>(len >> 16);
    state[14] = static_cast<std::uint8_t>(len >> 8);
    state[15] = static_cast<std::uint8_t>(len);
    state = key.encrypt_block(state);
    for (std::size_t pos = 0; pos < plaintext.size(); pos += 16) {
        const std::size_t n = std::min<std::size_t>(16, plaintext.size() - pos);
        for (std::size_t i = 0; i < n; ++i) state[i] ^= plaintext[pos + i];
        state = key.encrypt_block(state);
    }
    Mac mac;
    std::memcpy(mac.data(), state.data(), 16);
    return mac;
}

bool check_vmk_header(ByteView plaintext, HeaderPolicy policy) {
    if (plaintext.size() < kVmkHeaderSize) return false;
    const std::uint16_t size = load_le16(plaintext.data());
    const std::uint16_t version = load_le16(plaintext.data() + 4);
    const std::uint16_t type = load_le16(plaintext.data() + 8);
    if (size != kVmkPlaintextSize || version != 1) return false;
    if (policy.strict_type) return type == 0x2003;
    return type >= 0x2000 && type <= 0x2005;
}

bool verify_candidate(const AesKey256& key, const VmkProtector& protector, VerifyMode mode, Bytes* plaintext,
                      HeaderPolicy policy) {
    // Only the header blocks are needed for the fast path.
    const std::size_t prefix = mode == VerifyMode::Fast && !plaintext
                                   ? std::min<std::size_t>(protector.encrypted_vmk.size(), 16)
                                   : protector.encrypted_vmk.size();
    Bytes decrypted = decrypt_vmk(key, protector.nonce, ByteView(protector.encrypted_vmk).first(prefix));
    bool ok = check_vmk_header(decrypted, policy);
    if (ok && mode == VerifyMode::FullMac) {
        ok = compute_cbc_mac(key, protector.nonce, decrypted) == decrypt_mac(key, protector.nonce, protector.mac);
    }
    if (plaintext) *plaintext = std::move(decrypted);
    return ok;
}

bool verify_candidate(const kdf::IntermediateKey& key, const VmkProtector& protector, VerifyMode mode,
                      HeaderPolicy policy) {
    return verify_candidate(AesKey256(key), protector, mode, nullptr, policy);
}

EncryptedVmk encrypt_vmk_fixture(const AesKey256& key, const Nonce& nonce, ByteView vmk_plaintext) {
    if (!check_vmk_header(vmk_plaintext)) {
        throw Error(Errc::FixtureInvariant, "VMK plaintext does not carry a valid 12-byte header");
    }
    EncryptedVmk out;
    const Mac tag = compute_cbc_mac(key, nonce, vmk_plaintext);
    out.mac = decrypt_mac(key, nonce, tag);
    out.ciphertext = decrypt_vmk(key, nonce, vmk_plaintext);
    return out;
}

}  // namespace vmkcrack::ccm
