#pragma once

#include <random>
#include <string>

#include "vmkcrack/bde.hpp"

namespace testsupport {

inline std::array<std::uint8_t, vmkcrack::kVmkPlaintextSize> vmk_plaintext(std::mt19937_64& rng) {
    std::array<std::uint8_t, vmkcrack::kVmkPlaintextSize> vmk{0x2c, 0x00, 0x00, 0x00, 0x01, 0x00,
                                                              0x00, 0x00, 0x03, 0x20, 0x00, 0x00};
    for (std::size_t i = vmkcrack::kVmkHeaderSize; i < vmk.size(); ++i) vmk[i] = static_cast<std::uint8_t>(rng());
    return vmk;
}

template <std::size_t N>
std::array<std::uint8_t, N> random_array(std::mt19937_64& rng) {
    std::array<std::uint8_t, N> out{};
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

inline std::string random_recovery(std::mt19937_64& rng) {
    vmkcrack::kdf::RecoveryPassword rp;
    for (auto& g : rp.groups) g = static_cast<std::uint32_t>(rng() % 65536) * 11;
    return rp.to_string();
}

inline vmkcrack::bde::FixtureProtector protector(std::mt19937_64& rng, vmkcrack::ProtectionMethod method,
                                                 std::string secret) {
    vmkcrack::bde::FixtureProtector p;
    p.method = method;
    p.secret = std::move(secret);
    p.salt = random_array<16>(rng);
    p.nonce = random_array<12>(rng);
    return p;
}

struct Planted {
    vmkcrack::bde::FixtureImage fixture;
    std::array<std::uint8_t, vmkcrack::kVmkPlaintextSize> vmk{};
    std::string password;
    std::string recovery;
};

// User-password plus recovery-password protectors.
inline Planted two_protector_fixture(std::uint64_t seed, std::uint64_t iterations, bool tpm = false) {
    std::mt19937_64 rng(seed);
    Planted p;
    p.password = "pw-" + std::to_string(rng() % 1000000);
    p.recovery = random_recovery(rng);
    p.vmk = vmk_plaintext(rng);
    vmkcrack::bde::FixtureLayout layout;
    layout.iterations = iterations;
    layout.include_tpm_protector = tpm;
    p.fixture = vmkcrack::bde::build_fixture_image(
        {protector(rng, vmkcrack::ProtectionMethod::UserPassword, p.password),
         protector(rng, vmkcrack::ProtectionMethod::RecoveryPassword, p.recovery)},
        p.vmk, layout);
    return p;
}

}  // namespace testsupport
