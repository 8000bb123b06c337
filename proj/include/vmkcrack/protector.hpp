#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "vmkcrack/bytes.hpp"
#include "vmkcrack/kdf.hpp"

namespace vmkcrack {

enum class ProtectionMethod { UserPassword, RecoveryPassword };

const char* method_name(ProtectionMethod m) noexcept;

using Nonce = std::array<std::uint8_t, 12>;
using Mac = std::array<std::uint8_t, 16>;

inline constexpr std::size_t kVmkPlaintextSize = 44;
inline constexpr std::size_t kVmkHeaderSize = 12;

/// One attackable copy of the VMK: the salt that keys the stretching loop and
/// the AES-CCM nonce, encrypted MAC, and ciphertext stored next to it.
struct VmkProtector {
    ProtectionMethod method = ProtectionMethod::UserPassword;
    kdf::Salt salt{};
    Nonce nonce{};
    Mac mac{};
    Bytes encrypted_vmk;
    std::uint64_t iterations = kdf::kDefaultIterations;

    friend bool operator==(const VmkProtector&, const VmkProtector&) = default;
};

}  // namespace vmkcrack
