#pragma once

// SHA-256 (FIPS 180-4) with the message schedule and the compression
// function exposed as separate steps. The key-derivation loop feeds
// precomputed schedules straight into compress().

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "vmkcrack/bytes.hpp"

namespace vmkcrack::sha256 {

using Word = std::uint32_t;
using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::size_t kBlockSize = 64;
inline constexpr std::size_t kDigestSize = 32;

inline constexpr std::array<Word, 64> kRoundConstants = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
};

struct HashState {
    std::array<Word, 8> h;

    static constexpr HashState initial() {
        return HashState{{0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19}};
    }

    friend bool operator==(const HashState&, const HashState&) = default;
};

struct MessageSchedule {
    std::array<Word, 64> w;

    friend bool operator==(const MessageSchedule&, const MessageSchedule&) = default;
};

/// Expands one 64-byte block (big-endian words) into the 64-word schedule.
/// Throws Error(InvalidBlock) if the block is not exactly 64 bytes.
MessageSchedule schedule_words(ByteView block);

/// Same expansion starting from the sixteen already-decoded message words.
MessageSchedule schedule_from_words(std::span<const Word, 16> words);

/// 64 rounds plus the feed-forward addition. Fully unrolled.
HashState compress(const HashState& state, const MessageSchedule& schedule);

/// Plain 64-iteration loop; kept as the readable reference for compress().
HashState compress_looped(const HashState& state, const MessageSchedule& schedule);

/// Big-endian serialization of the eight state words.
Digest to_digest(const HashState& state);

/// Incremental hasher with FIPS 180-4 padding.
class Hasher {
public:
    Hasher() = default;

    Hasher& update(ByteView data);
    Hasher& update(std::string_view text);
    Digest finish();

private:
    HashState state_ = HashState::initial();
    std::array<std::uint8_t, kBlockSize> buffer_{};
    std::size_t buffered_ = 0;
    std::uint64_t total_bytes_ = 0;
};

Digest digest(ByteView message);
Digest digest(std::string_view message);

}  // namespace vmkcrack::sha256
