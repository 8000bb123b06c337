#pragma once

// Internal: the per-backend stretching loops behind kdf::derive_*.

#include <array>
#include <span>

#include "vmkcrack/kdf.hpp"

namespace vmkcrack::kdf::detail {

inline constexpr std::uint64_t kAbortPollMask = 0xfff;

/// Second block as sixteen big-endian message words.
std::array<sha256::Word, 16> second_block_words(const Salt& salt, std::uint64_t hash_count);

/// Rewrites words 4 and 5 (the little-endian counter bytes).
inline void set_counter_words(std::array<sha256::Word, 16>& words, std::uint64_t hash_count) {
    words[4] = __builtin_bswap32(static_cast<std::uint32_t>(hash_count));
    words[5] = __builtin_bswap32(static_cast<std::uint32_t>(hash_count >> 32));
}

/// Portable loop over counters [start, iterations) from the given update_hash.
/// `rows` is the raw W table or nullptr for on-the-fly schedules.
bool derive_portable(const Hash32& update_hash, const Hash32& initial_hash, const Salt& salt, std::uint64_t start,
                     std::uint64_t iterations, const sha256::Word* rows, IntermediateKey& out,
                     const AbortCheck& abort);

bool cpu_has_shani() noexcept;
bool cpu_has_avx512() noexcept;

bool derive_avx512(std::span<const Hash32> initial_hashes, const Salt& salt, std::uint64_t iterations,
                   const sha256::Word* rows, std::span<IntermediateKey> out, const AbortCheck& abort);

bool derive_shani(std::span<const Hash32> initial_hashes, const Salt& salt, std::uint64_t iterations,
                  const sha256::Word* rows, std::span<IntermediateKey> out, const AbortCheck& abort);

}  // namespace vmkcrack::kdf::detail
