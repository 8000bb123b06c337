#pragma once

// BitLocker password stretching: the candidate secret is pre-hashed, then a
// loop of 0x100000 SHA-256 evaluations over an 88-byte message (last hash,
// secret hash, salt, counter) yields the 256-bit intermediate AES key.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vmkcrack/sha256.hpp"

namespace vmkcrack::kdf {

inline constexpr std::uint64_t kDefaultIterations = 0x100000;
inline constexpr std::size_t kSaltSize = 16;
inline constexpr std::size_t kMessageSize = 88;
inline constexpr std::uint32_t kRecoveryGroupLimit = 720896;
inline constexpr std::uint32_t kRecoveryGroupDivisor = 11;

using Salt = std::array<std::uint8_t, kSaltSize>;
using Hash32 = std::array<std::uint8_t, 32>;

struct IntermediateKey {
    std::array<std::uint8_t, 32> key{};

    friend bool operator==(const IntermediateKey&, const IntermediateKey&) = default;
};

struct BitlockerMessage {
    Hash32 update_hash{};
    Hash32 password_hash{};
    Salt salt{};
    std::uint64_t hash_count = 0;
};

using MessageBlock = std::array<std::uint8_t, sha256::kBlockSize>;

/// Two padded SHA-256 blocks. hash_count is little-endian; the trailer is
/// the FIPS bit length (704) big-endian.
std::array<MessageBlock, 2> serialize_message(const BitlockerMessage& message);

/// The second block only; it depends on nothing but salt and counter.
MessageBlock second_block(const Salt& salt, std::uint64_t hash_count);

/// SHA-256(SHA-256(UTF-16LE(password))). The password is UTF-8 text.
/// Throws Error(InvalidCandidate) for empty or malformed input.
Hash32 password_to_initial_hash(std::string_view password);

/// UTF-8 to UTF-16LE bytes. Throws Error(InvalidCandidate) on malformed UTF-8.
Bytes utf16le_encode(std::string_view utf8);

struct RecoveryPassword {
    std::array<std::uint32_t, 8> groups{};

    /// Group values divided by eleven, each < 65536.
    std::array<std::uint16_t, 8> words() const;
    std::string to_string() const;

    friend bool operator==(const RecoveryPassword&, const RecoveryPassword&) = default;
};

enum class GroupVerdict { Valid, NonDigit, WrongLength, OutOfRange, NotDivisible };

struct RecoveryCheck {
    bool group_count_ok = false;
    std::size_t group_count = 0;
    std::vector<std::string> groups;
    std::vector<GroupVerdict> verdicts;

    bool valid() const;
};

/// Non-throwing per-group analysis, used for reporting.
RecoveryCheck check_recovery_password(std::string_view text);

/// Eight '-'-separated groups of six digits, each divisible by 11 and below
/// 720896. Surrounding whitespace is ignored. Throws RecoveryError naming the
/// first offending group.
RecoveryPassword validate_recovery_password(std::string_view text);

/// Single SHA-256 over the eight group/11 values as little-endian 16-bit words.
Hash32 recovery_to_initial_hash(const RecoveryPassword& rp);

/// Precomputed second-block schedules for hash_count = 0 .. rows-1.
class WScheduleTable {
public:
    static constexpr std::size_t kWordsPerRow = 64;

    /// Throws Error(Resource) when the allocation fails.
    static WScheduleTable build(const Salt& salt, std::uint64_t rows = kDefaultIterations);

    const Salt& salt() const noexcept { return salt_; }
    std::uint64_t rows() const noexcept { return rows_; }
    std::size_t size_bytes() const noexcept { return static_cast<std::size_t>(rows_) * kWordsPerRow * sizeof(sha256::Word); }

    std::span<const sha256::Word, kWordsPerRow> row(std::uint64_t hash_count) const {
        return std::span<const sha256::Word, kWordsPerRow>(words_.get() + hash_count * kWordsPerRow, kWordsPerRow);
    }

    const sha256::Word* data() const noexcept { return words_.get(); }

    bool operator==(const WScheduleTable& other) const;

private:
    WScheduleTable(const Salt& salt, std::uint64_t rows, std::unique_ptr<sha256::Word[]> words)
        : salt_(salt), rows_(rows), words_(std::move(words)) {}

    Salt salt_;
    std::uint64_t rows_;
    std::unique_ptr<sha256::Word[]> words_;
};

inline WScheduleTable precompute_w_table(const Salt& salt, std::uint64_t rows = kDefaultIterations) {
    return WScheduleTable::build(salt, rows);
}

enum class Backend { Auto, Portable, ShaNi, Avx512 };

const char* backend_name(Backend b) noexcept;

/// True when the CPU provides the SHA extensions the ShaNi backend needs.
bool shani_available() noexcept;
bool avx512_available() noexcept;
bool backend_available(Backend b) noexcept;

/// Candidates one kernel call evaluates together. Batches that are a
/// multiple of this waste no lanes.
std::size_t backend_lanes(Backend b) noexcept;

/// Maps Auto to the fastest available backend; unavailable requests fall
/// back to Portable.
Backend resolve_backend(Backend requested) noexcept;

/// Polled from inside the iteration loop; returning true abandons the run.
using AbortCheck = std::function<bool()>;

/// Runs the stretching loop for one candidate. When a table is supplied it
/// must belong to the same salt and hold at least `iterations` rows
/// (Error(TableMismatch) otherwise). Results are identical with or without it.
IntermediateKey derive_intermediate_key(const Hash32& initial_hash, const Salt& salt,
                                        std::uint64_t iterations = kDefaultIterations,
                                        const WScheduleTable* table = nullptr,
                                        Backend backend = Backend::Auto);

/// Batched form used by the attack engine. SHA-NI processes several
/// candidates in lockstep, sharing each table row. Returns false if `abort`
/// fired; `out` is then unspecified.
bool derive_intermediate_keys(std::span<const Hash32> initial_hashes, const Salt& salt,
                              std::uint64_t iterations, const WScheduleTable* table,
                              std::span<IntermediateKey> out, Backend backend = Backend::Auto,
                              const AbortCheck& abort = {});

/// Continues a derivation from an intermediate update_hash at counter
/// `start`. derive(i, n) == resume(derive(i, k), i, k, n).
IntermediateKey resume_intermediate_key(const Hash32& update_hash, const Hash32& initial_hash, const Salt& salt,
                                        std::uint64_t start, std::uint64_t iterations);

/// Compressions per candidate: two for the pre-hash, two per iteration.
constexpr std::uint64_t hashes_per_candidate(std::uint64_t iterations) { return 2 * iterations + 2; }

}  // namespace vmkcrack::kdf
