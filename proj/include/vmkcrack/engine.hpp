#pragma once

// Dictionary attack against one VMK protector. Workers pull ordered batches
// from a shared candidate source, stretch them with the batched kernel, and
// verify with AES-CCM; the earliest verifying candidate in source order wins.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vmkcrack/ccm.hpp"
#include "vmkcrack/error.hpp"
#include "vmkcrack/kdf.hpp"
#include "vmkcrack/protector.hpp"

namespace vmkcrack::engine {

enum class WTablePolicy { Precompute, OnTheFly };

const char* policy_name(WTablePolicy p) noexcept;

struct ProgressSnapshot {
    std::uint64_t tested = 0;
    std::uint64_t invalid_skipped = 0;
    double elapsed_seconds = 0;
    // Candidates per second over the last few seconds.
    double rate = 0;
    std::optional<std::uint64_t> source_size;
    std::optional<double> eta_seconds;
    bool finished = false;
};

using ProgressCallback = std::function<void(const ProgressSnapshot&)>;

/// std::thread::hardware_concurrency(), or 1 when unknown.
unsigned default_threads() noexcept;

struct AttackConfig {
    unsigned threads = default_threads();
    ccm::VerifyMode mode = ccm::VerifyMode::Fast;
    std::uint64_t iterations = kdf::kDefaultIterations;
    WTablePolicy w_table_policy = WTablePolicy::Precompute;
    std::size_t batch_size = 64;
    double progress_interval = 1.0;
    kdf::Backend backend = kdf::Backend::Auto;
    ccm::HeaderPolicy header_policy{};
    // Invoked from the coordinator thread every progress_interval seconds
    // and once at the end.
    ProgressCallback on_progress;

    /// Throws Error(InvalidConfig) for threads, batch_size or iterations of 0.
    void validate() const;
};

struct Candidate {
    std::uint64_t index = 0;
    std::string text;
};

/// Ordered, thread-safe stream of candidate secrets.
class CandidateSource {
public:
    enum class Kind { WordlistFile, RecoveryList, InMemory, Synthetic };

    /// Newline-delimited UTF-8 passwords. Throws Error(Io) if unreadable.
    static CandidateSource wordlist_file(const std::filesystem::path& path);
    /// Newline-delimited recovery passwords.
    static CandidateSource recovery_list(const std::filesystem::path& path);
    static CandidateSource in_memory(std::vector<std::string> candidates,
                                     ProtectionMethod method = ProtectionMethod::UserPassword);
    /// "bench-<n>" passwords, without end when count is empty.
    static CandidateSource synthetic(std::optional<std::uint64_t> count = std::nullopt);

    Kind kind() const noexcept { return kind_; }
    ProtectionMethod method() const noexcept { return method_; }
    /// Lines in the source, when known up front.
    std::optional<std::uint64_t> size() const noexcept { return size_; }

    /// Appends up to max candidates in source order; false once exhausted.
    /// One trailing CR is stripped from each line. Throws Error(Io) on read
    /// failure.
    bool next_batch(std::size_t max, std::vector<Candidate>& out);

private:
    struct State;
    CandidateSource(Kind kind, ProtectionMethod method, std::shared_ptr<State> state, std::optional<std::uint64_t> size);
    static std::shared_ptr<State> open_list(const std::filesystem::path& path, std::uint64_t& lines);

    Kind kind_;
    ProtectionMethod method_;
    std::shared_ptr<State> state_;
    std::optional<std::uint64_t> size_;
};

/// Accepted password lengths in characters; longer or shorter ones are
/// still tried but counted in AttackResult::length_warnings.
inline constexpr std::size_t kMinPasswordChars = 1;
inline constexpr std::size_t kMaxPasswordChars = 64;

struct Found {
    std::string candidate;
    std::uint64_t source_index = 0;
    Bytes vmk_plaintext;

    /// The 32 key bytes after the 12-byte header.
    ByteView vmk_key() const { return ByteView(vmk_plaintext).subspan(kVmkHeaderSize); }
};

struct AttackResult {
    enum class Outcome { Found, Exhausted, Cancelled };

    Outcome outcome = Outcome::Exhausted;
    // Set for Found; for Cancelled it holds any hit seen before the stop,
    // which need not be the earliest.
    std::optional<Found> found;
    std::uint64_t tested = 0;
    std::uint64_t invalid_skipped = 0;
    std::uint64_t length_warnings = 0;
    double elapsed_seconds = 0;
    double throughput = 0;
    bool used_w_table = false;
    kdf::Backend backend = kdf::Backend::Portable;
};

const char* outcome_name(AttackResult::Outcome o) noexcept;

/// Raised when the source fails mid-attack; carries the progress so far.
class AttackError : public Error {
public:
    AttackError(Errc code, const std::string& what, std::uint64_t tested) : Error(code, what), tested_(tested) {}
    std::uint64_t tested() const noexcept { return tested_; }

private:
    std::uint64_t tested_;
};

/// A running attack. Destroying the handle cancels and joins it.
class AttackHandle {
public:
    ~AttackHandle();
    AttackHandle(const AttackHandle&) = delete;
    AttackHandle& operator=(const AttackHandle&) = delete;

    ProgressSnapshot snapshot() const;
    /// Workers stop at their next abort poll; wait() then reports Cancelled.
    void cancel() noexcept;
    /// Blocks until done. Throws AttackError(Io) or Error(EmptySource).
    AttackResult wait();

private:
    friend std::unique_ptr<AttackHandle> start_attack(const VmkProtector&, CandidateSource, AttackConfig);
    struct Impl;
    explicit AttackHandle(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

/// Throws Error(InvalidConfig) if the source kind does not match the
/// protector, Error(Resource) if the W table cannot be allocated.
std::unique_ptr<AttackHandle> start_attack(const VmkProtector& protector, CandidateSource source, AttackConfig cfg);

AttackResult run_attack(const VmkProtector& protector, CandidateSource source, const AttackConfig& cfg);

inline ProgressSnapshot progress_snapshot(const AttackHandle& handle) { return handle.snapshot(); }

struct BenchmarkReport {
    unsigned threads = 0;
    std::uint64_t iterations = 0;
    kdf::Backend backend = kdf::Backend::Portable;
    WTablePolicy w_table_policy = WTablePolicy::Precompute;
    std::uint64_t candidates = 0;
    double elapsed_seconds = 0;
    double candidates_per_second = 0;
    double per_thread = 0;
    std::uint64_t hashes_per_candidate = 0;
    double hashes_per_second = 0;
};

/// Runs stretching plus verification on synthetic candidates for at least
/// `seconds` (>= 1; Error(InvalidConfig) otherwise). Each thread finishes
/// the lane group it started, so elapsed time may overshoot slightly.
BenchmarkReport benchmark(const AttackConfig& cfg, double seconds);

}  // namespace vmkcrack::engine
