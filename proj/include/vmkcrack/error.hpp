#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace vmkcrack {

enum class Errc {
    InvalidBlock,
    InvalidCandidate,
    RecoveryGroupCount,
    RecoveryNonDigit,
    RecoveryOutOfRange,
    RecoveryChecksum,
    TableMismatch,
    Resource,
    Range,
    FixtureInvariant,
    Io,
    NotBitlocker,
    Parse,
    IncompleteProtector,
    HashMagic,
    HashFieldCount,
    HashHex,
    HashLength,
    HashValue,
    EmptySource,
    InvalidConfig,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Raised by the FVE parser. offset is the absolute image position where
// the structure that failed to parse begins.
class ParseError : public Error {
public:
    ParseError(Errc code, std::uint64_t offset, const std::string& reason)
        : Error(code, reason + " (at offset 0x" + to_hex(offset) + ")"), offset_(offset), reason_(reason) {}

    std::uint64_t offset() const noexcept { return offset_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    static std::string to_hex(std::uint64_t v);

    std::uint64_t offset_;
    std::string reason_;
};

class RecoveryError : public Error {
public:
    RecoveryError(Errc code, std::optional<int> group, const std::string& what)
        : Error(code, what), group_(group) {}

    // Zero-based index of the offending group; empty for group-count errors.
    std::optional<int> group() const noexcept { return group_; }

private:
    std::optional<int> group_;
};

}  // namespace vmkcrack
