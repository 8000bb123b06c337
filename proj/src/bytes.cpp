#include "vmkcrack/bytes.hpp"

#include "vmkcrack/error.hpp"

namespace vmkcrack {

std::string to_hex(ByteView data) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0x0f]);
    }
    return out;
}

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::optional<Bytes> from_hex(std::string_view text) {
    if (text.size() % 2 != 0) return std::nullopt;
    Bytes out(text.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_value(text[2 * i]);
        int lo = hex_value(text[2 * i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

const char* errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidBlock: return "invalid-block";
        case Errc::InvalidCandidate: return "invalid-candidate";
        case Errc::RecoveryGroupCount: return "recovery-group-count";
        case Errc::RecoveryNonDigit: return "recovery-non-digit";
        case Errc::RecoveryOutOfRange: return "recovery-out-of-range";
        case Errc::RecoveryChecksum: return "recovery-checksum";
        case Errc::TableMismatch: return "table-mismatch";
        case Errc::Resource: return "resource";
        case Errc::Range: return "range";
        case Errc::FixtureInvariant: return "fixture-invariant";
        case Errc::Io: return "io";
        case Errc::NotBitlocker: return "not-bitlocker";
        case Errc::Parse: return "parse";
        case Errc::IncompleteProtector: return "incomplete-protector";
        case Errc::HashMagic: return "hash-magic";
        case Errc::HashFieldCount: return "hash-field-count";
        case Errc::HashHex: return "hash-hex";
        case Errc::HashLength: return "hash-length";
        case Errc::HashValue: return "hash-value";
        case Errc::EmptySource: return "empty-source";
        case Errc::InvalidConfig: return "invalid-config";
    }
    return "unknown";
}

std::string ParseError::to_hex(std::uint64_t v) {
    static constexpr char kDigits[] = "0123456789abcdef";
    if (v == 0) return "0";
    std::string out;
    while (v != 0) {
        out.insert(out.begin(), kDigits[v & 0xf]);
        v >>= 4;
    }
    return out;
}

}  // namespace vmkcrack
