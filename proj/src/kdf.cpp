#include "vmkcrack/kdf.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <new>

#include "kdf_kernels.hpp"
#include "vmkcrack/error.hpp"

namespace vmkcrack::kdf {

std::array<MessageBlock, 2> serialize_message(const BitlockerMessage& message) {
    std::array<MessageBlock, 2> blocks{};
    std::memcpy(blocks[0].data(), message.update_hash.data(), 32);
    std::memcpy(blocks[0].data() + 32, message.password_hash.data(), 32);
    blocks[1] = second_block(message.salt, message.hash_count);
    return blocks;
}

MessageBlock second_block(const Salt& salt, std::uint64_t hash_count) {
    MessageBlock block{};
    std::memcpy(block.data(), salt.data(), kSaltSize);
    store_le64(block.data() + 16, hash_count);
    block[24] = 0x80;
    store_be64(block.data() + 56, kMessageSize * 8);
    return block;
}

Bytes utf16le_encode(std::string_view utf8) {
    Bytes out;
    out.reserve(utf8.size() * 2);
    auto bad = [] { throw Error(Errc::InvalidCandidate, "candidate is not valid UTF-8"); };
    std::size_t i = 0;
    while (i < utf8.size()) {
        auto lead = static_cast<std::uint8_t>(utf8[i]);
        std::uint32_t cp = 0;
        int extra = 0;
        if (lead < 0x80) {
            cp = lead;
        } else if ((lead & 0xe0) == 0xc0) {
            cp = lead & 0x1f;
            extra = 1;
        } else if ((lead & 0xf0) == 0xe0) {
            cp = lead & 0x0f;
            extra = 2;
        } else if ((lead & 0xf8) == 0xf0) {
            cp = lead & 0x07;
            extra = 3;
        } else {
            bad();
        }
        if (extra > 0 && i + extra >= utf8.size()) bad();
        for (int k = 1; k <= extra; ++k) {
            auto cont = static_cast<std::uint8_t>(utf8[i + k]);
            if ((cont & 0xc0) != 0x80) bad();
            cp = (cp << 6) | (cont & 0x3f);
        }
        // Overlong forms, surrogates, and out-of-range code points.
        static constexpr std::uint32_t kMinForLength[] = {0, 0x80, 0x800, 0x10000};
        if (cp < kMinForLength[extra] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) bad();
        i += 1 + extra;

        auto put16 = [&out](std::uint32_t unit) {
            out.push_back(static_cast<std::uint8_t>(unit));
            out.push_back(static_cast<std::uint8_t>(unit >> 8));
        };
        if (cp >= 0x10000) {
            cp -= 0x10000;
            put16(0xd800 | (cp >> 10));
            put16(0xdc00 | (cp & 0x3ff));
        } else {
            put16(cp);
        }
    }
    return out;
}

Hash32 password_to_initial_hash(std::string_view password) {
    if (password.empty()) throw Error(Errc::InvalidCandidate, "empty password");
    const Bytes encoded = utf16le_encode(password);
    const sha256::Digest inner = sha256::digest(encoded);
    return sha256::digest(inner);
}

std::array<std::uint16_t, 8> RecoveryPassword::words() const {
    std::array<std::uint16_t, 8> out{};
    for (std::size_t i = 0; i < 8; ++i) out[i] = static_cast<std::uint16_t>(groups[i] / kRecoveryGroupDivisor);
    return out;
}

std::string RecoveryPassword::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < 8; ++i) {
        if (i) out.push_back('-');
        std::string digits = std::to_string(groups[i]);
        out.append(6 - digits.size(), '0');
        out += digits;
    }
    return out;
}

bool RecoveryCheck::valid() const {
    return group_count_ok && std::all_of(verdicts.begin(), verdicts.end(),
                                         [](GroupVerdict v) { return v == GroupVerdict::Valid; });
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

GroupVerdict judge_group(std::string_view g, std::uint32_t& value) {
    value = 0;
    for (char c : g) {
        if (c < '0' || c > '9') return GroupVerdict::NonDigit;
    }
    if (g.size() != 6) return GroupVerdict::WrongLength;
    for (char c : g) value = value * 10 + static_cast<std::uint32_t>(c - '0');
    if (value >= kRecoveryGroupLimit) return GroupVerdict::OutOfRange;
    if (value % kRecoveryGroupDivisor != 0) return GroupVerdict::NotDivisible;
    return GroupVerdict::Valid;
}

}  // namespace

RecoveryCheck check_recovery_password(std::string_view text) {
    RecoveryCheck check;
    std::string_view rest = trim(text);
    while (true) {
        auto dash = rest.find('-');
        check.groups.emplace_back(rest.substr(0, dash));
        if (dash == std::string_view::npos) break;
        rest.remove_prefix(dash + 1);
    }
    check.group_count = check.groups.size();
    check.group_count_ok = check.group_count == 8;
    for (const auto& g : check.groups) {
        std::uint32_t value = 0;
        check.verdicts.push_back(judge_group(g, value));
    }
    return check;
}

RecoveryPassword validate_recovery_password(std::string_view text) {
    const RecoveryCheck check = check_recovery_password(text);
    if (!check.group_count_ok) {
        throw RecoveryError(Errc::RecoveryGroupCount, std::nullopt,
                            "recovery password must have 8 groups, found " + std::to_string(check.group_count));
    }
    RecoveryPassword rp;
    for (int i = 0; i < 8; ++i) {
        std::uint32_t value = 0;
        const std::string& g = check.groups[static_cast<std::size_t>(i)];
        const std::string where = "group " + std::to_string(i) + " (\"" + g + "\")";
        switch (judge_group(g, value)) {
            case GroupVerdict::NonDigit:
                throw RecoveryError(Errc::RecoveryNonDigit, i, where + " contains a non-digit character");
            case GroupVerdict::WrongLength:
                throw RecoveryError(Errc::RecoveryNonDigit, i, where + " must be exactly 6 digits");
            case GroupVerdict::OutOfRange:
                throw RecoveryError(Errc::RecoveryOutOfRange, i, where + " must be < 720896");
            case GroupVerdict::NotDivisible:
                throw RecoveryError(Errc::RecoveryChecksum, i, where + " is not divisible by 11");
            case GroupVerdict::Valid:
                break;
        }
        rp.groups[static_cast<std::size_t>(i)] = value;
    }
    return rp;
}

Hash32 recovery_to_initial_hash(const RecoveryPassword& rp) {
    std::array<std::uint8_t, 16> buffer{};
    const auto words = rp.words();
    for (std::size_t i = 0; i < 8; ++i) store_le16(buffer.data() + 2 * i, words[i]);
    return sha256::digest(buffer);
}

WScheduleTable WScheduleTable::build(const Salt& salt, std::uint64_t rows) {
    if (rows == 0 || rows > kDefaultIterations) {
        throw Error(Errc::Range, "W table rows must be in [1, 0x100000]");
    }
    std::unique_ptr<sha256::Word[]> words(new (std::nothrow) sha256::Word[rows * kWordsPerRow]);
    if (!words) {
        throw Error(Errc::Resource, "cannot allocate " + std::to_string(rows * kWordsPerRow * 4) +
                                        " bytes for the W table; use the on-the-fly policy instead");
    }
    std::array<sha256::Word, 16> block = detail::second_block_words(salt, 0);
    for (std::uint64_t h = 0; h < rows; ++h) {
        detail::set_counter_words(block, h);
        const sha256::MessageSchedule s = sha256::schedule_from_words(block);
        std::memcpy(words.get() + h * kWordsPerRow, s.w.data(), sizeof(s.w));
    }
    return WScheduleTable(salt, rows, std::move(words));
}

bool WScheduleTable::operator==(const WScheduleTable& other) const {
    return salt_ == other.salt_ && rows_ == other.rows_ &&
           std::equal(words_.get(), words_.get() + rows_ * kWordsPerRow, other.words_.get());
}

const char* backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::Auto: return "auto";
        case Backend::Portable: return "portable";
        case Backend::ShaNi: return "sha-ni";
        case Backend::Avx512: return "avx512";
    }
    return "unknown";
}

bool shani_available() noexcept { return detail::cpu_has_shani(); }

bool avx512_available() noexcept { return detail::cpu_has_avx512(); }

bool backend_available(Backend b) noexcept {
    switch (b) {
        case Backend::ShaNi: return shani_available();
        case Backend::Avx512: return avx512_available();
        default: return true;
    }
}

std::size_t backend_lanes(Backend b) noexcept {
    switch (resolve_backend(b)) {
        case Backend::ShaNi: return 4;
        case Backend::Avx512: return 16;
        default: return 1;
    }
}

Backend resolve_backend(Backend requested) noexcept {
    if (requested == Backend::Auto) {
        if (avx512_available()) return Backend::Avx512;
        return shani_available() ? Backend::ShaNi : Backend::Portable;
    }
    return backend_available(requested) ? requested : Backend::Portable;
}

namespace {

void check_table(const WScheduleTable* table, const Salt& salt, std::uint64_t iterations) {
    if (iterations == 0) throw Error(Errc::Range, "iterations must be >= 1");
    if (!table) return;
    if (table->salt() != salt) throw Error(Errc::TableMismatch, "W table was built for a different salt");
    if (table->rows() < iterations) {
        throw Error(Errc::TableMismatch, "W table covers " + std::to_string(table->rows()) + " rows, need " +
                                             std::to_string(iterations));
    }
}

}  // namespace

IntermediateKey derive_intermediate_key(const Hash32& initial_hash, const Salt& salt, std::uint64_t iterations,
                                        const WScheduleTable* table, Backend backend) {
    IntermediateKey key;
    derive_intermediate_keys(std::span<const Hash32>(&initial_hash, 1), salt, iterations, table,
                             std::span<IntermediateKey>(&key, 1), backend);
    return key;
}

bool derive_intermediate_keys(std::span<const Hash32> initial_hashes, const Salt& salt, std::uint64_t iterations,
                              const WScheduleTable* table, std::span<IntermediateKey> out, Backend backend,
                              const AbortCheck& abort) {
    check_table(table, salt, iterations);
    if (out.size() < initial_hashes.size()) throw Error(Errc::Range, "output span too small");
    const sha256::Word* rows = table ? table->data() : nullptr;
    // A short tail costs a full sixteen-lane pass on AVX-512; SHA-NI is
    // cheaper below eight candidates.
    if (backend == Backend::Auto && avx512_available() && shani_available()) {
        const std::size_t tail = initial_hashes.size() % 16;
        if (tail != 0 && tail < 8) {
            const std::size_t head = initial_hashes.size() - tail;
            return detail::derive_avx512(initial_hashes.first(head), salt, iterations, rows, out.first(head), abort) &&
                   detail::derive_shani(initial_hashes.subspan(head), salt, iterations, rows, out.subspan(head),
                                        abort);
        }
    }
    switch (resolve_backend(backend)) {
        case Backend::ShaNi: return detail::derive_shani(initial_hashes, salt, iterations, rows, out, abort);
        case Backend::Avx512: return detail::derive_avx512(initial_hashes, salt, iterations, rows, out, abort);
        default: break;
    }
    for (std::size_t i = 0; i < initial_hashes.size(); ++i) {
        if (!detail::derive_portable(Hash32{}, initial_hashes[i], salt, 0, iterations, rows, out[i], abort)) {
            return false;
        }
    }
    return true;
}

IntermediateKey resume_intermediate_key(const Hash32& update_hash, const Hash32& initial_hash, const Salt& salt,
                                        std::uint64_t start, std::uint64_t iterations) {
    if (start > iterations) throw Error(Errc::Range, "resume point beyond iteration count");
    if (start == iterations) {
        IntermediateKey key;
        key.key = update_hash;
        return key;
    }
    IntermediateKey key;
    detail::derive_portable(update_hash, initial_hash, salt, start, iterations, nullptr, key, {});
    return key;
}

}  // namespace vmkcrack::kdf
