#include "vmkcrack/bde.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>

#include "vmkcrack/error.hpp"

namespace vmkcrack {

const char* method_name(ProtectionMethod m) noexcept {
    return m == ProtectionMethod::UserPassword ? "user-password" : "recovery-password";
}

}  // namespace vmkcrack

namespace vmkcrack::bde {

namespace c = constants;

const char* protection_name(std::uint16_t protection) noexcept {
    switch (protection) {
        case c::protection::kClearKey: return "clear key";
        case c::protection::kTpm: return "TPM";
        case c::protection::kStartupKey: return "startup key";
        case c::protection::kTpmAndPin: return "TPM+PIN";
        case c::protection::kRecoveryPassword: return "recovery password";
        case c::protection::kPassword: return "password";
        default: return "unknown";
    }
}

VolumeImage VolumeImage::from_bytes(Bytes data) {
    VolumeImage image;
    image.size_ = data.size();
    image.memory_ = std::make_shared<const Bytes>(std::move(data));
    return image;
}

VolumeImage VolumeImage::open(const std::filesystem::path& path) {
    auto stream = std::make_shared<std::ifstream>(path, std::ios::binary);
    if (!*stream) throw Error(Errc::Io, "cannot open image " + path.string());
    stream->seekg(0, std::ios::end);
    const auto end = stream->tellg();
    if (end < 0) throw Error(Errc::Io, "cannot determine size of " + path.string());
    VolumeImage image;
    image.file_ = std::move(stream);
    image.size_ = static_cast<std::uint64_t>(end);
    return image;
}

Bytes VolumeImage::read(std::uint64_t offset, std::size_t length) const {
    if (offset > size_ || length > size_ - offset) {
        throw Error(Errc::Io, "read of " + std::to_string(length) + " bytes at " + std::to_string(offset) +
                                  " exceeds image size " + std::to_string(size_));
    }
    if (memory_) {
        return Bytes(memory_->begin() + static_cast<std::ptrdiff_t>(offset),
                     memory_->begin() + static_cast<std::ptrdiff_t>(offset + length));
    }
    Bytes out(length);
    file_->clear();
    file_->seekg(static_cast<std::streamoff>(offset));
    file_->read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(length));
    if (static_cast<std::size_t>(file_->gcount()) != length) {
        throw Error(Errc::Io, "short read at offset " + std::to_string(offset));
    }
    return out;
}

namespace {

struct BlockHeader {
    std::uint16_t version = 0;
    std::uint64_t encrypted_volume_size = 0;
    std::array<std::uint64_t, 3> block_offsets{};
};

// Block header (64 bytes) then metadata header (48 bytes).
std::optional<std::string> check_headers(const std::uint8_t* p, std::uint64_t image_size, std::uint64_t offset) {
    if (!std::equal(c::kSignature.begin(), c::kSignature.end(), p)) return "missing -FVE-FS- signature";
    const std::uint16_t version = load_le16(p + 10);
    if (version != 1 && version != 2) return "unsupported FVE block version " + std::to_string(version);
    const std::uint8_t* meta = p + c::kBlockHeaderSize;
    const std::uint32_t metadata_size = load_le32(meta);
    const std::uint32_t header_size = load_le32(meta + 8);
    if (header_size != c::kMetadataHeaderSize) return "unexpected metadata header size " + std::to_string(header_size);
    if (metadata_size < c::kMetadataHeaderSize || metadata_size > c::kMaxMetadataSize) {
        return "metadata size " + std::to_string(metadata_size) + " out of range";
    }
    if (offset + c::kBlockHeaderSize + metadata_size > image_size) return "metadata extends past end of image";
    return std::nullopt;
}

}  // namespace

std::vector<std::uint64_t> locate_fve_blocks(const VolumeImage& image) {
    if (image.size() < c::kMinImageSize) {
        throw Error(Errc::NotBitlocker, "image too small to hold an FVE metadata block");
    }
    std::vector<std::uint64_t> found;
    constexpr std::size_t kChunk = 1 << 20;
    const std::size_t probe = c::kBlockHeaderSize + c::kMetadataHeaderSize;
    for (std::uint64_t base = 0; base < image.size(); base += kChunk) {
        const std::size_t length = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk + probe, image.size() - base));
        const Bytes chunk = image.read(base, length);
        for (std::size_t off = 0; off < kChunk && off + probe <= chunk.size(); off += c::kSectorSize) {
            if (std::memcmp(chunk.data() + off, c::kSignature.data(), c::kSignature.size()) != 0) continue;
            if (!check_headers(chunk.data() + off, image.size(), base + off)) found.push_back(base + off);
        }
    }
    if (found.empty()) throw Error(Errc::NotBitlocker, "no FVE metadata block signature (-FVE-FS-) found");
    return found;
}

std::vector<MetadataEntry> parse_entries(ByteView data, std::uint64_t base_offset) {
    std::vector<MetadataEntry> entries;
    std::size_t pos = 0;
    while (pos < data.size()) {
        const std::uint64_t where = base_offset + pos;
        if (data.size() - pos < c::kEntryHeaderSize) {
            throw ParseError(Errc::Parse, where, "truncated metadata entry header");
        }
        MetadataEntry e;
        e.offset = where;
        e.size = load_le16(data.data() + pos);
        e.entry_type = load_le16(data.data() + pos + 2);
        e.value_type = load_le16(data.data() + pos + 4);
        e.version = load_le16(data.data() + pos + 6);
        if (e.size == 0) throw ParseError(Errc::Parse, where, "metadata entry declares size 0");
        if (e.size < c::kEntryHeaderSize) {
            throw ParseError(Errc::Parse, where, "metadata entry size " + std::to_string(e.size) + " below header size");
        }
        if (e.size > data.size() - pos) throw ParseError(Errc::Parse, where, "metadata entry runs past its container");
        e.body.assign(data.begin() + static_cast<std::ptrdiff_t>(pos + c::kEntryHeaderSize),
                      data.begin() + static_cast<std::ptrdiff_t>(pos + e.size));
        pos += e.size;
        entries.push_back(std::move(e));
    }
    return entries;
}

FveBlock parse_fve_block(const VolumeImage& image, std::uint64_t offset) {
    const std::size_t probe = c::kBlockHeaderSize + c::kMetadataHeaderSize;
    if (offset > image.size() || image.size() - offset < probe) {
        throw ParseError(Errc::Parse, offset, "FVE block header extends past end of image");
    }
    const Bytes head = image.read(offset, probe);
    if (auto problem = check_headers(head.data(), image.size(), offset)) throw ParseError(Errc::Parse, offset, *problem);

    FveBlock block;
    block.offset = offset;
    block.version = load_le16(head.data() + 10);
    block.encrypted_volume_size = load_le64(head.data() + 16);
    for (int i = 0; i < 3; ++i) block.block_offsets[i] = load_le64(head.data() + 32 + 8 * i);
    const std::uint8_t* meta = head.data() + c::kBlockHeaderSize;
    block.metadata_size = load_le32(meta);
    block.metadata_version = load_le32(meta + 4);
    std::memcpy(block.volume_guid.data(), meta + 16, 16);
    block.encryption_method = load_le32(meta + 36);

    const std::uint64_t entries_offset = offset + probe;
    const Bytes entries = image.read(entries_offset, block.metadata_size - c::kMetadataHeaderSize);
    block.entries = parse_entries(entries, entries_offset);
    return block;
}

ProtectorExtraction extract_vmk_protectors(const FveBlock& block) {
    ProtectorExtraction result;
    for (const auto& entry : block.entries) {
        if (entry.entry_type != c::entry_type::kVolumeMasterKey || entry.value_type != c::value_type::kVolumeMasterKey) {
            continue;
        }
        if (entry.body.size() < c::kVmkValueHeaderSize) {
            throw ParseError(Errc::IncompleteProtector, entry.offset, "VMK entry too short for its header");
        }
        const std::uint16_t protection = load_le16(entry.body.data() + c::kVmkProtectionOffset);
        ProtectionMethod method;
        if (protection == c::protection::kPassword) {
            method = ProtectionMethod::UserPassword;
        } else if (protection == c::protection::kRecoveryPassword) {
            method = ProtectionMethod::RecoveryPassword;
        } else {
            result.skipped.push_back("skipped VMK entry at offset " + std::to_string(entry.offset) + ": protector " +
                                     protection_name(protection) + " (0x" +
                                     to_hex(Bytes{static_cast<std::uint8_t>(protection >> 8),
                                                  static_cast<std::uint8_t>(protection)}) +
                                     ") is not supported");
            continue;
        }

        const std::uint64_t props_offset = entry.offset + c::kEntryHeaderSize + c::kVmkValueHeaderSize;
        const auto properties = parse_entries(ByteView(entry.body).subspan(c::kVmkValueHeaderSize), props_offset);

        const MetadataEntry* stretch = nullptr;
        const MetadataEntry* wrapped = nullptr;
        for (const auto& prop : properties) {
            if (prop.value_type == c::value_type::kStretchKey && !stretch) stretch = &prop;
            if (prop.value_type == c::value_type::kAesCcmEncryptedKey && !wrapped) wrapped = &prop;
        }
        auto incomplete = [&](const std::string& what) {
            throw ParseError(Errc::IncompleteProtector, entry.offset,
                             std::string(method_name(method)) + " VMK entry is missing its " + what);
        };
        if (!stretch || stretch->body.size() < c::kStretchKeyHeaderSize) incomplete("salt (stretch key property)");
        if (!wrapped) incomplete("nonce, MAC and encrypted key (AES-CCM property)");
        if (wrapped->body.size() < 12) incomplete("nonce");
        if (wrapped->body.size() < c::kCcmHeaderSize) incomplete("MAC");
        if (wrapped->body.size() < c::kCcmHeaderSize + kVmkPlaintextSize) incomplete("encrypted VMK");

        VmkProtector p;
        p.method = method;
        std::memcpy(p.salt.data(), stretch->body.data() + 4, p.salt.size());
        std::memcpy(p.nonce.data(), wrapped->body.data(), p.nonce.size());
        std::memcpy(p.mac.data(), wrapped->body.data() + 12, p.mac.size());
        p.encrypted_vmk.assign(wrapped->body.begin() + c::kCcmHeaderSize, wrapped->body.end());
        result.protectors.push_back(std::move(p));
        result.entry_offsets.push_back(entry.offset);
    }
    return result;
}

std::string serialize_hash_line(const VmkProtector& p) {
    std::string line = "$bitcracker$";
    line += p.method == ProtectionMethod::UserPassword ? "0" : "1";
    line += "$16$" + to_hex(p.salt);
    line += "$" + std::to_string(p.iterations);
    line += "$12$" + to_hex(p.nonce);
    line += "$" + to_hex(p.mac);
    line += "$" + std::to_string(p.encrypted_vmk.size());
    line += "$" + to_hex(p.encrypted_vmk);
    return line;
}

namespace {

std::uint64_t parse_number(std::string_view field, const char* name) {
    std::uint64_t value = 0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (field.empty() || ec != std::errc{} || ptr != end) {
        throw Error(Errc::HashValue, std::string("hash line: ") + name + " field is not a decimal number");
    }
    return value;
}

Bytes parse_hex_field(std::string_view field, const char* name) {
    auto bytes = from_hex(field);
    if (!bytes) throw Error(Errc::HashHex, std::string("hash line: ") + name + " field is not even-length hex");
    return *bytes;
}

template <std::size_t N>
std::array<std::uint8_t, N> fixed_field(std::string_view field, const char* name) {
    const Bytes bytes = parse_hex_field(field, name);
    if (bytes.size() != N) {
        throw Error(Errc::HashLength, std::string("hash line: ") + name + " must be " + std::to_string(N) +
                                          " bytes, got " + std::to_string(bytes.size()));
    }
    std::array<std::uint8_t, N> out{};
    std::copy(bytes.begin(), bytes.end(), out.begin());
    return out;
}

}  // namespace

VmkProtector parse_hash_line(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    constexpr std::string_view kMagic = "$bitcracker$";
    if (line.substr(0, kMagic.size()) != kMagic) throw Error(Errc::HashMagic, "hash line does not start with $bitcracker$");

    std::vector<std::string_view> fields;
    std::string_view rest = line.substr(kMagic.size());
    while (true) {
        const auto dollar = rest.find('$');
        fields.push_back(rest.substr(0, dollar));
        if (dollar == std::string_view::npos) break;
        rest.remove_prefix(dollar + 1);
    }
    if (fields.size() != 9) {
        throw Error(Errc::HashFieldCount, "hash line has " + std::to_string(fields.size()) + " fields, expected 9");
    }

    VmkProtector p;
    if (fields[0] == "0") {
        p.method = ProtectionMethod::UserPassword;
    } else if (fields[0] == "1") {
        p.method = ProtectionMethod::RecoveryPassword;
    } else {
        throw Error(Errc::HashValue, "hash line: unknown protection method '" + std::string(fields[0]) + "'");
    }
    if (parse_number(fields[1], "salt length") != kdf::kSaltSize) {
        throw Error(Errc::HashLength, "hash line: salt length field must be 16");
    }
    p.salt = fixed_field<kdf::kSaltSize>(fields[2], "salt");
    p.iterations = parse_number(fields[3], "iterations");
    if (p.iterations == 0) throw Error(Errc::HashValue, "hash line: iteration count must be positive");
    if (parse_number(fields[4], "nonce length") != 12) throw Error(Errc::HashLength, "hash line: nonce length field must be 12");
    p.nonce = fixed_field<12>(fields[5], "nonce");
    p.mac = fixed_field<16>(fields[6], "MAC");
    const std::uint64_t declared = parse_number(fields[7], "VMK length");
    p.encrypted_vmk = parse_hex_field(fields[8], "VMK");
    if (p.encrypted_vmk.size() != declared) {
        throw Error(Errc::HashLength, "hash line: VMK length field says " + std::to_string(declared) + ", data has " +
                                          std::to_string(p.encrypted_vmk.size()));
    }
    if (p.encrypted_vmk.size() < kVmkPlaintextSize) {
        throw Error(Errc::HashLength, "hash line: encrypted VMK shorter than 44 bytes");
    }
    return p;
}

ImageScan scan_image(const VolumeImage& image) {
    ImageScan scan;
    for (const auto offset : locate_fve_blocks(image)) {
        try {
            scan.blocks.push_back(parse_fve_block(image, offset));
        } catch (const ParseError& e) {
            scan.block_errors.push_back(e.what());
        }
    }
    if (scan.blocks.empty()) {
        throw Error(Errc::Parse, "no FVE metadata block could be parsed: " + scan.block_errors.front());
    }
    scan.extraction = extract_vmk_protectors(scan.blocks.front());
    return scan;
}

}  // namespace vmkcrack::bde
