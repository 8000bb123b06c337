#pragma once

// BitLocker Drive Encryption on-disk structures: FVE metadata blocks, their
// entries, and the VMK protectors an attack needs. All integers are
// little-endian.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vmkcrack/bytes.hpp"
#include "vmkcrack/kdf.hpp"
#include "vmkcrack/protector.hpp"

namespace vmkcrack::bde {

// Tag values follow the open BDE reimplementations; keep them in one place.
namespace constants {

inline constexpr std::array<std::uint8_t, 8> kSignature = {'-', 'F', 'V', 'E', '-', 'F', 'S', '-'};
inline constexpr std::size_t kSectorSize = 512;
inline constexpr std::size_t kMinImageSize = 1024;

inline constexpr std::size_t kBlockHeaderSize = 64;
inline constexpr std::size_t kMetadataHeaderSize = 48;
inline constexpr std::size_t kEntryHeaderSize = 8;
inline constexpr std::uint32_t kMaxMetadataSize = 0x80000;

// Offset of the three FVE block offsets in the volume boot sector.
inline constexpr std::size_t kVolumeHeaderBlockOffsets = 0xb0;

namespace entry_type {
inline constexpr std::uint16_t kProperty = 0x0000;
inline constexpr std::uint16_t kVolumeMasterKey = 0x0002;
inline constexpr std::uint16_t kFullVolumeEncryptionKey = 0x0003;
inline constexpr std::uint16_t kDescription = 0x0007;
inline constexpr std::uint16_t kVolumeHeaderBlock = 0x000f;
}  // namespace entry_type

namespace value_type {
inline constexpr std::uint16_t kErased = 0x0000;
inline constexpr std::uint16_t kKey = 0x0001;
inline constexpr std::uint16_t kUnicodeString = 0x0002;
inline constexpr std::uint16_t kStretchKey = 0x0003;
inline constexpr std::uint16_t kUseKey = 0x0004;
inline constexpr std::uint16_t kAesCcmEncryptedKey = 0x0005;
inline constexpr std::uint16_t kTpmEncodedKey = 0x0006;
inline constexpr std::uint16_t kVolumeMasterKey = 0x0008;
inline constexpr std::uint16_t kOffsetAndSize = 0x000f;
}  // namespace value_type

namespace protection {
inline constexpr std::uint16_t kClearKey = 0x0000;
inline constexpr std::uint16_t kTpm = 0x0100;
inline constexpr std::uint16_t kStartupKey = 0x0200;
inline constexpr std::uint16_t kTpmAndPin = 0x0500;
inline constexpr std::uint16_t kRecoveryPassword = 0x0800;
inline constexpr std::uint16_t kPassword = 0x2000;
}  // namespace protection

// VMK value: GUID (16), FILETIME (8), unknown (2), protection type (2).
inline constexpr std::size_t kVmkValueHeaderSize = 28;
inline constexpr std::size_t kVmkProtectionOffset = 26;
// Stretch key value: encryption method (4), salt (16).
inline constexpr std::size_t kStretchKeyHeaderSize = 20;
inline constexpr std::uint32_t kStretchKeyMethod = 0x1000;
// AES-CCM encrypted key value: nonce (12), MAC (16), ciphertext.
inline constexpr std::size_t kCcmHeaderSize = 28;

}  // namespace constants

const char* protection_name(std::uint16_t protection) noexcept;

/// Random-access, bounds-checked view of a volume image held in memory or
/// read from a file/device.
class VolumeImage {
public:
    static VolumeImage from_bytes(Bytes data);
    /// Throws Error(Io) if the path cannot be opened or sized.
    static VolumeImage open(const std::filesystem::path& path);

    std::uint64_t size() const noexcept { return size_; }

    /// Throws Error(Io) on short reads, including ranges past the end.
    Bytes read(std::uint64_t offset, std::size_t length) const;

private:
    VolumeImage() = default;

    std::shared_ptr<const Bytes> memory_;
    std::shared_ptr<std::ifstream> file_;
    std::uint64_t size_ = 0;
};

struct MetadataEntry {
    std::uint64_t offset = 0;
    std::uint16_t size = 0;
    std::uint16_t entry_type = 0;
    std::uint16_t value_type = 0;
    std::uint16_t version = 0;
    Bytes body;
};

struct FveBlock {
    std::uint64_t offset = 0;
    std::uint16_t version = 0;
    std::uint64_t encrypted_volume_size = 0;
    std::array<std::uint64_t, 3> block_offsets{};
    std::uint32_t metadata_size = 0;
    std::uint32_t metadata_version = 0;
    std::array<std::uint8_t, 16> volume_guid{};
    std::uint32_t encryption_method = 0;
    std::vector<MetadataEntry> entries;
};

/// Offsets of every sector that starts with "-FVE-FS-" followed by a sane
/// block header, ascending. Throws Error(NotBitlocker) if there are none.
std::vector<std::uint64_t> locate_fve_blocks(const VolumeImage& image);

/// Throws ParseError for malformed headers, zero-sized or truncated entries.
FveBlock parse_fve_block(const VolumeImage& image, std::uint64_t offset);

/// Splits a byte range into metadata entries with the same rules used for a
/// block's top-level list. `base_offset` only labels errors.
std::vector<MetadataEntry> parse_entries(ByteView data, std::uint64_t base_offset);

struct ProtectorExtraction {
    std::vector<VmkProtector> protectors;
    // Source entry offset for each protector.
    std::vector<std::uint64_t> entry_offsets;
    std::vector<std::string> skipped;
};

/// Password and recovery-password VMKs wrapped with AES-CCM. Other protector
/// kinds are listed in `skipped`. Throws Error(IncompleteProtector) if a
/// supported VMK lacks its salt, nonce, MAC, or ciphertext.
ProtectorExtraction extract_vmk_protectors(const FveBlock& block);

/// $bitcracker$<m>$16$<salt>$<iterations>$12$<nonce>$<mac>$<n>$<vmk>
std::string serialize_hash_line(const VmkProtector& p);

/// Strict inverse of serialize_hash_line. A trailing LF or CRLF is ignored.
VmkProtector parse_hash_line(std::string_view line);

/// Every protector from the first block that parses cleanly; convenience
/// wrapper over locate/parse/extract.
struct ImageScan {
    std::vector<FveBlock> blocks;
    std::vector<std::string> block_errors;
    ProtectorExtraction extraction;
};

ImageScan scan_image(const VolumeImage& image);

// ---------------------------------------------------------------------------
// Fixture images

struct FixtureProtector {
    ProtectionMethod method = ProtectionMethod::UserPassword;
    // UTF-8 password, or a recovery password in its dashed form.
    std::string secret;
    kdf::Salt salt{};
    Nonce nonce{};
};

struct FixtureLayout {
    std::size_t image_size = 0x10000;
    std::array<std::uint64_t, 3> block_offsets = {0x2000, 0x6000, 0xa000};
    // Appends a TPM-protected VMK entry the extractor must skip.
    bool include_tpm_protector = false;
    // Stretching iterations used to derive the wrapping keys.
    std::uint64_t iterations = kdf::kDefaultIterations;
    std::array<std::uint8_t, 16> volume_guid = {0x3b, 0xd6, 0x67, 0x49, 0x29, 0x2e, 0xd8, 0x4a,
                                                0x83, 0x99, 0xf6, 0xa3, 0x39, 0xe3, 0xd0, 0x01};
};

struct FixtureImage {
    Bytes image;
    std::vector<VmkProtector> protectors;
};

/// Writes a minimal volume: boot sector plus three identical FVE blocks whose
/// VMK entries are produced by the real stretching and AES-CCM code. Throws
/// Error(FixtureInvariant) if vmk_plaintext has an invalid header or a secret
/// is unusable.
FixtureImage build_fixture_image(const std::vector<FixtureProtector>& protectors,
                                 const std::array<std::uint8_t, kVmkPlaintextSize>& vmk_plaintext,
                                 const FixtureLayout& layout = {});

/// Wrapping key for a protector, from its method and secret text.
kdf::IntermediateKey derive_protector_key(ProtectionMethod method, std::string_view secret, const kdf::Salt& salt,
                                          std::uint64_t iterations);

}  // namespace vmkcrack::bde
