// Synthetic volume writer: the forward direction of the attack, used to build
// test images with known secrets.

#include <algorithm>
#include <cstring>

#include "vmkcrack/bde.hpp"
#include "vmkcrack/ccm.hpp"
#include "vmkcrack/error.hpp"

namespace vmkcrack::bde {

namespace c = constants;

namespace {

// 2026-01-01 00:00:00 UTC as a FILETIME.
constexpr std::uint64_t kFixtureFiletime = 0x01dc7ab192810000ULL;

void put_entry_header(Bytes& out, std::size_t at, std::uint16_t size, std::uint16_t entry_type,
                      std::uint16_t value_type) {
    store_le16(out.data() + at, size);
    store_le16(out.data() + at + 2, entry_type);
    store_le16(out.data() + at + 4, value_type);
    store_le16(out.data() + at + 6, 1);
}

Bytes make_entry(std::uint16_t entry_type, std::uint16_t value_type, ByteView body) {
    if (c::kEntryHeaderSize + body.size() > 0xffff) throw Error(Errc::FixtureInvariant, "fixture entry too large");
    Bytes out(c::kEntryHeaderSize + body.size());
    put_entry_header(out, 0, static_cast<std::uint16_t>(out.size()), entry_type, value_type);
    std::copy(body.begin(), body.end(), out.begin() + c::kEntryHeaderSize);
    return out;
}

void append(Bytes& dst, ByteView src) { dst.insert(dst.end(), src.begin(), src.end()); }

std::array<std::uint8_t, 16> entry_guid(std::size_t index) {
    std::array<std::uint8_t, 16> guid = {0x9e, 0x41, 0x0c, 0x7a, 0x55, 0x13, 0x4f, 0x2b,
                                         0xa1, 0x6d, 0x30, 0x88, 0x00, 0x00, 0x00, 0x00};
    store_le32(guid.data() + 12, static_cast<std::uint32_t>(index + 1));
    return guid;
}

Bytes vmk_entry(std::size_t index, std::uint16_t protection, const Bytes& properties) {
    Bytes body(c::kVmkValueHeaderSize);
    const auto guid = entry_guid(index);
    std::memcpy(body.data(), guid.data(), guid.size());
    store_le64(body.data() + 16, kFixtureFiletime);
    store_le16(body.data() + c::kVmkProtectionOffset, protection);
    append(body, properties);
    return make_entry(c::entry_type::kVolumeMasterKey, c::value_type::kVolumeMasterKey, body);
}

Bytes description_entry() {
    const std::string_view label = "VMKCRACK-FIXTURE 01/01/2026";
    Bytes text;
    for (char ch : label) {
        text.push_back(static_cast<std::uint8_t>(ch));
        text.push_back(0);
    }
    text.push_back(0);
    text.push_back(0);
    return make_entry(c::entry_type::kDescription, c::value_type::kUnicodeString, text);
}

}  // namespace

kdf::IntermediateKey derive_protector_key(ProtectionMethod method, std::string_view secret, const kdf::Salt& salt,
                                          std::uint64_t iterations) {
    const kdf::Hash32 initial = method == ProtectionMethod::UserPassword
                                    ? kdf::password_to_initial_hash(secret)
                                    : kdf::recovery_to_initial_hash(kdf::validate_recovery_password(secret));
    return kdf::derive_intermediate_key(initial, salt, iterations);
}

FixtureImage build_fixture_image(const std::vector<FixtureProtector>& protectors,
                                 const std::array<std::uint8_t, kVmkPlaintextSize>& vmk_plaintext,
                                 const FixtureLayout& layout) {
    if (!ccm::check_vmk_header(vmk_plaintext)) {
        throw Error(Errc::FixtureInvariant, "VMK plaintext does not carry a valid 12-byte header");
    }
    if (layout.iterations == 0) throw Error(Errc::FixtureInvariant, "fixture iterations must be positive");

    FixtureImage result;
    Bytes entries = description_entry();
    for (std::size_t i = 0; i < protectors.size(); ++i) {
        const FixtureProtector& fp = protectors[i];
        kdf::IntermediateKey key;
        try {
            key = derive_protector_key(fp.method, fp.secret, fp.salt, layout.iterations);
        } catch (const Error& e) {
            throw Error(Errc::FixtureInvariant, std::string("unusable fixture secret: ") + e.what());
        }
        const ccm::EncryptedVmk wrapped = ccm::encrypt_vmk_fixture(ccm::AesKey256(key), fp.nonce, vmk_plaintext);

        Bytes stretch(c::kStretchKeyHeaderSize);
        store_le32(stretch.data(), c::kStretchKeyMethod);
        std::memcpy(stretch.data() + 4, fp.salt.data(), fp.salt.size());

        Bytes ccm_body(fp.nonce.begin(), fp.nonce.end());
        append(ccm_body, wrapped.mac);
        append(ccm_body, wrapped.ciphertext);

        Bytes properties = make_entry(c::entry_type::kProperty, c::value_type::kStretchKey, stretch);
        append(properties, make_entry(c::entry_type::kProperty, c::value_type::kAesCcmEncryptedKey, ccm_body));
        const std::uint16_t protection =
            fp.method == ProtectionMethod::UserPassword ? c::protection::kPassword : c::protection::kRecoveryPassword;
        append(entries, vmk_entry(i, protection, properties));

        VmkProtector p;
        p.method = fp.method;
        p.salt = fp.salt;
        p.nonce = fp.nonce;
        p.mac = wrapped.mac;
        p.encrypted_vmk = wrapped.ciphertext;
        p.iterations = layout.iterations;
        result.protectors.push_back(std::move(p));
    }
    if (layout.include_tpm_protector) {
        Bytes sealed(0x40);
        for (std::size_t i = 0; i < sealed.size(); ++i) sealed[i] = static_cast<std::uint8_t>(0xa5 ^ (i * 7));
        append(entries, vmk_entry(protectors.size(), c::protection::kTpm,
                                  make_entry(c::entry_type::kProperty, c::value_type::kTpmEncodedKey, sealed)));
    }

    const std::size_t metadata_size = c::kMetadataHeaderSize + entries.size();
    const std::size_t block_size = c::kBlockHeaderSize + metadata_size;
    auto sorted = layout.block_offsets;
    std::sort(sorted.begin(), sorted.end());
    if (sorted[0] < c::kSectorSize || layout.image_size < c::kMinImageSize ||
        sorted[2] + block_size > layout.image_size) {
        throw Error(Errc::FixtureInvariant, "fixture layout does not fit the image");
    }
    for (std::size_t i = 0; i < 3; ++i) {
        if (sorted[i] % c::kSectorSize != 0) throw Error(Errc::FixtureInvariant, "FVE block offsets must be sector aligned");
        if (i > 0 && sorted[i] < sorted[i - 1] + block_size) throw Error(Errc::FixtureInvariant, "FVE blocks overlap");
    }

    Bytes& image = result.image;
    image.assign(layout.image_size, 0);

    // Volume boot sector: OEM id, FVE block offsets, boot signature.
    image[0] = 0xeb;
    image[1] = 0x58;
    image[2] = 0x90;
    std::copy(c::kSignature.begin(), c::kSignature.end(), image.begin() + 3);
    store_le16(image.data() + 11, c::kSectorSize);
    for (std::size_t i = 0; i < 3; ++i) {
        store_le64(image.data() + c::kVolumeHeaderBlockOffsets + 8 * i, layout.block_offsets[i]);
    }
    image[510] = 0x55;
    image[511] = 0xaa;

    for (const std::uint64_t offset : layout.block_offsets) {
        std::uint8_t* b = image.data() + offset;
        std::copy(c::kSignature.begin(), c::kSignature.end(), b);
        store_le16(b + 8, static_cast<std::uint16_t>(c::kBlockHeaderSize));
        store_le16(b + 10, 2);
        store_le16(b + 12, 4);
        store_le16(b + 14, 4);
        store_le64(b + 16, layout.image_size);
        store_le32(b + 28, 16);
        for (std::size_t i = 0; i < 3; ++i) store_le64(b + 32 + 8 * i, layout.block_offsets[i]);
        store_le64(b + 56, 0);

        std::uint8_t* m = b + c::kBlockHeaderSize;
        store_le32(m, static_cast<std::uint32_t>(metadata_size));
        store_le32(m + 4, 1);
        store_le32(m + 8, c::kMetadataHeaderSize);
        store_le32(m + 12, static_cast<std::uint32_t>(metadata_size));
        std::memcpy(m + 16, layout.volume_guid.data(), 16);
        store_le32(m + 32, static_cast<std::uint32_t>(protectors.size() + 10));
        store_le32(m + 36, 0x8004);  // AES-XTS-128
        store_le64(m + 40, kFixtureFiletime);
        std::memcpy(m + c::kMetadataHeaderSize, entries.data(), entries.size());
    }
    return result;
}

}  // namespace vmkcrack::bde
