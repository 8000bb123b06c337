#include <doctest.h>

#include <chrono>
#include <random>

#include "fixtures.hpp"
#include "vmkcrack/bde.hpp"
#include "vmkcrack/ccm.hpp"
#include "vmkcrack/error.hpp"

using namespace vmkcrack;
using namespace vmkcrack::bde;

namespace {

constexpr std::uint64_t kIterations = 16;

template <typename F>
Errc error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::Parse;
}

VmkProtector sample_protector() {
    std::mt19937_64 rng(31);
    VmkProtector p;
    p.method = ProtectionMethod::RecoveryPassword;
    p.salt = testsupport::random_array<16>(rng);
    p.nonce = testsupport::random_array<12>(rng);
    p.mac = testsupport::random_array<16>(rng);
    p.encrypted_vmk.resize(44);
    for (auto& b : p.encrypted_vmk) b = static_cast<std::uint8_t>(rng());
    return p;
}

}  // namespace

TEST_SUITE("bde") {

TEST_CASE("fixture image has three FVE blocks at the requested offsets") {
    const auto planted = testsupport::two_protector_fixture(1, kIterations);
    const auto image = VolumeImage::from_bytes(planted.fixture.image);
    CHECK(locate_fve_blocks(image) == std::vector<std::uint64_t>{0x2000, 0x6000, 0xa000});

    std::mt19937_64 rng(2);
    FixtureLayout layout;
    layout.iterations = kIterations;
    layout.block_offsets = {0x4200, 0x9000, 0xc000};
    const auto moved = build_fixture_image(
        {testsupport::protector(rng, ProtectionMethod::UserPassword, "x")}, testsupport::vmk_plaintext(rng), layout);
    CHECK(locate_fve_blocks(VolumeImage::from_bytes(moved.image)) == std::vector<std::uint64_t>{0x4200, 0x9000, 0xc000});
}

TEST_CASE("images without FVE blocks are not BitLocker") {
    CHECK(error_code([] { locate_fve_blocks(VolumeImage::from_bytes(Bytes(1 << 20, 0))); }) == Errc::NotBitlocker);
    CHECK(error_code([] { locate_fve_blocks(VolumeImage::from_bytes(Bytes(512, 0))); }) == Errc::NotBitlocker);
    // The boot sector carries the signature at offset 3, which is not a block.
    auto planted = testsupport::two_protector_fixture(3, kIterations);
    Bytes only_boot(planted.fixture.image.begin(), planted.fixture.image.begin() + 0x1000);
    CHECK(error_code([&] { locate_fve_blocks(VolumeImage::from_bytes(only_boot)); }) == Errc::NotBitlocker);
}

TEST_CASE("fixture block holds a user-password and a recovery VMK entry") {
    const auto planted = testsupport::two_protector_fixture(4, kIterations);
    const auto image = VolumeImage::from_bytes(planted.fixture.image);
    const FveBlock block = parse_fve_block(image, 0x2000);
    CHECK(block.version == 2);
    std::vector<std::uint16_t> protections;
    for (const auto& e : block.entries) {
        if (e.entry_type == constants::entry_type::kVolumeMasterKey) {
            protections.push_back(load_le16(e.body.data() + constants::kVmkProtectionOffset));
        }
    }
    CHECK(protections == std::vector<std::uint16_t>{constants::protection::kPassword,
                                                    constants::protection::kRecoveryPassword});
}

TEST_CASE("round trip through locate, parse and extract recovers the written protectors") {
    const auto planted = testsupport::two_protector_fixture(5, kIterations);
    const auto scan = scan_image(VolumeImage::from_bytes(planted.fixture.image));
    REQUIRE(scan.blocks.size() == 3);
    REQUIRE(scan.extraction.protectors.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        auto extracted = scan.extraction.protectors[i];
        extracted.iterations = kIterations;  // not stored on disk
        CHECK(extracted == planted.fixture.protectors[i]);
    }
    CHECK(scan.extraction.protectors[0].method == ProtectionMethod::UserPassword);
    CHECK(scan.extraction.protectors[1].method == ProtectionMethod::RecoveryPassword);
}

TEST_CASE("extracted protectors decrypt with the planted secrets") {
    const auto planted = testsupport::two_protector_fixture(6, kIterations);
    const auto scan = scan_image(VolumeImage::from_bytes(planted.fixture.image));
    const auto& ps = scan.extraction.protectors;
    const auto k0 = derive_protector_key(ProtectionMethod::UserPassword, planted.password, ps[0].salt, kIterations);
    const auto k1 = derive_protector_key(ProtectionMethod::RecoveryPassword, planted.recovery, ps[1].salt, kIterations);
    Bytes pt;
    CHECK(ccm::verify_candidate(ccm::AesKey256(k0), ps[0], ccm::VerifyMode::FullMac, &pt));
    CHECK(pt == Bytes(planted.vmk.begin(), planted.vmk.end()));
    CHECK(ccm::verify_candidate(ccm::AesKey256(k1), ps[1], ccm::VerifyMode::FullMac, &pt));
    CHECK(pt == Bytes(planted.vmk.begin(), planted.vmk.end()));
}

TEST_CASE("all three blocks yield identical protector sets") {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        const auto planted = testsupport::two_protector_fixture(seed, kIterations, seed % 2 == 0);
        const auto image = VolumeImage::from_bytes(planted.fixture.image);
        const auto offsets = locate_fve_blocks(image);
        REQUIRE(offsets.size() == 3);
        const auto first = extract_vmk_protectors(parse_fve_block(image, offsets[0]));
        for (std::size_t i = 1; i < 3; ++i) {
            const auto other = extract_vmk_protectors(parse_fve_block(image, offsets[i]));
            CHECK(other.protectors == first.protectors);
            CHECK(other.skipped.size() == first.skipped.size());
        }
    }
}

TEST_CASE("user-password-only fixture yields one protector") {
    std::mt19937_64 rng(7);
    FixtureLayout layout;
    layout.iterations = kIterations;
    const auto f = build_fixture_image({testsupport::protector(rng, ProtectionMethod::UserPassword, "solo")},
                                       testsupport::vmk_plaintext(rng), layout);
    const auto scan = scan_image(VolumeImage::from_bytes(f.image));
    CHECK(scan.extraction.protectors.size() == 1);
    CHECK(scan.extraction.protectors[0].method == ProtectionMethod::UserPassword);
}

TEST_CASE("TPM-only block gives no protectors and a skip diagnostic") {
    std::mt19937_64 rng(8);
    FixtureLayout layout;
    layout.iterations = kIterations;
    layout.include_tpm_protector = true;
    const auto f = build_fixture_image({}, testsupport::vmk_plaintext(rng), layout);
    const auto scan = scan_image(VolumeImage::from_bytes(f.image));
    CHECK(scan.extraction.protectors.empty());
    REQUIRE(scan.extraction.skipped.size() == 1);
    CHECK(scan.extraction.skipped[0].find("TPM") != std::string::npos);
}

TEST_CASE("zero-sized and truncated entries are parse errors") {
    const auto planted = testsupport::two_protector_fixture(9, kIterations);
    const std::size_t first_entry = 0x2000 + constants::kBlockHeaderSize + constants::kMetadataHeaderSize;

    Bytes zero = planted.fixture.image;
    store_le16(zero.data() + first_entry, 0);
    try {
        parse_fve_block(VolumeImage::from_bytes(zero), 0x2000);
        FAIL("accepted a zero-sized entry");
    } catch (const ParseError& e) {
        CHECK(e.offset() == first_entry);
        CHECK(e.reason().find("size 0") != std::string::npos);
    }

    Bytes small = planted.fixture.image;
    store_le16(small.data() + first_entry, 4);
    CHECK_THROWS_AS(parse_fve_block(VolumeImage::from_bytes(small), 0x2000), ParseError);

    Bytes big = planted.fixture.image;
    store_le16(big.data() + first_entry, 0xfff0);
    CHECK_THROWS_AS(parse_fve_block(VolumeImage::from_bytes(big), 0x2000), ParseError);

    CHECK_THROWS_AS(parse_entries(Bytes{1, 0, 0}, 0), ParseError);
    CHECK(parse_entries(Bytes{}, 0).empty());
}

TEST_CASE("damaged first block falls back to the next one") {
    auto planted = testsupport::two_protector_fixture(19, kIterations);
    Bytes image = planted.fixture.image;
    store_le16(image.data() + 0x2000 + constants::kBlockHeaderSize + constants::kMetadataHeaderSize, 0);
    const auto scan = scan_image(VolumeImage::from_bytes(image));
    CHECK(scan.blocks.size() == 2);
    CHECK(scan.block_errors.size() == 1);
    CHECK(scan.extraction.protectors.size() == 2);
}

TEST_CASE("VMK entry without its salt is an incomplete protector") {
    const auto planted = testsupport::two_protector_fixture(20, kIterations);
    const auto image = VolumeImage::from_bytes(planted.fixture.image);
    const auto scan = scan_image(image);
    const std::uint64_t vmk = scan.extraction.entry_offsets[0];
    const std::uint64_t first_property = vmk + constants::kEntryHeaderSize + constants::kVmkValueHeaderSize;

    Bytes broken = planted.fixture.image;
    store_le16(broken.data() + first_property + 4, constants::value_type::kKey);
    try {
        extract_vmk_protectors(parse_fve_block(VolumeImage::from_bytes(broken), 0x2000));
        FAIL("accepted a VMK without salt");
    } catch (const ParseError& e) {
        CHECK(e.code() == Errc::IncompleteProtector);
        CHECK(std::string(e.what()).find("salt") != std::string::npos);
    }
}

TEST_CASE("hash line round trip and field checks") {
    const VmkProtector p = sample_protector();
    const std::string line = serialize_hash_line(p);
    CHECK(line.rfind("$bitcracker$1$16$", 0) == 0);
    CHECK(line.find("$1048576$12$") != std::string::npos);
    CHECK(line.find_first_of(" \t\r\n") == std::string::npos);
    CHECK(parse_hash_line(line) == p);
    CHECK(parse_hash_line(line + "\r\n") == p);

    VmkProtector user = p;
    user.method = ProtectionMethod::UserPassword;
    user.salt = {};
    const std::string user_line = serialize_hash_line(user);
    CHECK(user_line.rfind("$bitcracker$0$16$00000000000000000000000000000000$", 0) == 0);

    CHECK(error_code([&] { parse_hash_line("$bitlocker$" + line.substr(12)); }) == Errc::HashMagic);
    CHECK(error_code([&] { parse_hash_line(line + "$00"); }) == Errc::HashFieldCount);
    const std::string salt_hex = to_hex(p.salt);
    std::string short_salt = line;
    short_salt.replace(short_salt.find(salt_hex), salt_hex.size(), salt_hex.substr(2));
    CHECK(error_code([&] { parse_hash_line(short_salt); }) == Errc::HashLength);
    std::string odd = line;
    odd.pop_back();
    CHECK(error_code([&] { parse_hash_line(odd); }) == Errc::HashHex);
    std::string mismatch = line;
    mismatch.replace(mismatch.find("$44$"), 4, "$45$");
    CHECK(error_code([&] { parse_hash_line(mismatch); }) == Errc::HashLength);
    std::string bad_method = line;
    bad_method[12] = '7';
    CHECK(error_code([&] { parse_hash_line(bad_method); }) == Errc::HashValue);
    std::string bad_hex = line;
    bad_hex[line.size() - 3] = 'g';
    CHECK(error_code([&] { parse_hash_line(bad_hex); }) == Errc::HashHex);
}

TEST_CASE("hash line carries a non-default iteration count") {
    VmkProtector p = sample_protector();
    p.iterations = 2048;
    CHECK(serialize_hash_line(p).find("$2048$") != std::string::npos);
    CHECK(parse_hash_line(serialize_hash_line(p)).iterations == 2048);
}

TEST_CASE("fixtures differing only in salt have different ciphertexts") {
    std::mt19937_64 rng(40);
    const auto vmk = testsupport::vmk_plaintext(rng);
    auto a = testsupport::protector(rng, ProtectionMethod::UserPassword, "openwall");
    auto b = a;
    b.salt[0] ^= 1;
    FixtureLayout layout;
    layout.iterations = kIterations;
    const auto fa = build_fixture_image({a}, vmk, layout);
    const auto fb = build_fixture_image({b}, vmk, layout);
    CHECK(fa.protectors[0].encrypted_vmk != fb.protectors[0].encrypted_vmk);
}

TEST_CASE("fixture invariants") {
    std::mt19937_64 rng(41);
    auto vmk = testsupport::vmk_plaintext(rng);
    const auto p = testsupport::protector(rng, ProtectionMethod::UserPassword, "pw");
    auto bad = vmk;
    bad[0] = 0;
    CHECK(error_code([&] { build_fixture_image({p}, bad); }) == Errc::FixtureInvariant);
    auto bad_secret = testsupport::protector(rng, ProtectionMethod::RecoveryPassword, "111111-22");
    CHECK(error_code([&] { build_fixture_image({bad_secret}, vmk); }) == Errc::FixtureInvariant);
    FixtureLayout tiny;
    tiny.iterations = kIterations;
    tiny.image_size = 0x3000;
    CHECK(error_code([&] { build_fixture_image({p}, vmk, tiny); }) == Errc::FixtureInvariant);
}

TEST_CASE("volume image reads are bounds checked") {
    const auto image = VolumeImage::from_bytes(Bytes(2048, 7));
    CHECK(image.read(2040, 8).size() == 8);
    CHECK(error_code([&] { image.read(2041, 8); }) == Errc::Io);
    CHECK(error_code([&] { image.read(~0ull, 1); }) == Errc::Io);
    CHECK(error_code([] { VolumeImage::open("/nonexistent/vmkcrack.img"); }) == Errc::Io);
}

TEST_CASE("parser survives 10,000 random mutations") {
    const auto planted = testsupport::two_protector_fixture(50, kIterations);
    const Bytes& clean = planted.fixture.image;
    std::mt19937_64 rng(51);
    int parsed = 0, rejected = 0;
    double worst = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        Bytes mutated = clean;
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int e = 0; e < edits; ++e) {
            // Mostly inside the first block, where the structure lives.
            const std::size_t at = rng() % 8 != 0 ? 0x2000 + rng() % 0x200 : rng() % mutated.size();
            mutated[at] = static_cast<std::uint8_t>(rng());
        }
        const auto start = std::chrono::steady_clock::now();
        try {
            const auto scan = scan_image(VolumeImage::from_bytes(std::move(mutated)));
            for (const auto& p : scan.extraction.protectors) parse_hash_line(serialize_hash_line(p));
            ++parsed;
        } catch (const Error&) {
            ++rejected;
        }
        worst = std::max(worst, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    CHECK(parsed + rejected == 10000);
    CHECK(worst < 1.0);
}

}
