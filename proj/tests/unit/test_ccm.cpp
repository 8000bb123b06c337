#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vmkcrack/ccm.hpp"
#include "vmkcrack/error.hpp"

using namespace vmkcrack;
using namespace vmkcrack::ccm;

namespace {

template <std::size_t N>
std::array<std::uint8_t, N> random_array(std::mt19937_64& rng) {
    std::array<std::uint8_t, N> a{};
    for (auto& b : a) b = static_cast<std::uint8_t>(rng());
    return a;
}

Bytes valid_vmk(std::mt19937_64& rng) {
    Bytes vmk = {0x2c, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x03, 0x20, 0x00, 0x00};
    for (int i = 0; i < 32; ++i) vmk.push_back(static_cast<std::uint8_t>(rng()));
    return vmk;
}

struct Wrapped {
    std::array<std::uint8_t, 32> key;
    VmkProtector protector;
    Bytes plaintext;
};

Wrapped wrap(std::mt19937_64& rng) {
    Wrapped w;
    w.key = random_array<32>(rng);
    w.plaintext = valid_vmk(rng);
    w.protector.nonce = random_array<12>(rng);
    const auto enc = encrypt_vmk_fixture(AesKey256(w.key), w.protector.nonce, w.plaintext);
    w.protector.mac = enc.mac;
    w.protector.encrypted_vmk = enc.ciphertext;
    return w;
}

}  // namespace

TEST_SUITE("ccm") {

TEST_CASE("FIPS-197 AES-256 known answer") {
    std::array<std::uint8_t, 32> key{};
    for (int i = 0; i < 32; ++i) key[i] = static_cast<std::uint8_t>(i);
    Block pt{};
    for (int i = 0; i < 16; ++i) pt[i] = static_cast<std::uint8_t>(0x11 * i);
    CHECK(to_hex(AesKey256(key).encrypt_block(pt)) == "8ea2b7ca516745bfeafc49904b496089");
}

TEST_CASE("key schedule starts with the key and ends with the FIPS-197 last round key") {
    std::array<std::uint8_t, 32> key{};
    for (int i = 0; i < 32; ++i) key[i] = static_cast<std::uint8_t>(i);
    const AesKey256 k(key);
    CHECK(to_hex(k.round_keys()[0]) == "000102030405060708090a0b0c0d0e0f");
    CHECK(to_hex(k.round_keys()[1]) == "101112131415161718191a1b1c1d1e1f");
    CHECK(to_hex(k.round_keys()[14]) == "24fc79ccbf0979e9371ac23c6d68de36");
}

TEST_CASE("AES-256 matches OpenSSL on random keys and blocks") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto key = random_array<32>(rng);
        const auto block = random_array<16>(rng);
        REQUIRE(AesKey256(key).encrypt_block(block) == oracle::aes256_block(key, block));
    }
}

TEST_CASE("fixture encryption matches RFC 3610 CCM from OpenSSL") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        const auto w = wrap(rng);
        const auto sealed = oracle::ccm_encrypt(w.key, w.protector.nonce, w.plaintext);
        REQUIRE(sealed.ciphertext == w.protector.encrypted_vmk);
        REQUIRE(sealed.tag == w.protector.mac);
        REQUIRE(oracle::ccm_decrypt(w.key, w.protector.nonce, w.protector.encrypted_vmk, w.protector.mac) == w.plaintext);
    }
}

TEST_CASE("decrypt and MAC recompute invert the fixture encryption") {
    std::mt19937_64 rng(23);
    const auto w = wrap(rng);
    const AesKey256 key(w.key);
    const Bytes pt = decrypt_vmk(key, w.protector.nonce, w.protector.encrypted_vmk);
    CHECK(pt == w.plaintext);
    CHECK(compute_cbc_mac(key, w.protector.nonce, pt) == decrypt_mac(key, w.protector.nonce, w.protector.mac));
}

TEST_CASE("verify_candidate in both modes") {
    std::mt19937_64 rng(24);
    const auto w = wrap(rng);
    Bytes out;
    CHECK(verify_candidate(AesKey256(w.key), w.protector, VerifyMode::Fast, &out));
    CHECK(out == w.plaintext);
    CHECK(verify_candidate(AesKey256(w.key), w.protector, VerifyMode::FullMac, nullptr));
    kdf::IntermediateKey ik;
    ik.key = w.key;
    CHECK(verify_candidate(ik, w.protector, VerifyMode::FullMac));

    auto wrong = w.key;
    wrong[0] ^= 0x80;
    CHECK_FALSE(verify_candidate(AesKey256(wrong), w.protector, VerifyMode::Fast, nullptr));
    CHECK_FALSE(verify_candidate(AesKey256(wrong), w.protector, VerifyMode::FullMac, nullptr));
}

TEST_CASE("fast mode accepts a valid header with a broken MAC, full mode does not") {
    std::mt19937_64 rng(25);
    auto w = wrap(rng);
    w.protector.mac[3] ^= 1;
    CHECK(verify_candidate(AesKey256(w.key), w.protector, VerifyMode::Fast, nullptr));
    CHECK_FALSE(verify_candidate(AesKey256(w.key), w.protector, VerifyMode::FullMac, nullptr));
}

TEST_CASE("every single-bit corruption of ciphertext, MAC or nonce fails the MAC check") {
    std::mt19937_64 rng(26);
    const auto w = wrap(rng);
    const AesKey256 key(w.key);
    for (std::size_t bit = 0; bit < w.protector.encrypted_vmk.size() * 8; ++bit) {
        auto p = w.protector;
        p.encrypted_vmk[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        REQUIRE_FALSE(verify_candidate(key, p, VerifyMode::FullMac, nullptr));
    }
    for (std::size_t bit = 0; bit < 128; ++bit) {
        auto p = w.protector;
        p.mac[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        REQUIRE_FALSE(verify_candidate(key, p, VerifyMode::FullMac, nullptr));
    }
    for (std::size_t bit = 0; bit < 96; ++bit) {
        auto p = w.protector;
        p.nonce[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        REQUIRE_FALSE(verify_candidate(key, p, VerifyMode::FullMac, nullptr));
    }
}

TEST_CASE("header check rules") {
    Bytes h = {0x2c, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x03, 0x20, 0x00, 0x00};
    CHECK(check_vmk_header(h));
    CHECK(check_vmk_header(h, HeaderPolicy{true}));
    CHECK_FALSE(check_vmk_header(ByteView(h).first(11)));

    auto with = [&](std::size_t i, std::uint8_t v) {
        Bytes c = h;
        c[i] = v;
        return c;
    };
    CHECK_FALSE(check_vmk_header(with(0, 0x2d)));
    CHECK_FALSE(check_vmk_header(with(1, 0x01)));
    CHECK_FALSE(check_vmk_header(with(4, 0x02)));
    CHECK_FALSE(check_vmk_header(with(5, 0x01)));
    // Bytes 2-3 and 6-7 are not constrained.
    CHECK(check_vmk_header(with(2, 0xff)));
    CHECK(check_vmk_header(with(7, 0xff)));
    CHECK(check_vmk_header(with(8, 0x00)));
    CHECK(check_vmk_header(with(8, 0x05)));
    CHECK_FALSE(check_vmk_header(with(8, 0x06)));
    CHECK_FALSE(check_vmk_header(with(9, 0x1f)));
    CHECK_FALSE(check_vmk_header(with(8, 0x00), HeaderPolicy{true}));
}

TEST_CASE("random headers are rejected") {
    std::mt19937_64 rng(27);
    int accepted = 0;
    for (int trial = 0; trial < 100000; ++trial) accepted += check_vmk_header(random_array<12>(rng));
    CHECK(accepted == 0);
}

TEST_CASE("counter field limits") {
    const AesKey256 key(std::array<std::uint8_t, 32>{});
    CHECK_NOTHROW(keystream_block(key, Nonce{}, kMaxCounter - 1));
    CHECK_THROWS_AS(keystream_block(key, Nonce{}, kMaxCounter), Error);
}

TEST_CASE("counter blocks carry flags, nonce and a big-endian counter") {
    std::mt19937_64 rng(28);
    const auto raw = random_array<32>(rng);
    const Nonce nonce = random_array<12>(rng);
    Block ctr{};
    ctr[0] = 0x02;
    std::copy(nonce.begin(), nonce.end(), ctr.begin() + 1);
    ctr[13] = 0x01;
    ctr[14] = 0x02;
    ctr[15] = 0x03;
    CHECK(keystream_block(AesKey256(raw), nonce, 0x010203) == oracle::aes256_block(raw, ctr));
}

TEST_CASE("fixture encryption refuses plaintext without a VMK header") {
    Bytes bad(44, 0);
    try {
        encrypt_vmk_fixture(AesKey256(std::array<std::uint8_t, 32>{}), Nonce{}, bad);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::FixtureInvariant);
    }
}

}
