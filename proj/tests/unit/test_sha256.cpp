#include <doctest.h>

#include <random>
#include <string>

#include "oracles.hpp"
#include "vmkcrack/error.hpp"
#include "vmkcrack/sha256.hpp"

using namespace vmkcrack;

namespace {

std::string hex(const sha256::Digest& d) { return to_hex(d); }

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
}

}  // namespace

TEST_SUITE("sha256") {

TEST_CASE("FIPS 180-4 known answers") {
    CHECK(hex(sha256::digest(std::string_view(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hex(sha256::digest(std::string_view("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hex(sha256::digest(std::string_view("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    const std::string million(1000000, 'a');
    CHECK(hex(sha256::digest(std::string_view(million))) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("digest agrees with OpenSSL for every length up to 300 bytes") {
    std::mt19937_64 rng(1);
    for (std::size_t n = 0; n <= 300; ++n) {
        const Bytes msg = random_bytes(rng, n);
        REQUIRE(sha256::digest(msg) == oracle::sha256(msg));
    }
}

TEST_CASE("streaming in arbitrary chunks matches one-shot") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const Bytes msg = random_bytes(rng, rng() % 1000);
        sha256::Hasher h;
        std::size_t pos = 0;
        while (pos < msg.size()) {
            const std::size_t take = std::min<std::size_t>(msg.size() - pos, rng() % 130);
            h.update(ByteView(msg).subspan(pos, take));
            pos += take;
        }
        REQUIRE(h.finish() == oracle::sha256(msg));
    }
}

TEST_CASE("unrolled compression equals the reference loop") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        sha256::HashState st;
        for (auto& w : st.h) w = static_cast<sha256::Word>(rng());
        const Bytes block = random_bytes(rng, 64);
        const auto sched = sha256::schedule_words(block);
        REQUIRE(sha256::compress(st, sched) == sha256::compress_looped(st, sched));
    }
}

TEST_CASE("schedule from bytes and from words agree") {
    std::mt19937_64 rng(4);
    const Bytes block = random_bytes(rng, 64);
    std::array<sha256::Word, 16> words{};
    for (int i = 0; i < 16; ++i) words[i] = load_be32(block.data() + 4 * i);
    const auto s = sha256::schedule_words(block);
    CHECK(s == sha256::schedule_from_words(words));
    for (int i = 0; i < 16; ++i) CHECK(s.w[i] == words[i]);
}

TEST_CASE("schedule_words rejects blocks that are not 64 bytes") {
    const Bytes short_block(63), long_block(65);
    CHECK_THROWS_AS(sha256::schedule_words(short_block), Error);
    try {
        sha256::schedule_words(long_block);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidBlock);
    }
}

TEST_CASE("single block compression from the initial state is the digest of a padded block") {
    // "abc" padded by hand into one block.
    Bytes block(64, 0);
    block[0] = 'a';
    block[1] = 'b';
    block[2] = 'c';
    block[3] = 0x80;
    block[63] = 24;
    const auto st = sha256::compress(sha256::HashState::initial(), sha256::schedule_words(block));
    CHECK(sha256::to_digest(st) == sha256::digest(std::string_view("abc")));
}

}
