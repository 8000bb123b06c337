#include "vmkcrack/sha256.hpp"

#include <cstring>

#include "vmkcrack/error.hpp"

namespace vmkcrack::sha256 {

namespace {

constexpr Word rotr(Word x, int n) { return (x >> n) | (x << (32 - n)); }
constexpr Word ch(Word x, Word y, Word z) { return z ^ (x & (y ^ z)); }
constexpr Word maj(Word x, Word y, Word z) { return (x & y) | (z & (x | y)); }
constexpr Word big_sigma0(Word x) { return rotr(x, 2) ^ rotr(x, 13) ^ rotr(x, 22); }
constexpr Word big_sigma1(Word x) { return rotr(x, 6) ^ rotr(x, 11) ^ rotr(x, 25); }
constexpr Word small_sigma0(Word x) { return rotr(x, 7) ^ rotr(x, 18) ^ (x >> 3); }
constexpr Word small_sigma1(Word x) { return rotr(x, 17) ^ rotr(x, 19) ^ (x >> 10); }

void expand(std::array<Word, 64>& w) {
    for (int t = 16; t < 64; ++t) {
        w[t] = small_sigma1(w[t - 2]) + w[t - 7] + small_sigma0(w[t - 15]) + w[t - 16];
    }
}

}  // namespace

MessageSchedule schedule_words(ByteView block) {
    if (block.size() != kBlockSize) {
        throw Error(Errc::InvalidBlock, "SHA-256 block must be 64 bytes, got " + std::to_string(block.size()));
    }
    MessageSchedule s;
    for (int t = 0; t < 16; ++t) s.w[t] = load_be32(block.data() + 4 * t);
    expand(s.w);
    return s;
}

MessageSchedule schedule_from_words(std::span<const Word, 16> words) {
    MessageSchedule s;
    std::copy(words.begin(), words.end(), s.w.begin());
    expand(s.w);
    return s;
}

// One round with the working variables renamed instead of shifted.
#define VMK_SHA_ROUND(a, b, c, d, e, f, g, h, t)                                     \
    do {                                                                             \
        Word t1 = h + big_sigma1(e) + ch(e, f, g) + kRoundConstants[t] + w[t];       \
        Word t2 = big_sigma0(a) + maj(a, b, c);                                      \
        d += t1;                                                                     \
        h = t1 + t2;                                                                 \
    } while (0)

#define VMK_SHA_ROUND8(t)                              \
    VMK_SHA_ROUND(a, b, c, d, e, f, g, h, (t) + 0);    \
    VMK_SHA_ROUND(h, a, b, c, d, e, f, g, (t) + 1);    \
    VMK_SHA_ROUND(g, h, a, b, c, d, e, f, (t) + 2);    \
    VMK_SHA_ROUND(f, g, h, a, b, c, d, e, (t) + 3);    \
    VMK_SHA_ROUND(e, f, g, h, a, b, c, d, (t) + 4);    \
    VMK_SHA_ROUND(d, e, f, g, h, a, b, c, (t) + 5);    \
    VMK_SHA_ROUND(c, d, e, f, g, h, a, b, (t) + 6);    \
    VMK_SHA_ROUND(b, c, d, e, f, g, h, a, (t) + 7)

HashState compress(const HashState& state, const MessageSchedule& schedule) {
    const Word* w = schedule.w.data();
    Word a = state.h[0], b = state.h[1], c = state.h[2], d = state.h[3];
    Word e = state.h[4], f = state.h[5], g = state.h[6], h = state.h[7];

    VMK_SHA_ROUND8(0);
    VMK_SHA_ROUND8(8);
    VMK_SHA_ROUND8(16);
    VMK_SHA_ROUND8(24);
    VMK_SHA_ROUND8(32);
    VMK_SHA_ROUND8(40);
    VMK_SHA_ROUND8(48);
    VMK_SHA_ROUND8(56);

    return HashState{{state.h[0] + a, state.h[1] + b, state.h[2] + c, state.h[3] + d,
                      state.h[4] + e, state.h[5] + f, state.h[6] + g, state.h[7] + h}};
}

#undef VMK_SHA_ROUND8
#undef VMK_SHA_ROUND

HashState compress_looped(const HashState& state, const MessageSchedule& schedule) {
    std::array<Word, 8> v = state.h;
    for (int t = 0; t < 64; ++t) {
        Word t1 = v[7] + big_sigma1(v[4]) + ch(v[4], v[5], v[6]) + kRoundConstants[t] + schedule.w[t];
        Word t2 = big_sigma0(v[0]) + maj(v[0], v[1], v[2]);
        v[7] = v[6];
        v[6] = v[5];
        v[5] = v[4];
        v[4] = v[3] + t1;
        v[3] = v[2];
        v[2] = v[1];
        v[1] = v[0];
        v[0] = t1 + t2;
    }
    HashState out;
    for (int i = 0; i < 8; ++i) out.h[i] = state.h[i] + v[i];
    return out;
}

Digest to_digest(const HashState& state) {
    Digest out;
    for (int i = 0; i < 8; ++i) store_be32(out.data() + 4 * i, state.h[i]);
    return out;
}

Hasher& Hasher::update(ByteView data) {
    total_bytes_ += data.size();
    std::size_t pos = 0;
    if (buffered_ > 0) {
        std::size_t take = std::min(kBlockSize - buffered_, data.size());
        std::memcpy(buffer_.data() + buffered_, data.data(), take);
        buffered_ += take;
        pos = take;
        if (buffered_ < kBlockSize) return *this;
        state_ = compress(state_, schedule_words(buffer_));
        buffered_ = 0;
    }
    while (data.size() - pos >= kBlockSize) {
        state_ = compress(state_, schedule_words(data.subspan(pos, kBlockSize)));
        pos += kBlockSize;
    }
    if (pos < data.size()) {
        std::memcpy(buffer_.data(), data.data() + pos, data.size() - pos);
        buffered_ = data.size() - pos;
    }
    return *this;
}

Hasher& Hasher::update(std::string_view text) {
    return update(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Digest Hasher::finish() {
    const std::uint64_t bit_length = total_bytes_ * 8;
    buffer_[buffered_++] = 0x80;
    if (buffered_ > kBlockSize - 8) {
        std::memset(buffer_.data() + buffered_, 0, kBlockSize - buffered_);
        state_ = compress(state_, schedule_words(buffer_));
        buffered_ = 0;
    }
    std::memset(buffer_.data() + buffered_, 0, kBlockSize - 8 - buffered_);
    store_be64(buffer_.data() + kBlockSize - 8, bit_length);
    state_ = compress(state_, schedule_words(buffer_));
    Digest out = to_digest(state_);
    *this = Hasher{};
    return out;
}

Digest digest(ByteView message) { return Hasher{}.update(message).finish(); }

Digest digest(std::string_view message) { return Hasher{}.update(message).finish(); }

}  // namespace vmkcrack::sha256
