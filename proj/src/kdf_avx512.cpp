// Sixteen-candidate multi-buffer stretching loop on AVX-512F. Every 512-bit
// register holds the same SHA-256 word for sixteen independent candidates;
// second-block schedule words are scalar and broadcast, since they depend only
// on salt and counter.

#include <cstring>

#include "kdf_kernels.hpp"

#if defined(__x86_64__)
#include <immintrin.h>
#define VMK_HAVE_AVX512 1
#else
#define VMK_HAVE_AVX512 0
#endif

namespace vmkcrack::kdf::detail {

#if VMK_HAVE_AVX512

bool cpu_has_avx512() noexcept {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx512f");
}

namespace {

#define VMK_AVX512 __attribute__((target("avx512f")))

constexpr int kLanes = 16;

using V = __m512i;

VMK_AVX512 inline V add(V a, V b) { return _mm512_add_epi32(a, b); }

VMK_AVX512 inline V big_sigma0(V x) {
    return _mm512_ternarylogic_epi32(_mm512_ror_epi32(x, 2), _mm512_ror_epi32(x, 13), _mm512_ror_epi32(x, 22), 0x96);
}

VMK_AVX512 inline V big_sigma1(V x) {
    return _mm512_ternarylogic_epi32(_mm512_ror_epi32(x, 6), _mm512_ror_epi32(x, 11), _mm512_ror_epi32(x, 25), 0x96);
}

VMK_AVX512 inline V small_sigma0(V x) {
    return _mm512_ternarylogic_epi32(_mm512_ror_epi32(x, 7), _mm512_ror_epi32(x, 18), _mm512_srli_epi32(x, 3), 0x96);
}

VMK_AVX512 inline V small_sigma1(V x) {
    return _mm512_ternarylogic_epi32(_mm512_ror_epi32(x, 17), _mm512_ror_epi32(x, 19), _mm512_srli_epi32(x, 10), 0x96);
}

VMK_AVX512 inline V choose(V e, V f, V g) { return _mm512_ternarylogic_epi32(e, f, g, 0xca); }
VMK_AVX512 inline V majority(V a, V b, V c) { return _mm512_ternarylogic_epi32(a, b, c, 0xe8); }

// Working variables are renamed per round, as in the scalar unrolled path.
VMK_AVX512 inline void round(V a, V b, V c, V& d, V e, V f, V g, V& h, V wk) {
    const V t1 = add(add(h, big_sigma1(e)), add(choose(e, f, g), wk));
    const V t2 = add(big_sigma0(a), majority(a, b, c));
    d = add(d, t1);
    h = add(t1, t2);
}

// W[t] + K[t] for the first block, extending the schedule in place.
struct FirstBlockWords {
    V* w;
    const V* secret_wk;

    VMK_AVX512 V operator()(int t) const {
        if (t < 8) return add(w[t], _mm512_set1_epi32(static_cast<int>(sha256::kRoundConstants[t])));
        if (t < 16) return secret_wk[t - 8];
        const int i = t & 15;
        w[i] = add(add(small_sigma1(w[(t - 2) & 15]), w[(t - 7) & 15]), add(small_sigma0(w[(t - 15) & 15]), w[i]));
        return add(w[i], _mm512_set1_epi32(static_cast<int>(sha256::kRoundConstants[t])));
    }
};

struct SecondBlockWords {
    const sha256::Word* row;

    VMK_AVX512 V operator()(int t) const {
        return _mm512_set1_epi32(static_cast<int>(row[t] + sha256::kRoundConstants[t]));
    }
};

struct State {
    V s[8];
};

// 64 rounds; wk(t) supplies W[t] + K[t].
template <typename WordSource>
VMK_AVX512 inline void rounds64(State& st, const WordSource& wk) {
    V a = st.s[0], b = st.s[1], c = st.s[2], d = st.s[3], e = st.s[4], f = st.s[5], g = st.s[6], h = st.s[7];
#pragma GCC unroll 8
    for (int t = 0; t < 64; t += 8) {
        round(a, b, c, d, e, f, g, h, wk(t + 0));
        round(h, a, b, c, d, e, f, g, wk(t + 1));
        round(g, h, a, b, c, d, e, f, wk(t + 2));
        round(f, g, h, a, b, c, d, e, wk(t + 3));
        round(e, f, g, h, a, b, c, d, wk(t + 4));
        round(d, e, f, g, h, a, b, c, wk(t + 5));
        round(c, d, e, f, g, h, a, b, wk(t + 6));
        round(b, c, d, e, f, g, h, a, wk(t + 7));
    }
    st.s[0] = a;
    st.s[1] = b;
    st.s[2] = c;
    st.s[3] = d;
    st.s[4] = e;
    st.s[5] = f;
    st.s[6] = g;
    st.s[7] = h;
}

VMK_AVX512 bool run16(const Hash32* initial, std::size_t count, const Salt& salt, std::uint64_t iterations,
                      const sha256::Word* rows, IntermediateKey* out, const AbortCheck& abort) {
    alignas(64) std::uint32_t lanes[8][kLanes];
    for (int j = 0; j < 8; ++j) {
        for (int l = 0; l < kLanes; ++l) {
            // Unused lanes replay lane 0 and are discarded.
            const std::size_t src = static_cast<std::size_t>(l) < count ? static_cast<std::size_t>(l) : 0;
            lanes[j][l] = load_be32(initial[src].data() + 4 * j);
        }
    }
    V secret[8];
    V prev[8];
    for (int j = 0; j < 8; ++j) {
        secret[j] = _mm512_load_si512(lanes[j]);
        prev[j] = _mm512_setzero_si512();
    }

    V iv[8];
    const auto iv_words = sha256::HashState::initial().h;
    for (int j = 0; j < 8; ++j) iv[j] = _mm512_set1_epi32(static_cast<int>(iv_words[j]));

    // Secret words never change, so W[t] + K[t] for t = 8..15 is fixed.
    V secret_wk[8];
    for (int j = 0; j < 8; ++j) secret_wk[j] = add(secret[j], _mm512_set1_epi32(static_cast<int>(sha256::kRoundConstants[8 + j])));

    std::array<sha256::Word, 16> second = second_block_words(salt, 0);
    alignas(64) sha256::Word fly[64];

    for (std::uint64_t h = 0; h < iterations; ++h) {
        if ((h & kAbortPollMask) == 0 && abort && abort()) return false;

        // First block: W rolls through a sixteen-entry window.
        V w[16];
        for (int j = 0; j < 8; ++j) {
            w[j] = prev[j];
            w[8 + j] = secret[j];
        }
        State st;
        for (int j = 0; j < 8; ++j) st.s[j] = iv[j];
        rounds64(st, FirstBlockWords{w, secret_wk});
        State mid;
        for (int j = 0; j < 8; ++j) {
            st.s[j] = add(st.s[j], iv[j]);
            mid.s[j] = st.s[j];
        }

        const sha256::Word* row;
        if (rows) {
            row = rows + h * WScheduleTable::kWordsPerRow;
        } else {
            set_counter_words(second, h);
            const sha256::MessageSchedule s = sha256::schedule_from_words(second);
            std::memcpy(fly, s.w.data(), sizeof(fly));
            row = fly;
        }
        rounds64(st, SecondBlockWords{row});
        for (int j = 0; j < 8; ++j) prev[j] = add(st.s[j], mid.s[j]);
    }

    for (int j = 0; j < 8; ++j) _mm512_store_si512(lanes[j], prev[j]);
    for (std::size_t l = 0; l < count; ++l) {
        for (int j = 0; j < 8; ++j) store_be32(out[l].key.data() + 4 * j, lanes[j][l]);
    }
    return true;
}

}  // namespace

bool derive_avx512(std::span<const Hash32> initial_hashes, const Salt& salt, std::uint64_t iterations,
                   const sha256::Word* rows, std::span<IntermediateKey> out, const AbortCheck& abort) {
    for (std::size_t i = 0; i < initial_hashes.size(); i += kLanes) {
        const std::size_t count = std::min<std::size_t>(kLanes, initial_hashes.size() - i);
        if (!run16(&initial_hashes[i], count, salt, iterations, rows, &out[i], abort)) return false;
    }
    return true;
}

#else

bool cpu_has_avx512() noexcept { return false; }

bool derive_avx512(std::span<const Hash32> initial_hashes, const Salt& salt, std::uint64_t iterations,
                   const sha256::Word* rows, std::span<IntermediateKey> out, const AbortCheck& abort) {
    for (std::size_t i = 0; i < initial_hashes.size(); ++i) {
        if (!derive_portable(Hash32{}, initial_hashes[i], salt, 0, iterations, rows, out[i], abort)) return false;
    }
    return true;
}

#endif

}  // namespace vmkcrack::kdf::detail
