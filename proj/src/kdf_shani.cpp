// Stretching loop on the x86 SHA extensions. Each iteration's chain is
// strictly serial, so several candidates run in lockstep to keep the
// sha256rnds2 pipeline busy. All lanes read the same W table row.

#include <cstring>

#include "kdf_kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <cpuid.h>
#include <immintrin.h>
#define VMK_HAVE_X86 1
#else
#define VMK_HAVE_X86 0
#endif

namespace vmkcrack::kdf::detail {

#if VMK_HAVE_X86

bool cpu_has_shani() noexcept {
    unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    const bool ssse3 = (ecx & (1u << 9)) != 0;
    const bool sse41 = (ecx & (1u << 19)) != 0;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    const bool sha = (ebx & (1u << 29)) != 0;
    return ssse3 && sse41 && sha;
}

namespace {

#define VMK_SHANI __attribute__((target("sha,sse4.1,ssse3")))

constexpr int kMaxLanes = 4;

VMK_SHANI inline __m128i round_constants(int group) {
    return _mm_loadu_si128(reinterpret_cast<const __m128i*>(sha256::kRoundConstants.data() + 4 * group));
}

VMK_SHANI inline __m128i bswap_words_mask() {
    return _mm_set_epi8(12, 13, 14, 15, 8, 9, 10, 11, 4, 5, 6, 7, 0, 1, 2, 3);
}

// W[t..t+3] from the four previous groups.
VMK_SHANI inline __m128i next_group(__m128i w16, __m128i w12, __m128i w8, __m128i w4) {
    __m128i t = _mm_sha256msg1_epu32(w16, w12);
    t = _mm_add_epi32(t, _mm_alignr_epi8(w4, w8, 4));
    return _mm_sha256msg2_epu32(t, w4);
}

VMK_SHANI inline void four_rounds(__m128i& abef, __m128i& cdgh, __m128i wk) {
    cdgh = _mm_sha256rnds2_epu32(cdgh, abef, wk);
    abef = _mm_sha256rnds2_epu32(abef, cdgh, _mm_shuffle_epi32(wk, 0x0e));
}

struct PackedState {
    __m128i abef;
    __m128i cdgh;
};

VMK_SHANI inline PackedState pack(const sha256::HashState& s) {
    __m128i tmp = _mm_loadu_si128(reinterpret_cast<const __m128i*>(s.h.data()));
    __m128i hi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(s.h.data() + 4));
    tmp = _mm_shuffle_epi32(tmp, 0xb1);
    hi = _mm_shuffle_epi32(hi, 0x1b);
    return {_mm_alignr_epi8(tmp, hi, 8), _mm_blend_epi16(hi, tmp, 0xf0)};
}

// Back to word order: lo = h0..h3, hi = h4..h7.
VMK_SHANI inline void unpack(__m128i abef, __m128i cdgh, __m128i& lo, __m128i& hi) {
    const __m128i feba = _mm_shuffle_epi32(abef, 0x1b);
    const __m128i dchg = _mm_shuffle_epi32(cdgh, 0xb1);
    lo = _mm_blend_epi16(feba, dchg, 0xf0);
    hi = _mm_alignr_epi8(dchg, feba, 8);
}

template <int L>
VMK_SHANI bool run_lanes(const Hash32* initial, const Salt& salt, std::uint64_t iterations, const sha256::Word* rows,
                         IntermediateKey* out, const AbortCheck& abort) {
    const __m128i bswap = bswap_words_mask();
    const PackedState iv = pack(sha256::HashState::initial());

    __m128i secret_lo[L], secret_hi[L], prev_lo[L], prev_hi[L];
    for (int l = 0; l < L; ++l) {
        secret_lo[l] = _mm_shuffle_epi8(_mm_loadu_si128(reinterpret_cast<const __m128i*>(initial[l].data())), bswap);
        secret_hi[l] =
            _mm_shuffle_epi8(_mm_loadu_si128(reinterpret_cast<const __m128i*>(initial[l].data() + 16)), bswap);
        prev_lo[l] = _mm_setzero_si128();
        prev_hi[l] = _mm_setzero_si128();
    }

    std::array<sha256::Word, 16> second = second_block_words(salt, 0);
    const __m128i salt_words = _mm_loadu_si128(reinterpret_cast<const __m128i*>(second.data()));
    const __m128i tail_words = _mm_loadu_si128(reinterpret_cast<const __m128i*>(second.data() + 12));

    for (std::uint64_t h = 0; h < iterations; ++h) {
        if ((h & kAbortPollMask) == 0 && abort && abort()) return false;

        __m128i abef[L], cdgh[L], mid_abef[L], mid_cdgh[L];
        __m128i m[L][4];

        // First block: previous digest words then the secret hash words.
        for (int l = 0; l < L; ++l) {
            abef[l] = iv.abef;
            cdgh[l] = iv.cdgh;
            m[l][0] = prev_lo[l];
            m[l][1] = prev_hi[l];
            m[l][2] = secret_lo[l];
            m[l][3] = secret_hi[l];
        }
#pragma GCC unroll 16
        for (int g = 0; g < 16; ++g) {
            const __m128i k = round_constants(g);
            for (int l = 0; l < L; ++l) {
                if (g >= 4) m[l][g & 3] = next_group(m[l][g & 3], m[l][(g + 1) & 3], m[l][(g + 2) & 3], m[l][(g + 3) & 3]);
                four_rounds(abef[l], cdgh[l], _mm_add_epi32(m[l][g & 3], k));
            }
        }
        for (int l = 0; l < L; ++l) {
            abef[l] = _mm_add_epi32(abef[l], iv.abef);
            cdgh[l] = _mm_add_epi32(cdgh[l], iv.cdgh);
            mid_abef[l] = abef[l];
            mid_cdgh[l] = cdgh[l];
        }

        // Second block: identical for every lane.
        if (rows) {
            const sha256::Word* row = rows + h * WScheduleTable::kWordsPerRow;
#pragma GCC unroll 16
            for (int g = 0; g < 16; ++g) {
                const __m128i wk = _mm_add_epi32(_mm_loadu_si128(reinterpret_cast<const __m128i*>(row + 4 * g)),
                                                 round_constants(g));
                for (int l = 0; l < L; ++l) four_rounds(abef[l], cdgh[l], wk);
            }
        } else {
            set_counter_words(second, h);
            __m128i w[4] = {salt_words, _mm_loadu_si128(reinterpret_cast<const __m128i*>(second.data() + 4)),
                            _mm_setzero_si128(), tail_words};
#pragma GCC unroll 16
            for (int g = 0; g < 16; ++g) {
                if (g >= 4) w[g & 3] = next_group(w[g & 3], w[(g + 1) & 3], w[(g + 2) & 3], w[(g + 3) & 3]);
                const __m128i wk = _mm_add_epi32(w[g & 3], round_constants(g));
                for (int l = 0; l < L; ++l) four_rounds(abef[l], cdgh[l], wk);
            }
        }

        for (int l = 0; l < L; ++l) {
            unpack(_mm_add_epi32(abef[l], mid_abef[l]), _mm_add_epi32(cdgh[l], mid_cdgh[l]), prev_lo[l], prev_hi[l]);
        }
    }

    for (int l = 0; l < L; ++l) {
        _mm_storeu_si128(reinterpret_cast<__m128i*>(out[l].key.data()), _mm_shuffle_epi8(prev_lo[l], bswap));
        _mm_storeu_si128(reinterpret_cast<__m128i*>(out[l].key.data() + 16), _mm_shuffle_epi8(prev_hi[l], bswap));
    }
    return true;
}

}  // namespace

bool derive_shani(std::span<const Hash32> initial_hashes, const Salt& salt, std::uint64_t iterations,
                  const sha256::Word* rows, std::span<IntermediateKey> out, const AbortCheck& abort) {
    std::size_t i = 0;
    const std::size_t n = initial_hashes.size();
    while (i < n) {
        const std::size_t lanes = std::min<std::size_t>(kMaxLanes, n - i);
        bool ok = true;
        switch (lanes) {
            case 4: ok = run_lanes<4>(&initial_hashes[i], salt, iterations, rows, &out[i], abort); break;
            case 3: ok = run_lanes<3>(&initial_hashes[i], salt, iterations, rows, &out[i], abort); break;
            case 2: ok = run_lanes<2>(&initial_hashes[i], salt, iterations, rows, &out[i], abort); break;
            default: ok = run_lanes<1>(&initial_hashes[i], salt, iterations, rows, &out[i], abort); break;
        }
        if (!ok) return false;
        i += lanes;
    }
    return true;
}

#else

bool cpu_has_shani() noexcept { return false; }

bool derive_shani(std::span<const Hash32> initial_hashes, const Salt& salt, std::uint64_t iterations,
                  const sha256::Word* rows, std::span<IntermediateKey> out, const AbortCheck& abort) {
    for (std::size_t i = 0; i < initial_hashes.size(); ++i) {
        if (!derive_portable(Hash32{}, initial_hashes[i], salt, 0, iterations, rows, out[i], abort)) return false;
    }
    return true;
}

#endif

}  // namespace vmkcrack::kdf::detail
