#include <cstring>

#include "kdf_kernels.hpp"

namespace vmkcrack::kdf::detail {

std::array<sha256::Word, 16> second_block_words(const Salt& salt, std::uint64_t hash_count) {
    std::array<sha256::Word, 16> words{};
    for (int i = 0; i < 4; ++i) words[i] = load_be32(salt.data() + 4 * i);
    set_counter_words(words, hash_count);
    words[6] = 0x80000000u;
    words[15] = static_cast<sha256::Word>(kMessageSize * 8);
    return words;
}

bool derive_portable(const Hash32& update_hash, const Hash32& initial_hash, const Salt& salt, std::uint64_t start,
                     std::uint64_t iterations, const sha256::Word* rows, IntermediateKey& out,
                     const AbortCheck& abort) {
    std::array<sha256::Word, 16> first{};
    for (int i = 0; i < 8; ++i) {
        first[i] = load_be32(update_hash.data() + 4 * i);
        first[8 + i] = load_be32(initial_hash.data() + 4 * i);
    }
    std::array<sha256::Word, 16> second = second_block_words(salt, start);
    sha256::MessageSchedule on_the_fly;
    sha256::MessageSchedule from_table;

    for (std::uint64_t h = start; h < iterations; ++h) {
        if ((h & kAbortPollMask) == 0 && abort && abort()) return false;

        const sha256::HashState mid = sha256::compress(sha256::HashState::initial(), sha256::schedule_from_words(first));

        const sha256::MessageSchedule* schedule;
        if (rows) {
            std::memcpy(from_table.w.data(), rows + h * WScheduleTable::kWordsPerRow, sizeof(from_table.w));
            schedule = &from_table;
        } else {
            set_counter_words(second, h);
            on_the_fly = sha256::schedule_from_words(second);
            schedule = &on_the_fly;
        }
        const sha256::HashState final_state = sha256::compress(mid, *schedule);
        std::copy(final_state.h.begin(), final_state.h.end(), first.begin());
    }

    for (int i = 0; i < 8; ++i) store_be32(out.key.data() + 4 * i, first[i]);
    return true;
}

}  // namespace vmkcrack::kdf::detail
