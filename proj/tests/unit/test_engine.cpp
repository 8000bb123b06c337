#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "fixtures.hpp"
#include "vmkcrack/engine.hpp"

using namespace vmkcrack;
using namespace vmkcrack::engine;

namespace {

constexpr std::uint64_t kIterations = 64;

AttackConfig quick(unsigned threads = 2) {
    AttackConfig cfg;
    cfg.threads = threads;
    cfg.iterations = kIterations;
    cfg.batch_size = 8;
    return cfg;
}

const testsupport::Planted& planted() {
    static const auto p = testsupport::two_protector_fixture(77, kIterations);
    return p;
}

const VmkProtector& user_protector() { return planted().fixture.protectors[0]; }
const VmkProtector& recovery_protector() { return planted().fixture.protectors[1]; }

std::vector<std::string> words(std::size_t n, const std::string& prefix = "miss-") {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / ("vmkcrack-engine-" + name);
    std::ofstream(path, std::ios::binary) << content;
    return path;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("planted password is found among wrong ones") {
    const std::vector<std::string> list = {"wrong1", "wrong2", planted().password, "wrong3"};
    const auto r = run_attack(user_protector(), CandidateSource::in_memory(list), quick(4));
    REQUIRE(r.outcome == AttackResult::Outcome::Found);
    CHECK(r.found->candidate == planted().password);
    CHECK(r.found->source_index == 2);
    CHECK(r.found->vmk_plaintext == Bytes(planted().vmk.begin(), planted().vmk.end()));
    CHECK(to_hex(r.found->vmk_key()) == to_hex(ByteView(planted().vmk).subspan(12)));
    CHECK(r.tested >= 3);
}

TEST_CASE("exhausted attack tests every candidate") {
    for (unsigned threads : {1u, 3u}) {
        for (std::size_t batch : {1u, 7u, 64u}) {
            auto cfg = quick(threads);
            cfg.batch_size = batch;
            const auto r = run_attack(user_protector(), CandidateSource::in_memory(words(45)), cfg);
            CHECK(r.outcome == AttackResult::Outcome::Exhausted);
            CHECK(r.tested == 45);
            CHECK_FALSE(r.found.has_value());
        }
    }
}

TEST_CASE("earliest success wins regardless of threads and batch size") {
    // Two copies of the secret; the first must be reported.
    auto list = words(120);
    list[37] = planted().password;
    list[90] = planted().password;
    for (unsigned threads : {1u, 2u, 4u, 8u}) {
        for (std::size_t batch : {1u, 5u, 16u, 64u}) {
            auto cfg = quick(threads);
            cfg.batch_size = batch;
            const auto r = run_attack(user_protector(), CandidateSource::in_memory(list), cfg);
            REQUIRE(r.outcome == AttackResult::Outcome::Found);
            CHECK(r.found->source_index == 37);
        }
    }
}

TEST_CASE("both verification modes and table policies find the secret") {
    auto list = words(30);
    list[11] = planted().password;
    for (auto mode : {ccm::VerifyMode::Fast, ccm::VerifyMode::FullMac}) {
        for (auto policy : {WTablePolicy::Precompute, WTablePolicy::OnTheFly}) {
            auto cfg = quick();
            cfg.mode = mode;
            cfg.w_table_policy = policy;
            const auto r = run_attack(user_protector(), CandidateSource::in_memory(list), cfg);
            REQUIRE(r.outcome == AttackResult::Outcome::Found);
            CHECK(r.found->source_index == 11);
            CHECK(r.used_w_table == (policy == WTablePolicy::Precompute));
        }
    }
}

TEST_CASE("recovery list skips invalid lines and finds the secret") {
    const std::vector<std::string> list = {"not a recovery password", "111111-111111", planted().recovery,
                                           "000000-000000-000000-000000-000000-000000-000000-000000"};
    const auto r = run_attack(recovery_protector(),
                              CandidateSource::in_memory(list, ProtectionMethod::RecoveryPassword), quick());
    REQUIRE(r.outcome == AttackResult::Outcome::Found);
    CHECK(r.found->candidate == planted().recovery);
    CHECK(r.invalid_skipped == 2);
}

TEST_CASE("source and protector kinds must match") {
    CHECK_THROWS_AS(run_attack(recovery_protector(), CandidateSource::in_memory(words(3)), quick()), Error);
}

TEST_CASE("empty and all-invalid sources are errors") {
    try {
        run_attack(user_protector(), CandidateSource::in_memory({}), quick());
        FAIL("accepted an empty source");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptySource);
    }
    try {
        run_attack(user_protector(), CandidateSource::in_memory({"", "\xff\xfe"}), quick());
        FAIL("accepted a source without valid candidates");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptySource);
    }
}

TEST_CASE("wordlist files strip one trailing CR and keep everything else") {
    const std::string content = "alpha\r\n beta\n" + planted().password + "\r\ngamma\r\r\nlast";
    const auto path = temp_file("crlf.txt", content);
    auto src = CandidateSource::wordlist_file(path);
    CHECK(src.size() == 5);
    std::vector<Candidate> got;
    while (src.next_batch(2, got)) {
    }
    REQUIRE(got.size() == 5);
    CHECK(got[0].text == "alpha");
    CHECK(got[1].text == " beta");
    CHECK(got[2].text == planted().password);
    CHECK(got[3].text == "gamma\r");
    CHECK(got[4].text == "last");
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].index == i);

    const auto r = run_attack(user_protector(), CandidateSource::wordlist_file(path), quick());
    REQUIRE(r.outcome == AttackResult::Outcome::Found);
    CHECK(r.found->source_index == 2);
    std::filesystem::remove(path);
}

TEST_CASE("unreadable sources are I/O errors") {
    try {
        CandidateSource::wordlist_file("/nonexistent/words.txt");
        FAIL("opened a missing file");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::Io);
    }
    CHECK_THROWS_AS(CandidateSource::recovery_list(std::filesystem::temp_directory_path()), Error);
}

TEST_CASE("long passwords are tried and counted") {
    const std::vector<std::string> list = {std::string(65, 'x'), "short"};
    const auto r = run_attack(user_protector(), CandidateSource::in_memory(list), quick());
    CHECK(r.tested == 2);
    CHECK(r.length_warnings == 1);
}

TEST_CASE("cancellation stops a long attack promptly") {
    AttackConfig cfg;
    cfg.threads = 2;
    cfg.iterations = kdf::kDefaultIterations;
    cfg.w_table_policy = WTablePolicy::OnTheFly;
    auto handle = start_attack(user_protector(), CandidateSource::synthetic(), cfg);
    CHECK(handle->snapshot().tested == 0);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    const auto t0 = std::chrono::steady_clock::now();
    handle->cancel();
    const auto r = handle->wait();
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 2.0);
    CHECK(r.outcome == AttackResult::Outcome::Cancelled);
}

TEST_CASE("progress snapshots are monotone and end at the result") {
    auto cfg = quick(2);
    cfg.iterations = 4096;
    cfg.progress_interval = 0.05;
    std::vector<std::uint64_t> reported;
    std::mutex m;
    cfg.on_progress = [&](const ProgressSnapshot& s) {
        std::lock_guard lock(m);
        reported.push_back(s.tested);
    };
    auto handle = start_attack(user_protector(), CandidateSource::in_memory(words(400)), cfg);
    std::uint64_t last = 0;
    while (!handle->snapshot().finished) {
        const auto s = handle->snapshot();
        CHECK(s.tested >= last);
        last = s.tested;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    const auto r = handle->wait();
    const auto final_snapshot = progress_snapshot(*handle);
    CHECK(final_snapshot.finished);
    CHECK(final_snapshot.tested == r.tested);
    CHECK(r.tested == 400);
    REQUIRE_FALSE(reported.empty());
    CHECK(std::is_sorted(reported.begin(), reported.end()));
    CHECK(reported.back() == r.tested);
    CHECK(r.throughput == doctest::Approx(static_cast<double>(r.tested) / r.elapsed_seconds));
}

TEST_CASE("config validation") {
    auto cfg = quick();
    cfg.threads = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = quick();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(run_attack(user_protector(), CandidateSource::in_memory(words(1)), cfg), Error);
    CHECK_THROWS_AS(benchmark(quick(), 0.5), Error);
}

TEST_CASE("smoke benchmark at 1024 iterations") {
    auto cfg = quick(1);
    cfg.iterations = 1024;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = benchmark(cfg, 1.0);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
    CHECK(r.candidates > 0);
    CHECK(r.hashes_per_candidate == 2050);
    CHECK(r.hashes_per_second == doctest::Approx(r.candidates_per_second * 2050));
}

TEST_CASE("benchmark reports the full-strength hash count") {
    auto cfg = quick(1);
    cfg.iterations = kdf::kDefaultIterations;
    const auto r = benchmark(cfg, 1.0);
    CHECK(r.hashes_per_candidate == 2097154);
    CHECK(r.candidates >= 1);
}

}
