#include "vmkcrack/engine.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <limits>
#include <thread>

namespace vmkcrack::engine {

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::size_t utf8_chars(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char ch) { return (static_cast<unsigned char>(ch) & 0xc0) != 0x80; }));
}

kdf::Hash32 initial_hash(ProtectionMethod method, std::string_view text) {
    if (method == ProtectionMethod::UserPassword) return kdf::password_to_initial_hash(text);
    return kdf::recovery_to_initial_hash(kdf::validate_recovery_password(text));
}

std::optional<kdf::WScheduleTable> build_table(WTablePolicy policy, const kdf::Salt& salt, std::uint64_t iterations) {
    // Counts beyond one table's reach run on the fly.
    if (policy == WTablePolicy::OnTheFly || iterations > kdf::kDefaultIterations) return std::nullopt;
    return kdf::WScheduleTable::build(salt, iterations);
}

}  // namespace

const char* policy_name(WTablePolicy p) noexcept { return p == WTablePolicy::Precompute ? "mem" : "fly"; }

const char* outcome_name(AttackResult::Outcome o) noexcept {
    switch (o) {
        case AttackResult::Outcome::Found: return "found";
        case AttackResult::Outcome::Exhausted: return "exhausted";
        case AttackResult::Outcome::Cancelled: return "cancelled";
    }
    return "unknown";
}

unsigned default_threads() noexcept {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

void AttackConfig::validate() const {
    if (threads == 0) throw Error(Errc::InvalidConfig, "threads must be >= 1");
    if (batch_size == 0) throw Error(Errc::InvalidConfig, "batch_size must be >= 1");
    if (iterations == 0) throw Error(Errc::InvalidConfig, "iterations must be >= 1");
    if (!(progress_interval > 0)) throw Error(Errc::InvalidConfig, "progress_interval must be positive");
}

// ---------------------------------------------------------------------------
// Candidate sources

struct CandidateSource::State {
    std::mutex mutex;
    std::uint64_t next_index = 0;
    bool exhausted = false;

    std::filesystem::path path;
    std::ifstream file;

    std::vector<std::string> items;

    bool synthetic = false;
    std::optional<std::uint64_t> synthetic_count;
};

CandidateSource::CandidateSource(Kind kind, ProtectionMethod method, std::shared_ptr<State> state,
                                 std::optional<std::uint64_t> size)
    : kind_(kind), method_(method), state_(std::move(state)), size_(size) {}

namespace {

std::uint64_t count_lines(std::ifstream& in, const std::filesystem::path& path) {
    std::uint64_t lines = 0;
    char buffer[1 << 16];
    char last = '\n';
    while (in) {
        in.read(buffer, sizeof(buffer));
        const std::streamsize got = in.gcount();
        if (got <= 0) break;
        lines += static_cast<std::uint64_t>(std::count(buffer, buffer + got, '\n'));
        last = buffer[got - 1];
    }
    if (in.bad()) throw Error(Errc::Io, "read error in " + path.string());
    if (last != '\n') ++lines;
    in.clear();
    in.seekg(0);
    return lines;
}

}  // namespace

std::shared_ptr<CandidateSource::State> CandidateSource::open_list(const std::filesystem::path& path,
                                                                   std::uint64_t& lines) {
    std::error_code ec;
    if (std::filesystem::is_directory(path, ec)) throw Error(Errc::Io, path.string() + " is a directory");
    auto state = std::make_shared<State>();
    state->path = path;
    state->file.open(path, std::ios::binary);
    if (!state->file) throw Error(Errc::Io, "cannot open candidate list " + path.string());
    lines = count_lines(state->file, path);
    return state;
}

CandidateSource CandidateSource::wordlist_file(const std::filesystem::path& path) {
    std::uint64_t lines = 0;
    auto state = open_list(path, lines);
    return CandidateSource(Kind::WordlistFile, ProtectionMethod::UserPassword, std::move(state), lines);
}

CandidateSource CandidateSource::recovery_list(const std::filesystem::path& path) {
    std::uint64_t lines = 0;
    auto state = open_list(path, lines);
    return CandidateSource(Kind::RecoveryList, ProtectionMethod::RecoveryPassword, std::move(state), lines);
}

CandidateSource CandidateSource::in_memory(std::vector<std::string> candidates, ProtectionMethod method) {
    auto state = std::make_shared<State>();
    const std::uint64_t n = candidates.size();
    state->items = std::move(candidates);
    return CandidateSource(Kind::InMemory, method, std::move(state), n);
}

CandidateSource CandidateSource::synthetic(std::optional<std::uint64_t> count) {
    auto state = std::make_shared<State>();
    state->synthetic = true;
    state->synthetic_count = count;
    return CandidateSource(Kind::Synthetic, ProtectionMethod::UserPassword, std::move(state), count);
}

bool CandidateSource::next_batch(std::size_t max, std::vector<Candidate>& out) {
    State& s = *state_;
    std::lock_guard lock(s.mutex);
    if (s.exhausted) return false;
    std::size_t added = 0;
    while (added < max) {
        Candidate c;
        c.index = s.next_index;
        if (s.synthetic) {
            if (s.synthetic_count && s.next_index >= *s.synthetic_count) break;
            c.text = "bench-" + std::to_string(s.next_index);
        } else if (s.file.is_open()) {
            if (!std::getline(s.file, c.text)) {
                if (s.file.bad()) throw Error(Errc::Io, "read error in " + s.path.string());
                break;
            }
            if (!c.text.empty() && c.text.back() == '\r') c.text.pop_back();
        } else {
            if (s.next_index >= s.items.size()) break;
            c.text = s.items[s.next_index];
        }
        ++s.next_index;
        out.push_back(std::move(c));
        ++added;
    }
    if (added < max) s.exhausted = true;
    return added > 0;
}

// ---------------------------------------------------------------------------
// Attack

struct AttackHandle::Impl {
    VmkProtector protector;
    CandidateSource source;
    AttackConfig cfg;
    std::optional<kdf::WScheduleTable> table;
    Clock::time_point started = Clock::now();

    std::atomic<bool> cancelled{false};
    std::atomic<bool> failed{false};
    std::atomic<std::uint64_t> best{std::numeric_limits<std::uint64_t>::max()};
    std::atomic<std::uint64_t> tested{0};
    std::atomic<std::uint64_t> invalid{0};
    std::atomic<std::uint64_t> length_warnings{0};

    std::mutex found_mutex;
    std::optional<Found> found;
    std::exception_ptr error;

    mutable std::mutex progress_mutex;
    std::deque<std::pair<Clock::time_point, std::uint64_t>> samples;
    std::optional<ProgressSnapshot> final_snapshot;

    std::mutex done_mutex;
    std::condition_variable done_cv;
    unsigned workers_running = 0;

    std::thread coordinator;
    std::optional<AttackResult> result;

    Impl(const VmkProtector& p, CandidateSource s, AttackConfig c)
        : protector(p), source(std::move(s)), cfg(std::move(c)) {}

    bool stop_before(std::uint64_t first_index) const {
        return cancelled.load(std::memory_order_relaxed) || failed.load(std::memory_order_relaxed) ||
               best.load(std::memory_order_relaxed) < first_index;
    }

    void record_hit(const Candidate& c, const kdf::IntermediateKey& key) {
        std::lock_guard lock(found_mutex);
        if (found && found->source_index <= c.index) return;
        Found f;
        f.candidate = c.text;
        f.source_index = c.index;
        f.vmk_plaintext = ccm::decrypt_vmk(ccm::AesKey256(key), protector.nonce, protector.encrypted_vmk);
        found = std::move(f);
        best.store(c.index);
    }

    void process(const std::vector<Candidate>& batch) {
        std::vector<kdf::Hash32> hashes;
        std::vector<const Candidate*> owners;
        hashes.reserve(batch.size());
        for (const auto& c : batch) {
            try {
                hashes.push_back(initial_hash(source.method(), c.text));
            } catch (const Error&) {
                invalid.fetch_add(1, std::memory_order_relaxed);
                continue;
            }
            if (source.method() == ProtectionMethod::UserPassword) {
                const std::size_t n = utf8_chars(c.text);
                if (n < kMinPasswordChars || n > kMaxPasswordChars) length_warnings.fetch_add(1);
            }
            owners.push_back(&c);
        }
        if (hashes.empty()) return;

        const std::uint64_t first = batch.front().index;
        std::vector<kdf::IntermediateKey> keys(hashes.size());
        const bool complete = kdf::derive_intermediate_keys(hashes, protector.salt, cfg.iterations,
                                                            table ? &*table : nullptr, keys, cfg.backend,
                                                            [this, first] { return stop_before(first); });
        if (!complete) return;
        tested.fetch_add(hashes.size(), std::memory_order_relaxed);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (ccm::verify_candidate(ccm::AesKey256(keys[i]), protector, cfg.mode, nullptr, cfg.header_policy)) {
                record_hit(*owners[i], keys[i]);
                break;
            }
        }
    }

    void worker() {
        try {
            std::vector<Candidate> batch;
            while (true) {
                batch.clear();
                if (!source.next_batch(cfg.batch_size, batch)) break;
                if (stop_before(batch.front().index)) break;
                process(batch);
            }
        } catch (...) {
            std::lock_guard lock(found_mutex);
            if (!error) error = std::current_exception();
            failed.store(true);
        }
        std::lock_guard lock(done_mutex);
        --workers_running;
        done_cv.notify_all();
    }

    ProgressSnapshot make_snapshot() const {
        std::lock_guard lock(progress_mutex);
        if (final_snapshot) return *final_snapshot;
        ProgressSnapshot s;
        s.tested = tested.load();
        s.invalid_skipped = invalid.load();
        s.elapsed_seconds = seconds_since(started);
        s.source_size = source.size();
        if (!samples.empty()) {
            const double span = std::chrono::duration<double>(Clock::now() - samples.front().first).count();
            if (span > 0) s.rate = static_cast<double>(s.tested - samples.front().second) / span;
        } else if (s.elapsed_seconds > 0) {
            s.rate = static_cast<double>(s.tested) / s.elapsed_seconds;
        }
        if (s.source_size && s.rate > 0) {
            const std::uint64_t seen = s.tested + s.invalid_skipped;
            const std::uint64_t left = *s.source_size > seen ? *s.source_size - seen : 0;
            s.eta_seconds = static_cast<double>(left) / s.rate;
        }
        return s;
    }

    void sample() {
        std::lock_guard lock(progress_mutex);
        const auto now = Clock::now();
        samples.emplace_back(now, tested.load());
        while (samples.size() > 2 && now - samples.front().first > std::chrono::seconds(5)) samples.pop_front();
    }

    void coordinate() {
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(done_mutex);
            workers_running = cfg.threads;
        }
        for (unsigned i = 0; i < cfg.threads; ++i) workers.emplace_back([this] { worker(); });

        const auto tick = std::chrono::duration<double>(std::min(cfg.progress_interval, 0.2));
        auto last_report = Clock::now();
        sample();
        {
            std::unique_lock lock(done_mutex);
            while (workers_running > 0) {
                done_cv.wait_for(lock, tick);
                lock.unlock();
                sample();
                if (cfg.on_progress && seconds_since(last_report) >= cfg.progress_interval) {
                    last_report = Clock::now();
                    cfg.on_progress(make_snapshot());
                }
                lock.lock();
            }
        }
        for (auto& t : workers) t.join();

        AttackResult r;
        r.tested = tested.load();
        r.invalid_skipped = invalid.load();
        r.length_warnings = length_warnings.load();
        r.elapsed_seconds = seconds_since(started);
        r.throughput = r.elapsed_seconds > 0 ? static_cast<double>(r.tested) / r.elapsed_seconds : 0;
        r.used_w_table = table.has_value();
        r.backend = kdf::resolve_backend(cfg.backend);
        r.found = found;
        if (cancelled.load()) {
            r.outcome = AttackResult::Outcome::Cancelled;
        } else if (found) {
            r.outcome = AttackResult::Outcome::Found;
        } else {
            r.outcome = AttackResult::Outcome::Exhausted;
        }

        ProgressSnapshot last = make_snapshot();
        last.tested = r.tested;
        last.elapsed_seconds = r.elapsed_seconds;
        last.eta_seconds = 0;
        last.finished = true;
        {
            std::lock_guard lock(progress_mutex);
            final_snapshot = last;
        }
        if (cfg.on_progress) cfg.on_progress(last);
        result = r;
    }
};

AttackHandle::AttackHandle(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

AttackHandle::~AttackHandle() {
    if (impl_ && impl_->coordinator.joinable()) {
        impl_->cancelled.store(true);
        impl_->coordinator.join();
    }
}

ProgressSnapshot AttackHandle::snapshot() const { return impl_->make_snapshot(); }

void AttackHandle::cancel() noexcept { impl_->cancelled.store(true); }

AttackResult AttackHandle::wait() {
    if (impl_->coordinator.joinable()) impl_->coordinator.join();
    if (impl_->error) {
        try {
            std::rethrow_exception(impl_->error);
        } catch (const Error& e) {
            throw AttackError(e.code(), e.what(), impl_->result->tested);
        }
    }
    const AttackResult& r = *impl_->result;
    if (r.outcome == AttackResult::Outcome::Exhausted && r.tested == 0) {
        throw AttackError(Errc::EmptySource,
                          "candidate source held no valid candidates (" + std::to_string(r.invalid_skipped) +
                              " invalid lines skipped)",
                          0);
    }
    return r;
}

std::unique_ptr<AttackHandle> start_attack(const VmkProtector& protector, CandidateSource source, AttackConfig cfg) {
    cfg.validate();
    if (source.method() != protector.method) {
        throw Error(Errc::InvalidConfig, std::string("candidate source holds ") +
                                             (source.method() == ProtectionMethod::UserPassword ? "passwords"
                                                                                                : "recovery passwords") +
                                             " but the protector is " + method_name(protector.method));
    }
    if (protector.encrypted_vmk.size() < kVmkPlaintextSize) {
        throw Error(Errc::InvalidConfig, "encrypted VMK shorter than 44 bytes");
    }
    auto impl = std::make_unique<AttackHandle::Impl>(protector, std::move(source), std::move(cfg));
    impl->table = build_table(impl->cfg.w_table_policy, protector.salt, impl->cfg.iterations);
    AttackHandle::Impl* raw = impl.get();
    raw->coordinator = std::thread([raw] { raw->coordinate(); });
    return std::unique_ptr<AttackHandle>(new AttackHandle(std::move(impl)));
}

AttackResult run_attack(const VmkProtector& protector, CandidateSource source, const AttackConfig& cfg) {
    return start_attack(protector, std::move(source), cfg)->wait();
}

// ---------------------------------------------------------------------------
// Benchmark

BenchmarkReport benchmark(const AttackConfig& cfg, double seconds) {
    cfg.validate();
    if (!(seconds >= 1)) throw Error(Errc::InvalidConfig, "benchmark duration must be >= 1 second");

    VmkProtector target;
    for (std::size_t i = 0; i < target.salt.size(); ++i) target.salt[i] = static_cast<std::uint8_t>(0x11 * i + 3);
    for (std::size_t i = 0; i < target.nonce.size(); ++i) target.nonce[i] = static_cast<std::uint8_t>(0x29 * i + 1);
    target.encrypted_vmk.assign(kVmkPlaintextSize, 0x5c);
    target.iterations = cfg.iterations;

    const auto table = build_table(cfg.w_table_policy, target.salt, cfg.iterations);
    const std::size_t group = kdf::backend_lanes(cfg.backend);
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> done{0};

    const auto started = Clock::now();
    const auto deadline = started + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
    auto work = [&] {
        std::vector<kdf::Hash32> hashes(group);
        std::vector<kdf::IntermediateKey> keys(group);
        while (Clock::now() < deadline) {
            const std::uint64_t base = next.fetch_add(group);
            for (std::size_t i = 0; i < group; ++i) {
                hashes[i] = kdf::password_to_initial_hash("bench-" + std::to_string(base + i));
            }
            kdf::derive_intermediate_keys(hashes, target.salt, cfg.iterations, table ? &*table : nullptr, keys,
                                          cfg.backend);
            for (const auto& key : keys) {
                ccm::verify_candidate(ccm::AesKey256(key), target, cfg.mode, nullptr, cfg.header_policy);
            }
            done.fetch_add(group);
        }
    };
    std::vector<std::thread> threads;
    for (unsigned i = 0; i < cfg.threads; ++i) threads.emplace_back(work);
    for (auto& t : threads) t.join();

    BenchmarkReport r;
    r.threads = cfg.threads;
    r.iterations = cfg.iterations;
    r.backend = kdf::resolve_backend(cfg.backend);
    r.w_table_policy = table ? WTablePolicy::Precompute : WTablePolicy::OnTheFly;
    r.candidates = done.load();
    r.elapsed_seconds = seconds_since(started);
    r.candidates_per_second = static_cast<double>(r.candidates) / r.elapsed_seconds;
    r.per_thread = r.candidates_per_second / cfg.threads;
    r.hashes_per_candidate = kdf::hashes_per_candidate(cfg.iterations);
    r.hashes_per_second = r.candidates_per_second * static_cast<double>(r.hashes_per_candidate);
    return r;
}

}  // namespace vmkcrack::engine
