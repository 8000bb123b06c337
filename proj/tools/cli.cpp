#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "vmkcrack/bde.hpp"
#include "vmkcrack/ccm.hpp"
#include "vmkcrack/engine.hpp"
#include "vmkcrack/error.hpp"
#include "vmkcrack/kdf.hpp"

namespace vmkcrack::cli {

using nlohmann::json;

namespace {

// Thrown by command bodies to leave with a specific exit code.
struct Exit {
    int code;
    std::string message;
    std::string errc = "usage";
};

[[noreturn]] void usage_error(const std::string& message) { throw Exit{kExitUsage, message}; }

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::Resource:
        case Errc::Range:
        case Errc::FixtureInvariant:
        case Errc::TableMismatch:
            return kExitRuntime;
        case Errc::InvalidConfig:
            return kExitUsage;
        default:
            return kExitInput;
    }
}

struct Context {
    CliIo io;
    bool json_mode = false;

    void emit(json j, int code) const {
        j["exit_code"] = code;
        io.out << j.dump() << '\n';
    }
};

std::string read_secret_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Exit{kExitInput, "cannot read " + path, "io"};
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

template <std::size_t N>
std::array<std::uint8_t, N> hex_flag(const std::string& text, const char* flag) {
    auto bytes = from_hex(text);
    if (!bytes || bytes->size() != N) {
        usage_error(std::string(flag) + " must be " + std::to_string(2 * N) + " hex digits");
    }
    std::array<std::uint8_t, N> out{};
    std::copy(bytes->begin(), bytes->end(), out.begin());
    return out;
}

unsigned resolve_threads(unsigned flag) {
    if (flag != 0) return flag;
    if (const char* env = std::getenv("BITCRACKER_THREADS"); env && *env) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (*end != '\0' || v == 0 || v > 4096) usage_error("BITCRACKER_THREADS must be a positive integer");
        return static_cast<unsigned>(v);
    }
    return engine::default_threads();
}

kdf::Backend parse_backend(const std::string& name) {
    if (name == "auto") return kdf::Backend::Auto;
    if (name == "portable") return kdf::Backend::Portable;
    if (name == "sha-ni") return kdf::Backend::ShaNi;
    if (name == "avx512") return kdf::Backend::Avx512;
    usage_error("unknown backend " + name);
}

const char* windows_version(std::uint16_t fve_version) {
    switch (fve_version) {
        case 1: return "Windows Vista";
        case 2: return "Windows 7 or later";
        default: return "unknown";
    }
}

// ---------------------------------------------------------------------------
// extract

struct ExtractArgs {
    std::string image;
    std::string output;
};

int cmd_extract(const Context& ctx, const ExtractArgs& a) {
    const bde::ImageScan scan = bde::scan_image(bde::VolumeImage::open(a.image));
    const auto& ex = scan.extraction;
    std::vector<std::string> lines;
    for (const auto& p : ex.protectors) lines.push_back(bde::serialize_hash_line(p));

    if (!a.output.empty()) {
        std::ofstream file(a.output, std::ios::binary | std::ios::trunc);
        for (const auto& l : lines) file << l << '\n';
        if (!file) throw Exit{kExitRuntime, "cannot write " + a.output, "io"};
    }
    const int code = lines.empty() ? kExitInput : kExitOk;

    if (ctx.json_mode) {
        json blocks = json::array();
        for (const auto& b : scan.blocks) {
            blocks.push_back({{"offset", b.offset},
                              {"version", b.version},
                              {"windows", windows_version(b.version)},
                              {"metadata_size", b.metadata_size},
                              {"entries", b.entries.size()}});
        }
        json protectors = json::array();
        for (std::size_t i = 0; i < ex.protectors.size(); ++i) {
            protectors.push_back({{"method", method_name(ex.protectors[i].method)},
                                  {"entry_offset", ex.entry_offsets[i]},
                                  {"hash", lines[i]}});
        }
        json j = {{"command", "extract"},   {"image", a.image},        {"blocks", blocks},
                  {"block_errors", scan.block_errors}, {"protectors", protectors}, {"skipped", ex.skipped}};
        j["output"] = a.output.empty() ? json(nullptr) : json(a.output);
        if (lines.empty()) j["error"] = {{"code", "no-protectors"}, {"message", "no attackable VMK protector found"}};
        ctx.emit(j, code);
        return code;
    }

    // Hash lines own stdout unless they go to a file.
    std::ostream& report = a.output.empty() ? ctx.io.err : ctx.io.out;
    report << "FVE metadata blocks: " << scan.blocks.size() << '\n';
    for (const auto& b : scan.blocks) {
        report << "  offset 0x" << std::hex << b.offset << std::dec << "  version " << b.version << " ("
               << windows_version(b.version) << ")  entries " << b.entries.size() << '\n';
    }
    for (const auto& e : scan.block_errors) report << "  unreadable block: " << e << '\n';
    for (std::size_t i = 0; i < ex.protectors.size(); ++i) {
        report << "protector " << i << ": " << method_name(ex.protectors[i].method) << " (entry at offset 0x"
               << std::hex << ex.entry_offsets[i] << std::dec << ")\n";
    }
    for (const auto& s : ex.skipped) report << s << '\n';
    if (a.output.empty()) {
        for (const auto& l : lines) ctx.io.out << l << '\n';
    } else {
        report << "wrote " << lines.size() << " hash line(s) to " << a.output << '\n';
    }
    if (lines.empty()) ctx.io.err << "error: no attackable VMK protector found\n";
    return code;
}

// ---------------------------------------------------------------------------
// attack

struct AttackArgs {
    std::string hash;
    std::string wordlist;
    std::string recovery_list;
    std::string mode = "fast";
    unsigned threads = 0;
    std::string w_table = "mem";
    std::optional<std::uint64_t> iterations;
    bool allow_nonstandard = false;
    std::size_t batch_size = 64;
    double progress = 10;
    std::string backend = "auto";
};

VmkProtector load_protector(const std::string& path, ProtectionMethod wanted) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Exit{kExitInput, "cannot read hash file " + path, "io"};
    std::string line;
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        ++seen;
        VmkProtector p = bde::parse_hash_line(line);
        if (p.method == wanted) return p;
    }
    if (seen == 0) throw Exit{kExitInput, "hash file " + path + " holds no hash lines", "parse"};
    throw Exit{kExitInput, std::string("hash file has no ") + method_name(wanted) + " protector for this candidate source",
               "parse"};
}

int cmd_attack(const Context& ctx, const AttackArgs& a) {
    if (a.wordlist.empty() == a.recovery_list.empty()) {
        usage_error("exactly one of --wordlist or --recovery-list is required");
    }
    const ProtectionMethod method =
        a.wordlist.empty() ? ProtectionMethod::RecoveryPassword : ProtectionMethod::UserPassword;
    VmkProtector protector = load_protector(a.hash, method);

    const std::uint64_t iterations = a.iterations.value_or(protector.iterations);
    if (iterations != kdf::kDefaultIterations && !a.allow_nonstandard) {
        usage_error("iteration count " + std::to_string(iterations) +
                    " differs from 1048576; pass --allow-nonstandard-iterations to proceed");
    }
    if (iterations == 0) usage_error("--iterations must be positive");

    engine::AttackConfig cfg;
    cfg.threads = resolve_threads(a.threads);
    cfg.mode = a.mode == "mac" ? ccm::VerifyMode::FullMac : ccm::VerifyMode::Fast;
    cfg.iterations = iterations;
    cfg.w_table_policy = a.w_table == "fly" ? engine::WTablePolicy::OnTheFly : engine::WTablePolicy::Precompute;
    cfg.batch_size = a.batch_size;
    cfg.backend = parse_backend(a.backend);
    if (a.progress > 0) {
        cfg.progress_interval = a.progress;
        std::ostream& err = ctx.io.err;
        cfg.on_progress = [&err](const engine::ProgressSnapshot& s) {
            if (s.finished) return;
            err << "progress: " << s.tested << " tested, " << std::fixed << std::setprecision(2) << s.rate
                << " c/s";
            if (s.eta_seconds) err << ", eta " << std::setprecision(0) << *s.eta_seconds << " s";
            err << std::defaultfloat << '\n';
        };
    }

    engine::CandidateSource source = a.wordlist.empty() ? engine::CandidateSource::recovery_list(a.recovery_list)
                                                        : engine::CandidateSource::wordlist_file(a.wordlist);
    auto handle = engine::start_attack(protector, std::move(source), cfg);
    while (!handle->snapshot().finished) {
        if (ctx.io.interrupted && ctx.io.interrupted->load()) handle->cancel();
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    const engine::AttackResult r = handle->wait();

    int code = kExitNotFound;
    if (r.outcome == engine::AttackResult::Outcome::Found) code = kExitOk;
    if (r.outcome == engine::AttackResult::Outcome::Cancelled) code = kExitRuntime;

    if (ctx.json_mode) {
        json j = {{"command", "attack"},
                  {"outcome", engine::outcome_name(r.outcome)},
                  {"method", method_name(protector.method)},
                  {"mode", ccm::mode_name(cfg.mode)},
                  {"threads", cfg.threads},
                  {"iterations", cfg.iterations},
                  {"w_table", engine::policy_name(r.used_w_table ? engine::WTablePolicy::Precompute
                                                                 : engine::WTablePolicy::OnTheFly)},
                  {"backend", kdf::backend_name(r.backend)},
                  {"tested", r.tested},
                  {"invalid_skipped", r.invalid_skipped},
                  {"length_warnings", r.length_warnings},
                  {"elapsed_seconds", r.elapsed_seconds},
                  {"throughput", r.throughput}};
        if (r.found && code == kExitOk) {
            j["candidate"] = r.found->candidate;
            j["source_index"] = r.found->source_index;
            j["vmk_key_hex"] = to_hex(r.found->vmk_key());
            j["vmk_plaintext_hex"] = to_hex(r.found->vmk_plaintext);
        }
        ctx.emit(j, code);
        return code;
    }

    std::ostream& out = ctx.io.out;
    if (code == kExitOk) {
        out << "found: " << r.found->candidate << '\n';
        out << "vmk key: " << to_hex(r.found->vmk_key()) << '\n';
    } else if (code == kExitNotFound) {
        out << "exhausted: no candidate matched\n";
    } else {
        out << "interrupted: attack cancelled\n";
    }
    out << "tested: " << r.tested << " (invalid skipped: " << r.invalid_skipped << ")\n";
    out << "throughput: " << std::fixed << std::setprecision(2) << r.throughput << " candidates/s over "
        << r.elapsed_seconds << " s" << std::defaultfloat << '\n';
    if (r.length_warnings > 0) {
        ctx.io.err << "warning: " << r.length_warnings << " candidate(s) outside 1-64 characters were tried\n";
    }
    return code;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    unsigned threads = 0;
    double seconds = 5;
    std::uint64_t iterations = kdf::kDefaultIterations;
    std::string w_table = "mem";
    std::string mode = "fast";
    std::string backend = "auto";
};

int cmd_bench(const Context& ctx, const BenchArgs& a) {
    engine::AttackConfig cfg;
    cfg.threads = resolve_threads(a.threads);
    cfg.iterations = a.iterations;
    cfg.mode = a.mode == "mac" ? ccm::VerifyMode::FullMac : ccm::VerifyMode::Fast;
    cfg.w_table_policy = a.w_table == "fly" ? engine::WTablePolicy::OnTheFly : engine::WTablePolicy::Precompute;
    cfg.backend = parse_backend(a.backend);
    const engine::BenchmarkReport r = engine::benchmark(cfg, a.seconds);

    if (ctx.json_mode) {
        ctx.emit({{"command", "bench"},
                  {"threads", r.threads},
                  {"iterations", r.iterations},
                  {"backend", kdf::backend_name(r.backend)},
                  {"w_table", engine::policy_name(r.w_table_policy)},
                  {"candidates", r.candidates},
                  {"elapsed_seconds", r.elapsed_seconds},
                  {"candidates_per_second", r.candidates_per_second},
                  {"per_thread", r.per_thread},
                  {"hashes_per_candidate", r.hashes_per_candidate},
                  {"hashes_per_second", r.hashes_per_second}},
                 kExitOk);
        return kExitOk;
    }
    std::ostream& out = ctx.io.out;
    out << "threads: " << r.threads << "  backend: " << kdf::backend_name(r.backend)
        << "  w-table: " << engine::policy_name(r.w_table_policy) << "  iterations: " << r.iterations << '\n';
    out << "candidates: " << r.candidates << " in " << std::fixed << std::setprecision(2) << r.elapsed_seconds
        << " s\n";
    out << "candidates/s: " << r.candidates_per_second << " (" << r.per_thread << " per thread)\n";
    out << std::defaultfloat << "hashes/candidate: " << r.hashes_per_candidate << '\n';
    out << "hashes/s: " << std::fixed << std::setprecision(0) << r.hashes_per_second << std::defaultfloat << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gen-fixture

struct FixtureArgs {
    std::string password;
    std::string recovery;
    std::string password_file;
    std::string recovery_file;
    std::string out;
    std::string hash_out;
    std::string salt_hex;
    std::string nonce_hex;
    std::string vmk_hex;
    std::uint64_t seed = 1;
    bool no_recovery = false;
    bool tpm = false;
    std::uint64_t iterations = kdf::kDefaultIterations;
};

std::string random_recovery_password(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint32_t> word(0, 0xffff);
    kdf::RecoveryPassword rp;
    for (auto& g : rp.groups) g = word(rng) * kdf::kRecoveryGroupDivisor;
    return rp.to_string();
}

template <std::size_t N>
std::array<std::uint8_t, N> random_bytes(std::mt19937_64& rng) {
    std::array<std::uint8_t, N> out{};
    for (auto& b : out) b = static_cast<std::uint8_t>(rng() >> 56);
    return out;
}

int cmd_gen_fixture(const Context& ctx, const FixtureArgs& a) {
    const int given = !a.password.empty() + !a.recovery.empty() + !a.password_file.empty() + !a.recovery_file.empty();
    if (given != 1) usage_error("exactly one of --password, --recovery, --password-file, --recovery-file is required");
    if (a.iterations == 0) usage_error("--iterations must be positive");

    std::string secret = a.password;
    ProtectionMethod method = ProtectionMethod::UserPassword;
    if (!a.password_file.empty()) secret = read_secret_file(a.password_file);
    if (!a.recovery.empty() || !a.recovery_file.empty()) {
        method = ProtectionMethod::RecoveryPassword;
        secret = a.recovery.empty() ? read_secret_file(a.recovery_file) : a.recovery;
        try {
            secret = kdf::validate_recovery_password(secret).to_string();
        } catch (const RecoveryError& e) {
            usage_error(std::string("invalid recovery password: ") + e.what());
        }
    }
    if (method == ProtectionMethod::UserPassword) {
        try {
            kdf::password_to_initial_hash(secret);
        } catch (const Error& e) {
            usage_error(std::string("invalid password: ") + e.what());
        }
    }

    std::mt19937_64 rng(a.seed);
    std::array<std::uint8_t, kVmkPlaintextSize> vmk{0x2c, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x03, 0x20, 0x00, 0x00};
    const auto key_bytes = random_bytes<32>(rng);
    std::copy(key_bytes.begin(), key_bytes.end(), vmk.begin() + kVmkHeaderSize);
    if (!a.vmk_hex.empty()) {
        vmk = hex_flag<kVmkPlaintextSize>(a.vmk_hex, "--vmk-hex");
        if (!ccm::check_vmk_header(vmk)) usage_error("--vmk-hex does not start with a valid VMK header");
    }

    std::vector<bde::FixtureProtector> protectors(1);
    protectors[0].method = method;
    protectors[0].secret = secret;
    protectors[0].salt = random_bytes<16>(rng);
    protectors[0].nonce = random_bytes<12>(rng);
    if (!a.salt_hex.empty()) protectors[0].salt = hex_flag<16>(a.salt_hex, "--salt-hex");
    if (!a.nonce_hex.empty()) protectors[0].nonce = hex_flag<12>(a.nonce_hex, "--nonce-hex");

    std::string generated_recovery;
    if (method == ProtectionMethod::UserPassword && !a.no_recovery) {
        bde::FixtureProtector rp;
        rp.method = ProtectionMethod::RecoveryPassword;
        generated_recovery = random_recovery_password(rng);
        rp.secret = generated_recovery;
        rp.salt = random_bytes<16>(rng);
        rp.nonce = random_bytes<12>(rng);
        protectors.push_back(rp);
    }

    bde::FixtureLayout layout;
    layout.iterations = a.iterations;
    layout.include_tpm_protector = a.tpm;
    const bde::FixtureImage fixture = bde::build_fixture_image(protectors, vmk, layout);

    {
        std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
        file.write(reinterpret_cast<const char*>(fixture.image.data()), static_cast<std::streamsize>(fixture.image.size()));
        if (!file) throw Exit{kExitRuntime, "cannot write " + a.out, "io"};
    }
    std::vector<std::string> lines;
    for (const auto& p : fixture.protectors) lines.push_back(bde::serialize_hash_line(p));
    if (!a.hash_out.empty()) {
        std::ofstream file(a.hash_out, std::ios::binary | std::ios::trunc);
        for (const auto& l : lines) file << l << '\n';
        if (!file) throw Exit{kExitRuntime, "cannot write " + a.hash_out, "io"};
    }

    if (ctx.json_mode) {
        json j = {{"command", "gen-fixture"},  {"image", a.out},          {"image_size", fixture.image.size()},
                  {"iterations", a.iterations}, {"hash_lines", lines},     {"vmk_plaintext_hex", to_hex(vmk)},
                  {"seed", a.seed}};
        j["recovery_password"] = generated_recovery.empty() ? json(nullptr) : json(generated_recovery);
        ctx.emit(j, kExitOk);
        return kExitOk;
    }
    std::ostream& out = ctx.io.out;
    for (const auto& l : lines) out << l << '\n';
    out << "vmk plaintext: " << to_hex(vmk) << '\n';
    if (!generated_recovery.empty()) out << "recovery password: " << generated_recovery << '\n';
    out << "wrote " << fixture.image.size() << " bytes to " << a.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// validate-recovery

const char* verdict_text(kdf::GroupVerdict v) {
    switch (v) {
        case kdf::GroupVerdict::Valid: return "ok";
        case kdf::GroupVerdict::NonDigit: return "contains a non-digit character";
        case kdf::GroupVerdict::WrongLength: return "must be exactly 6 digits";
        case kdf::GroupVerdict::OutOfRange: return "must be < 720896";
        case kdf::GroupVerdict::NotDivisible: return "not divisible by 11";
    }
    return "unknown";
}

int cmd_validate_recovery(const Context& ctx, const std::string& text) {
    const kdf::RecoveryCheck check = kdf::check_recovery_password(text);
    const int code = check.valid() ? kExitOk : kExitInput;
    const std::string count_rule = "recovery password must have 8 groups, found " + std::to_string(check.group_count);

    if (ctx.json_mode) {
        json groups = json::array();
        for (std::size_t i = 0; i < check.groups.size(); ++i) {
            groups.push_back({{"index", i},
                              {"text", check.groups[i]},
                              {"valid", check.verdicts[i] == kdf::GroupVerdict::Valid},
                              {"reason", verdict_text(check.verdicts[i])}});
        }
        json j = {{"command", "validate-recovery"},
                  {"valid", check.valid()},
                  {"group_count", check.group_count},
                  {"group_count_ok", check.group_count_ok},
                  {"groups", groups}};
        if (!check.group_count_ok) j["error"] = {{"code", "group-count"}, {"message", count_rule}};
        ctx.emit(j, code);
        return code;
    }
    std::ostream& out = ctx.io.out;
    if (!check.group_count_ok) out << "invalid: " << count_rule << '\n';
    for (std::size_t i = 0; i < check.groups.size(); ++i) {
        out << "group " << i << " \"" << check.groups[i] << "\": " << verdict_text(check.verdicts[i]) << '\n';
    }
    out << (check.valid() ? "valid recovery password\n" : "invalid recovery password\n");
    return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, CliIo io) {
    CLI::App app("BitLocker VMK dictionary attack toolkit", "vmkcrack");
    app.require_subcommand(1);
    bool json_mode = false;
    app.add_flag("--json", json_mode, "Emit one JSON object per command");

    const std::vector<std::string> modes = {"fast", "mac"};
    const std::vector<std::string> policies = {"mem", "fly"};
    const std::vector<std::string> backends = {"auto", "portable", "sha-ni", "avx512"};

    ExtractArgs ea;
    auto* extract = app.add_subcommand("extract", "Extract hash lines from a BitLocker volume image");
    extract->add_option("--image", ea.image, "Volume or partition image")->required();
    extract->add_option("--output,-o", ea.output, "Write hash lines here instead of standard output");

    AttackArgs aa;
    auto* attack = app.add_subcommand("attack", "Dictionary attack against a hash line");
    attack->add_option("--hash", aa.hash, "File holding hash lines")->required();
    auto* wl = attack->add_option("--wordlist", aa.wordlist, "Newline-delimited passwords");
    auto* rl = attack->add_option("--recovery-list", aa.recovery_list, "Newline-delimited recovery passwords");
    wl->excludes(rl);
    attack->add_option("--mode", aa.mode, "fast: header check only; mac: also verify the CCM MAC")
        ->check(CLI::IsMember(modes));
    attack->add_option("--threads", aa.threads, "Worker threads (default: BITCRACKER_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    attack->add_option("--w-table", aa.w_table, "mem: precompute the 256 MiB schedule table; fly: compute per use")
        ->check(CLI::IsMember(policies));
    attack->add_option("--iterations", aa.iterations, "Stretching iterations (default: from the hash line)");
    attack->add_flag("--allow-nonstandard-iterations", aa.allow_nonstandard, "Permit iteration counts other than 1048576");
    attack->add_option("--batch-size", aa.batch_size, "Candidates per work unit")->check(CLI::PositiveNumber);
    attack->add_option("--progress", aa.progress, "Seconds between progress lines on stderr, 0 disables");
    attack->add_option("--backend", aa.backend, "SHA-256 kernel")->check(CLI::IsMember(backends));

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Measure candidate throughput");
    bench->add_option("--threads", ba.threads, "Worker threads")->check(CLI::PositiveNumber);
    bench->add_option("--seconds", ba.seconds, "Minimum duration")->check(CLI::Range(1.0, 86400.0));
    bench->add_option("--iterations", ba.iterations, "Stretching iterations")->check(CLI::PositiveNumber);
    bench->add_option("--w-table", ba.w_table, "mem or fly")->check(CLI::IsMember(policies));
    bench->add_option("--mode", ba.mode, "fast or mac")->check(CLI::IsMember(modes));
    bench->add_option("--backend", ba.backend, "SHA-256 kernel")->check(CLI::IsMember(backends));

    FixtureArgs fa;
    auto* gen = app.add_subcommand("gen-fixture", "Write a synthetic BitLocker image with a known secret");
    auto* pw = gen->add_option("--password", fa.password, "User password to plant");
    auto* rc = gen->add_option("--recovery", fa.recovery, "Recovery password to plant");
    auto* pwf = gen->add_option("--password-file", fa.password_file, "Read the password from the first line of a file");
    auto* rcf = gen->add_option("--recovery-file", fa.recovery_file, "Read the recovery password from a file");
    pw->excludes(rc)->excludes(pwf)->excludes(rcf);
    rc->excludes(pwf)->excludes(rcf);
    pwf->excludes(rcf);
    gen->add_option("--out", fa.out, "Image path")->required();
    gen->add_option("--hash-out", fa.hash_out, "Also write the hash lines to this file");
    gen->add_option("--salt-hex", fa.salt_hex, "16-byte salt for the planted protector");
    gen->add_option("--nonce-hex", fa.nonce_hex, "12-byte nonce for the planted protector");
    gen->add_option("--vmk-hex", fa.vmk_hex, "44-byte VMK plaintext");
    gen->add_option("--seed", fa.seed, "Seed for every value not given explicitly");
    gen->add_flag("--no-recovery", fa.no_recovery, "Omit the generated recovery-password protector");
    gen->add_flag("--tpm", fa.tpm, "Add a TPM protector the extractor has to skip");
    gen->add_option("--iterations", fa.iterations, "Stretching iterations")->check(CLI::PositiveNumber);

    std::string recovery_text;
    auto* validate = app.add_subcommand("validate-recovery", "Check a recovery password against the group rules");
    validate->add_option("password", recovery_text, "Recovery password")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, io.out, io.err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    Context ctx{io, json_mode};
    const std::string command = app.get_subcommands().front()->get_name();
    auto fail = [&](int code, const std::string& errc, const std::string& message) {
        if (json_mode) {
            ctx.emit({{"command", command}, {"error", {{"code", errc}, {"message", message}}}}, code);
        } else {
            io.err << "error: " << message << '\n';
        }
        return code;
    };
    try {
        if (*extract) return cmd_extract(ctx, ea);
        if (*attack) return cmd_attack(ctx, aa);
        if (*bench) return cmd_bench(ctx, ba);
        if (*gen) return cmd_gen_fixture(ctx, fa);
        return cmd_validate_recovery(ctx, recovery_text);
    } catch (const Exit& e) {
        return fail(e.code, e.errc, e.message);
    } catch (const Error& e) {
        return fail(exit_code_for(e.code()), errc_name(e.code()), e.what());
    } catch (const std::exception& e) {
        return fail(kExitRuntime, "internal", e.what());
    }
}

}  // namespace vmkcrack::cli
