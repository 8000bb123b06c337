#pragma once

#include <atomic>
#include <ostream>
#include <string>
#include <vector>

namespace vmkcrack::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitNotFound = 1,
    kExitUsage = 2,
    kExitInput = 3,
    kExitRuntime = 4,
};

struct CliIo {
    std::ostream& out;
    std::ostream& err;
    // Polled during attacks; set from a SIGINT handler by the executable.
    const std::atomic<bool>* interrupted = nullptr;
};

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, CliIo io);

}  // namespace vmkcrack::cli
