#pragma once

#include <atomic>
#include <iosfwd>

namespace mstream {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,    // bad flags or configuration
    kExitData = 3,     // unreadable or malformed input data
    kExitBackend = 4,  // backend failure
};

// Entry point of the mstream command. `stop` lets serve be stopped without a
// signal (tests); the binary wires SIGINT/SIGTERM to it.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            std::atomic<bool>* stop = nullptr);

}  // namespace mstream
