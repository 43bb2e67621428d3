#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace loopsrg::cli {

// Exit codes.
constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kIo = 2;

// Runs one invocation; `args` excludes the program name. Errors are written
// to `err` as one line "loopsrg: <kind>: <reason>" where kind is one of
// usage-error, validation-error, io-error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace loopsrg::cli
