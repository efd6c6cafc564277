#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rrg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Parses and runs one subcommand. Returns 0 on success, 1 when the work
/// itself fails and 2 on a usage error (bad flags, unknown or missing
/// subcommand, missing seed or input path).
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rrg::cli
