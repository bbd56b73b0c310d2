#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gfm/optimizers.hpp"

namespace gfm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitModel = 1;  // numeric or model failure
inline constexpr int kExitIo = 2;     // I/O, format or usage failure

/// Runs gfm_lab with `args` (program name excluded) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "0..4" (inclusive range), "0,2,5" or a single integer.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);
/// Names, or "all" for the five trajectory optimizers.
std::vector<optim::OptimizerKind> parse_optimizer_list(const std::vector<std::string>& names);

}  // namespace gfm::cli
