#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace weakprog::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure,
/// 1 anything unexpected.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace weakprog::cli
