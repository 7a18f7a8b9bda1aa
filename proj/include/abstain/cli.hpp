#pragma once

#include <string>
#include <vector>

namespace abstain::cli {

// Exit codes: 0 success, 1 usage or data error, 2 backend transport error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

inline constexpr const char* backend_env_var = "ABSTAIN_DECODE_BACKEND";

}  // namespace abstain::cli
