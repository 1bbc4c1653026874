#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "rigid_recover/errors.hpp"

namespace rigid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSolver = 1;  // the data admit no (unique) recovery
inline constexpr int kExitInput = 2;   // malformed input or usage

// Exit status an escaped Error maps to.
int exit_code_for(ErrorCode code);

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rigid
