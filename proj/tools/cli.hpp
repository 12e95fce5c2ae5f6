#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace verse::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNegative = 1;  // no valid poem, or the verse fails validation
inline constexpr int kFailure = 2;   // usage or runtime error

// args[0] is the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace verse::cli
