#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eqstop::cli {

/// Parses argv-style arguments (without the program name), runs the requested
/// command, writes data to `out` and diagnostics to `err`. Returns 0 on
/// success, 1 on domain errors, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

/// Comma-separated decimals or exact rationals like "1/3"; used for strategy
/// and vector literals on the command line.
std::vector<double> parse_vector_literal(const std::string& text);

} // namespace eqstop::cli
