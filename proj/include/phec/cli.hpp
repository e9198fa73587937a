#pragma once

#include <iosfwd>

namespace phec {

/// Entry point of the phec tool. Returns the process exit code: 0 success, 1 usage or config
/// error, 2 data error, 3 numeric failure.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace phec
