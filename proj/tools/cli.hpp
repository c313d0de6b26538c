#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mflc {

/// Runs one mflc invocation. Exit codes: 0 success, 1 usage error, 2 schema
/// or data error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mflc
