#pragma once

#include <string>
#include <vector>

namespace textnorm {

// Full command-line entry point, callable in process for tests. Returns
// the would-be exit status: 0 success, 1 usage or configuration error,
// 2 data error, 3 numeric failure.
int cli_main(const std::vector<std::string>& args);

}  // namespace textnorm
