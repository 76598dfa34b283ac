#pragma once

namespace rankiq::cli {

// Subcommand front-end. Exit codes: 0 success, 1 usage error, 2 data or
// validation error.
int run(int argc, char** argv);

}  // namespace rankiq::cli
