#pragma once

namespace rfs {

// Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
// stderr; machine outputs only to files.
int run_cli(int argc, char** argv);

}  // namespace rfs
