#pragma once

namespace auheat {

// Entry point behind the `auheat` binary. Returns the process exit code:
// 0 success, 1 validation/usage error, 2 runtime failure.
int cli_main(int argc, const char* const* argv);

}  // namespace auheat
