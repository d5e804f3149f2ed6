#pragma once

namespace repulse {

/// Full CLI entry point, linked into the repulse binary and callable from
/// tests. Exit codes: 0 success, 2 usage, 3 config, 4 runtime numeric
/// failure.
int cli_main(int argc, const char* const* argv);

}  // namespace repulse
