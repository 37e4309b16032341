#pragma once

/// Command-line entry point, callable from the binary and from tests.

namespace oedsteer {

int run_cli(int argc, const char* const* argv);

}  // namespace oedsteer
