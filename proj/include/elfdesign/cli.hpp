#pragma once

#include <iosfwd>

namespace elfdesign {

/// Entry point of the `elfdesign` command. Subcommands: solve, verify,
/// elfving, info, gradcheck, simulate. Results go to `out`, diagnostics to
/// `err`.
///
/// Exit codes: 0 success; 1 invalid input (flags, config, design, domain or
/// estimability errors); 2 a certificate or check failed, or a numerical
/// routine gave up.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace elfdesign
