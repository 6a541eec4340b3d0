#pragma once

#include <iosfwd>

namespace fsa {

/// Quick in-process oracle and property checks; prints one PASS/FAIL line per
/// check and returns true when all pass.
bool run_selftest(std::ostream& out);

} // namespace fsa
