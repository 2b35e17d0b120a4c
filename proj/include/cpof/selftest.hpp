#pragma once

#include <iosfwd>

namespace cpof {

struct SelftestOptions {
  // Negative control: replaces the POF transfer used by the unitarity check
  // with one of modulus 0.5, which must make that check fail.
  bool corrupt_transfer = false;
};

/// Fast invariant checks; prints one PASS/FAIL line each. True iff all pass.
bool run_selftest(std::ostream& os, const SelftestOptions& options = {});

}  // namespace cpof
