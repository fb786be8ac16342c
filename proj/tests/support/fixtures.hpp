// Hand-written IR fixtures reused across test binaries.
#pragma once

#include <string>

#include "irobf/ir.hpp"

namespace irobf::testing {

// File-processing routine with the worked-example shape: a two-way open
// path (named file vs. default descriptor), a counting loop over the
// descriptor's synthetic byte stream, and a shared exit that returns the
// result slot. Blocks bb1..bb9; splitting carves out {bb2,bb3} (two exits:
// 0 -> bb5, 1 -> bb9) and {bb5,bb6,bb7,bb8} (single exit -> bb9).
extern const char* kCalFileText;

// Two small arithmetic helpers with merge-friendly signatures:
// bar(i16, i64) -> i32 and foo(i32, ptr) -> i16. Only the leading
// short/int pair is type-compatible, so a merged function carries
// (ctrl, i32, i64, ptr).
extern const char* kBarFooText;

// Parse + validate; aborts the test process with a message on failure.
IrModule parse_fixture(const std::string& text);

}  // namespace irobf::testing
