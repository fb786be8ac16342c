// Deterministic generator of valid, terminating IR programs that exercise
// every transformation path: bounded loops, branches, switches, call chains,
// indirect calls through selected pointers, setjmp/longjmp pairs, may_throw
// handlers and global traffic.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irobf/interp.hpp"
#include "irobf/ir.hpp"

namespace irobf {

struct GenSpec {
  uint64_t seed = 1;
  int n_functions = 5;
  int max_blocks = 12;  // per function
  bool loops = true;
  bool icalls = true;
  bool setjmp = true;
  bool may_throw = true;
  bool globals = true;
};

// Same spec -> byte-identical module text. The module always validates,
// "main" (exported, two i64 parameters, i64 result) is the entry point, and
// every run on generate_inputs vectors terminates without traps.
IrModule generate(const GenSpec& spec);

// n deterministic, type-correct argument vectors for the entry's signature.
// Integer draws stay small so data-driven branches see both outcomes.
std::vector<std::vector<Value>> generate_inputs(const IrModule& m,
                                                const std::string& entry,
                                                int n, uint64_t seed);

// The 200-program differential-testing corpus (varied sizes and toggles).
std::vector<GenSpec> standard_corpus_specs();

// Single large module used for the binary-diffing study.
GenSpec diffing_genspec();

}  // namespace irobf
