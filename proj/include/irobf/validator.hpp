#pragma once

#include <string>
#include <vector>

#include "irobf/ir.hpp"

namespace irobf {

struct Violation {
  std::string function;  // empty for module-level problems
  std::string block;     // empty for function-level problems
  std::string message;

  std::string to_string() const;
};

// Structural and type rules beyond what the parser enforces: name resolution,
// single-assignment, def-dominates-use, terminator targets, per-opcode type
// checks, entry-block predecessor freedom. Returns every violation found.
std::vector<Violation> validate(const IrModule& m);

}  // namespace irobf
