#pragma once

#include <stdexcept>
#include <string>

#include "irobf/ir.hpp"

namespace irobf {

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg),
        line(line_) {}
};

// Parses the canonical text form. Throws ParseError on the first syntactic
// or resolution problem; deeper semantic rules live in the validator.
IrModule parse_module(const std::string& text);

}  // namespace irobf
