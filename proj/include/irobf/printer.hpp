#pragma once

#include <string>

#include "irobf/ir.hpp"

namespace irobf {

// Canonical text form. parse(print(m)) reproduces the module exactly, and
// print(parse(text)) is a fixpoint after one round.
std::string print_module(const IrModule& m);
std::string print_function(const Function& f);
std::string format_float(double v);  // shortest round-trippable decimal

}  // namespace irobf
