// Reference interpreter: the ground-truth semantics used for differential
// testing of every transformation. Deliberately strict — anything the IR
// leaves undefined becomes a deterministic trap.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irobf/ir.hpp"

namespace irobf {

enum class TrapKind {
  None,
  NullDeref,       // null, dangling or otherwise invalid memory access
  DivByZero,
  Unreachable,     // calling a declared-but-undefined function
  StepLimit,       // instruction budget or call-depth exhausted
  BadIcallTarget,  // indirect call to a non-function, tag or signature error
};

const char* trap_name(TrapKind k);

// A runtime value: integers are kept sign-normalized to their static width,
// f32 results are rounded through float precision, and pointers remember
// what they point at so dangling access is detectable.
struct Value {
  enum class Kind : uint8_t { Int, Float, Ptr } kind = Kind::Int;
  int64_t i = 0;
  double f = 0.0;
  // Pointer payload.
  enum class Space : uint8_t { Null, Slot, Global, Func } space = Space::Null;
  int32_t frame_depth = -1;   // Slot: position in the call stack
  int64_t frame_serial = -1;  // Slot: activation id (dangling detection)
  int32_t index = -1;         // Slot/Global: cell index
  int64_t bits = 0;           // Func: address bits, possibly tagged

  static Value make_int(int64_t v, IrType t);
  static Value make_float(double v, IrType t);
  static Value null();
};

struct ExecResult {
  std::optional<int64_t> exit_value;      // set for int-returning entries
  std::vector<std::string> output_trace;  // one string per print
  TrapKind trap = TrapKind::None;
  std::string trap_location;              // "function:block" when trapped
  uint64_t steps = 0;

  bool trapped() const { return trap != TrapKind::None; }
};

struct RunLimits {
  uint64_t max_steps = 10'000'000;
  int max_call_depth = 2'000;
};

// Dynamic invariants checked by run_checked on transformed modules.
struct CheckSpec {
  // Split-off functions that return an exit selector: name -> number of
  // exits k; every returned selector must land in [0, k).
  std::map<std::string, int> exit_ranges;
  // "function:label" blocks that must leave globals untouched
  // (merged innocuous blocks).
  std::set<std::string> neutral_blocks;
  // Require every frame to be entered through an untagged address.
  bool tag_hygiene = false;
};

struct CheckReport {
  std::vector<std::string> violations;
  // Observed condbr decisions per "function:label", for coverage accounting.
  std::map<std::string, std::set<bool>> branch_outcomes;
};

// Precompiled module: resolves names to dense indices once so repeated runs
// are cheap. The source module must outlive the Interp and not change.
class Interp {
 public:
  explicit Interp(const IrModule& m);
  ~Interp();
  Interp(Interp&&) noexcept;
  Interp& operator=(Interp&&) noexcept;

  ExecResult run(const std::string& entry, const std::vector<Value>& args,
                 const RunLimits& limits = {}) const;

  ExecResult run_checked(const std::string& entry,
                         const std::vector<Value>& args,
                         const RunLimits& limits, const CheckSpec& checks,
                         CheckReport& report) const;

  // Parses "i64:7", "f32:1.5", "ptr:null" style typed literals (the CLI
  // argument format). Throws std::invalid_argument on malformed input.
  static Value parse_typed_literal(const std::string& text);

  const IrModule& module() const;

  struct Impl;  // compiled form; public so the execution engine can see it

 private:
  std::unique_ptr<Impl> impl_;
};

// Format a value the way print does (decimal integers, round-trippable
// floats, "@name"/"null" for pointers).
std::string format_value(const IrModule& m, const Value& v);

// One-shot helper.
ExecResult run_module(const IrModule& m, const std::string& entry,
                      const std::vector<Value>& args,
                      const RunLimits& limits = {});

}  // namespace irobf
