// Function- and module-level analyses shared by the obfuscation passes.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "irobf/ir.hpp"
#include "irobf/rational.hpp"

namespace irobf {

// Immediate-dominator tree over reachable blocks. Exceptional may_throw
// handler edges count as ordinary CFG edges throughout.
struct DomTree {
  std::vector<int> idom;       // per block index; entry -1, unreachable -2
  std::vector<std::vector<int>> children;
  std::vector<bool> reachable;

  bool dominates(int a, int b) const;   // reflexive
  std::vector<int> subtree(int head) const;  // sorted block indices
};

DomTree dominator_tree(const Function& f);

// Predecessor block indices per block, in block order (one entry per edge).
std::vector<std::vector<int>> predecessors(const Function& f);

struct Loop {
  int header = 0;
  std::vector<int> blocks;  // sorted, includes header
  int parent = -1;          // enclosing loop index, -1 for top level
  int64_t trip_count = 0;
  bool exact = false;  // syntactically counted (const init/step/bound)

  bool contains(int b) const;
};

struct LoopInfo {
  std::vector<Loop> loops;
  std::vector<int> innermost;  // per block: innermost loop index or -1

  // Product of trip counts of every loop enclosing b (1 outside loops).
  int64_t multiplier(int b) const;
};

// Natural loops from back edges. Trip counts are exact for the canonical
// counted shape (const init store in the sole preheader, slt/sle compare
// against a constant in the header, single positive const-step update);
// everything else gets default_trip.
LoopInfo loop_info(const Function& f, const DomTree& dt, int64_t default_trip = 10);

// Structural execution-frequency estimate. Entry starts at 1; every block
// splits its outflow equally across all outgoing edges (back edges absorb
// their share); blocks inside loops multiply by the product of enclosing
// trip counts. Kept as exact rationals so downstream comparisons do not
// depend on accumulation order. freq[b] is 0 for unreachable blocks,
// positive otherwise.
struct FreqMap {
  std::vector<Rat> freq;
};

FreqMap block_frequency(const Function& f, const DomTree& dt, const LoopInfo& li);

// Globals never stored to anywhere in the module.
std::set<std::string> constant_globals(const IrModule& m);

// Functions whose full execution is innocuous: every block innocuous, an
// acyclic CFG, and only calls to functions already proven innocuous-total.
std::set<std::string> innocuous_total_functions(const IrModule& m);

// Blocks whose execution cannot affect global state or observable behavior:
// stores only through own-function slot_addr, loads from own slots or
// constant globals, no print/setjmp/longjmp/may_throw, no icalls, calls only
// to innocuous-total functions, and no possibly-trapping division.
std::vector<bool> innocuous_blocks(const IrModule& m, const Function& f);
std::vector<bool> innocuous_blocks(const IrModule& m, const Function& f,
                                   const std::set<std::string>& total,
                                   const std::set<std::string>& const_globals);

// Functions whose address may leave the module: listed as externally visible,
// or an addr_of result that (transitively, through registers, slots, globals,
// calls and returns) is stored to a global, stored through an unknown
// pointer, passed to an external function or an icall, or returned from an
// exported function. A deliberate superset approximation.
std::set<std::string> escape_set(const IrModule& m);

}  // namespace irobf
