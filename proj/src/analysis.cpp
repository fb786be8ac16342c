#include "irobf/analysis.hpp"

#include <algorithm>

namespace irobf {

namespace {

// Reverse postorder over successor_edges, reachable blocks only.
std::vector<int> reverse_postorder(const Function& f) {
  std::vector<int> order;
  std::vector<char> state(f.blocks.size(), 0);  // 0 new, 1 open, 2 done
  // Iterative DFS with an explicit stack of (block, next successor index).
  std::vector<std::pair<int, size_t>> stack;
  std::vector<std::vector<int>> succ(f.blocks.size());
  for (size_t b = 0; b < f.blocks.size(); ++b)
    for (const auto& t : successor_edges(f.blocks[b])) {
      int ti = f.block_index(t);
      if (ti >= 0) succ[b].push_back(ti);
    }
  stack.push_back({0, 0});
  state[0] = 1;
  while (!stack.empty()) {
    auto& [b, i] = stack.back();
    if (i < succ[b].size()) {
      int s = succ[b][i++];
      if (state[s] == 0) {
        state[s] = 1;
        stack.push_back({s, 0});
      }
    } else {
      state[b] = 2;
      order.push_back(b);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

bool DomTree::dominates(int a, int b) const {
  while (b >= 0) {
    if (a == b) return true;
    b = idom[b];
  }
  return false;
}

std::vector<int> DomTree::subtree(int head) const {
  std::vector<int> out, work{head};
  while (!work.empty()) {
    int b = work.back();
    work.pop_back();
    out.push_back(b);
    for (int c : children[b]) work.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<int>> predecessors(const Function& f) {
  std::vector<std::vector<int>> preds(f.blocks.size());
  for (size_t b = 0; b < f.blocks.size(); ++b)
    for (const auto& t : successor_edges(f.blocks[b])) {
      int ti = f.block_index(t);
      if (ti >= 0) preds[ti].push_back(static_cast<int>(b));
    }
  return preds;
}

// Cooper/Harvey/Kennedy iterative algorithm over reverse postorder.
DomTree dominator_tree(const Function& f) {
  size_t n = f.blocks.size();
  DomTree dt;
  dt.idom.assign(n, -2);
  dt.children.assign(n, {});
  dt.reachable.assign(n, false);

  std::vector<int> rpo = reverse_postorder(f);
  std::vector<int> rpo_pos(n, -1);
  for (size_t i = 0; i < rpo.size(); ++i) {
    rpo_pos[rpo[i]] = static_cast<int>(i);
    dt.reachable[rpo[i]] = true;
  }
  auto preds = predecessors(f);

  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (rpo_pos[a] > rpo_pos[b]) a = dt.idom[a];
      while (rpo_pos[b] > rpo_pos[a]) b = dt.idom[b];
    }
    return a;
  };

  dt.idom[0] = 0;  // sentinel during iteration
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b : rpo) {
      if (b == 0) continue;
      int new_idom = -1;
      for (int p : preds[b]) {
        if (!dt.reachable[p] || dt.idom[p] == -2) continue;
        new_idom = new_idom < 0 ? p : intersect(p, new_idom);
      }
      if (new_idom >= 0 && dt.idom[b] != new_idom) {
        dt.idom[b] = new_idom;
        changed = true;
      }
    }
  }
  dt.idom[0] = -1;
  for (size_t b = 1; b < n; ++b)
    if (dt.idom[b] >= 0) dt.children[dt.idom[b]].push_back(static_cast<int>(b));
  return dt;
}

bool Loop::contains(int b) const {
  return std::binary_search(blocks.begin(), blocks.end(), b);
}

int64_t LoopInfo::multiplier(int b) const {
  int64_t m = 1;
  for (int li = b < static_cast<int>(innermost.size()) ? innermost[b] : -1;
       li >= 0; li = loops[li].parent)
    m *= loops[li].trip_count;
  return m;
}

namespace {

struct DefMap {
  std::map<std::string, const Instruction*> defs;
  explicit DefMap(const Function& f) {
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.has_result()) defs[in.result] = &in;
  }
  const Instruction* operator[](const Operand& o) const {
    if (o.kind != Operand::Kind::Reg) return nullptr;
    auto it = defs.find(o.name);
    return it == defs.end() ? nullptr : it->second;
  }
};

// The canonical counted-loop recognizer. Returns trips or -1.
int64_t counted_trips(const Function& f, const Loop& loop,
                      const std::vector<std::vector<int>>& preds,
                      const DefMap& defs) {
  const BasicBlock& h = f.blocks[loop.header];
  if (h.term.kind != TermKind::CondBr) return -1;

  // Header: %iv = load <ty>, %p(slot s); %c = icmp slt/sle %iv, K; condbr %c.
  if (h.term.value.kind != Operand::Kind::Reg) return -1;
  const Instruction* cmp = defs[h.term.value];
  if (!cmp || cmp->op != Opcode::Icmp) return -1;
  if (cmp->pred != "slt" && cmp->pred != "sle") return -1;
  if (cmp->args[1].kind != Operand::Kind::ImmInt) return -1;
  int64_t bound = cmp->args[1].ival;
  const Instruction* ld = defs[cmp->args[0]];
  if (!ld || ld->op != Opcode::Load) return -1;
  const Instruction* sa = defs[ld->args[0]];
  if (!sa || sa->op != Opcode::SlotAddr) return -1;
  const std::string slot = sa->slot;

  // Continue edge on true, exit on false.
  int t0 = f.block_index(h.term.targets[0]);
  int t1 = f.block_index(h.term.targets[1]);
  if (!(loop.contains(t0) && !loop.contains(t1))) return -1;

  // The slot address must be used only as a load/store address.
  for (const auto& b : f.blocks) {
    auto addr_is_slot = [&](const Operand& o) {
      const Instruction* d = defs[o];
      return d && d->op == Opcode::SlotAddr && d->slot == slot;
    };
    for (const auto& in : b.insts) {
      for (size_t i = 0; i < in.args.size(); ++i) {
        if (in.args[i].kind != Operand::Kind::Reg || !addr_is_slot(in.args[i]))
          continue;
        bool ok = (in.op == Opcode::Load && i == 0) ||
                  (in.op == Opcode::Store && i == 1);
        if (!ok) return -1;
      }
    }
    if (b.term.value.kind == Operand::Kind::Reg && addr_is_slot(b.term.value))
      return -1;
  }

  // Exactly one store to the slot inside the loop: store (add load(s), step).
  int64_t step = 0;
  int stores_seen = 0;
  for (int bi : loop.blocks) {
    for (const auto& in : f.blocks[bi].insts) {
      if (in.op != Opcode::Store) continue;
      const Instruction* a = defs[in.args[1]];
      if (!a || a->op != Opcode::SlotAddr || a->slot != slot) continue;
      if (++stores_seen > 1) return -1;
      const Instruction* upd = defs[in.args[0]];
      if (!upd || upd->op != Opcode::Add) return -1;
      if (upd->args[1].kind != Operand::Kind::ImmInt || upd->args[1].ival <= 0)
        return -1;
      const Instruction* base = defs[upd->args[0]];
      const Instruction* basesa = base && base->op == Opcode::Load ? defs[base->args[0]] : nullptr;
      if (!basesa || basesa->op != Opcode::SlotAddr || basesa->slot != slot)
        return -1;
      step = upd->args[1].ival;
    }
  }
  if (stores_seen != 1) return -1;

  // Unique preheader ends with a constant init store to the slot.
  int pre = -1;
  for (int p : preds[loop.header]) {
    if (loop.contains(p)) continue;
    if (pre >= 0) return -1;
    pre = p;
  }
  if (pre < 0) return -1;
  int64_t init = 0;
  bool found_init = false;
  const auto& pb = f.blocks[pre];
  for (auto it = pb.insts.rbegin(); it != pb.insts.rend(); ++it) {
    if (it->op != Opcode::Store) continue;
    const Instruction* a = defs[it->args[1]];
    if (!a || a->op != Opcode::SlotAddr || a->slot != slot) continue;
    if (it->args[0].kind != Operand::Kind::ImmInt) return -1;
    init = it->args[0].ival;
    found_init = true;
    break;
  }
  if (!found_init) return -1;

  if (cmp->pred == "slt")
    return init >= bound ? 0 : (bound - init + step - 1) / step;
  return init > bound ? 0 : (bound - init) / step + 1;
}

}  // namespace

LoopInfo loop_info(const Function& f, const DomTree& dt, int64_t default_trip) {
  LoopInfo li;
  li.innermost.assign(f.blocks.size(), -1);
  auto preds = predecessors(f);

  // Collect latches per header (back edge: target dominates source).
  std::map<int, std::vector<int>> latches;
  for (size_t b = 0; b < f.blocks.size(); ++b) {
    if (!dt.reachable[b]) continue;
    for (const auto& t : successor_edges(f.blocks[b])) {
      int h = f.block_index(t);
      if (h >= 0 && dt.dominates(h, static_cast<int>(b)))
        latches[h].push_back(static_cast<int>(b));
    }
  }

  for (const auto& [header, latch_list] : latches) {
    Loop loop;
    loop.header = header;
    std::set<int> body{header};
    std::vector<int> work(latch_list.begin(), latch_list.end());
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      if (!body.insert(b).second) continue;
      for (int p : preds[b])
        if (dt.reachable[p]) work.push_back(p);
    }
    loop.blocks.assign(body.begin(), body.end());
    li.loops.push_back(std::move(loop));
  }

  // Nesting: parent is the smallest strictly-larger loop containing the header.
  for (size_t i = 0; i < li.loops.size(); ++i) {
    int best = -1;
    for (size_t j = 0; j < li.loops.size(); ++j) {
      if (i == j || li.loops[j].blocks.size() <= li.loops[i].blocks.size())
        continue;
      if (!li.loops[j].contains(li.loops[i].header)) continue;
      if (best < 0 || li.loops[j].blocks.size() < li.loops[best].blocks.size())
        best = static_cast<int>(j);
    }
    li.loops[i].parent = best;
  }

  // Innermost loop per block: the smallest loop containing it.
  for (size_t b = 0; b < f.blocks.size(); ++b) {
    int best = -1;
    for (size_t j = 0; j < li.loops.size(); ++j) {
      if (!li.loops[j].contains(static_cast<int>(b))) continue;
      if (best < 0 || li.loops[j].blocks.size() < li.loops[best].blocks.size())
        best = static_cast<int>(j);
    }
    li.innermost[b] = best;
  }

  DefMap defs(f);
  for (auto& loop : li.loops) {
    int64_t trips = counted_trips(f, loop, preds, defs);
    loop.exact = trips >= 0;
    // Floor of 1 keeps every frequency strictly positive (a provably
    // zero-trip loop still has cost).
    loop.trip_count = loop.exact ? std::max<int64_t>(trips, 1) : default_trip;
  }
  return li;
}

FreqMap block_frequency(const Function& f, const DomTree& dt, const LoopInfo& li) {
  size_t n = f.blocks.size();
  FreqMap fm;
  fm.freq.assign(n, Rat(0));
  std::vector<Rat> base(n, Rat(0));
  std::vector<int> rpo = reverse_postorder(f);
  base[0] = Rat(1);
  for (int b : rpo) {
    auto edges = successor_edges(f.blocks[b]);
    if (edges.empty() || base[b].num == 0) continue;
    Rat share = base[b] / Rat(static_cast<int64_t>(edges.size()));
    for (const auto& t : edges) {
      int ti = f.block_index(t);
      if (ti < 0) continue;
      // Back edges absorb their share; the loop multiplier accounts for it.
      if (dt.dominates(ti, b)) continue;
      base[ti] = base[ti] + share;
    }
  }
  for (size_t b = 0; b < n; ++b)
    if (dt.reachable[b])
      fm.freq[b] = base[b] * Rat(li.multiplier(static_cast<int>(b)));
  return fm;
}

std::set<std::string> constant_globals(const IrModule& m) {
  std::set<std::string> out;
  for (const auto& g : m.globals) out.insert(g.name);
  for (const auto& f : m.functions)
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.op == Opcode::Store && in.args[1].kind == Operand::Kind::Global)
          out.erase(in.args[1].name);
  return out;
}

namespace {

bool block_innocuous(const IrModule& m, const Function& f, const BasicBlock& b,
                     const DefMap& defs, const std::set<std::string>& total,
                     const std::set<std::string>& cglob) {
  auto is_own_slot_addr = [&](const Operand& o) {
    const Instruction* d = defs[o];
    return d && d->op == Opcode::SlotAddr;
  };
  auto const_nonzero = [&](const Operand& o) {
    if (o.kind == Operand::Kind::ImmInt) return o.ival != 0;
    if (o.kind == Operand::Kind::ImmFloat) return o.fval != 0.0;
    const Instruction* d = defs[o];
    if (!d || d->op != Opcode::Const) return false;
    if (d->imm.kind == Operand::Kind::ImmInt) return d->imm.ival != 0;
    if (d->imm.kind == Operand::Kind::ImmFloat) return d->imm.fval != 0.0;
    return false;
  };
  for (const auto& in : b.insts) {
    switch (in.op) {
      case Opcode::Store:
        if (!is_own_slot_addr(in.args[1])) return false;
        break;
      case Opcode::Load:
        if (in.args[0].kind == Operand::Kind::Global) {
          if (!cglob.count(in.args[0].name)) return false;
        } else if (!is_own_slot_addr(in.args[0])) {
          return false;
        }
        break;
      case Opcode::Call: {
        if (!total.count(in.callee)) return false;
        break;
      }
      case Opcode::Icall:
      case Opcode::Print:
      case Opcode::Setjmp:
      case Opcode::Longjmp:
      case Opcode::MayThrow:
        return false;
      case Opcode::Sdiv:
      case Opcode::Srem:
      case Opcode::Fdiv:
        if (!const_nonzero(in.args[1])) return false;
        break;
      default:
        break;
    }
  }
  (void)m;
  (void)f;
  return true;
}

bool has_cycle(const Function& f, const DomTree& dt) {
  for (size_t b = 0; b < f.blocks.size(); ++b) {
    if (!dt.reachable[b]) continue;
    for (const auto& t : successor_edges(f.blocks[b])) {
      int ti = f.block_index(t);
      if (ti >= 0 && dt.dominates(ti, static_cast<int>(b))) return true;
    }
  }
  return false;
}

}  // namespace

std::set<std::string> innocuous_total_functions(const IrModule& m) {
  std::set<std::string> total;
  std::set<std::string> cglob = constant_globals(m);
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& f : m.functions) {
      if (f.is_external || total.count(f.name)) continue;
      DomTree dt = dominator_tree(f);
      if (has_cycle(f, dt)) continue;
      DefMap defs(f);
      bool all = true;
      for (const auto& b : f.blocks)
        if (!block_innocuous(m, f, b, defs, total, cglob)) {
          all = false;
          break;
        }
      if (all) {
        total.insert(f.name);
        grew = true;
      }
    }
  }
  return total;
}

std::vector<bool> innocuous_blocks(const IrModule& m, const Function& f,
                                   const std::set<std::string>& total,
                                   const std::set<std::string>& cglob) {
  DefMap defs(f);
  std::vector<bool> out(f.blocks.size(), false);
  for (size_t b = 0; b < f.blocks.size(); ++b)
    out[b] = block_innocuous(m, f, f.blocks[b], defs, total, cglob);
  return out;
}

std::vector<bool> innocuous_blocks(const IrModule& m, const Function& f) {
  return innocuous_blocks(m, f, innocuous_total_functions(m), constant_globals(m));
}

namespace {

using Taint = std::set<std::string>;  // function names a value may point at

struct EscapeState {
  std::map<std::string, std::map<std::string, Taint>> regs;   // per function
  std::map<std::string, std::map<std::string, Taint>> slots;  // per function
  std::map<std::string, Taint> globals;
  std::map<std::string, std::vector<Taint>> params;
  std::map<std::string, Taint> rets;
  Taint escaped;
  bool changed = false;

  void add(Taint& into, const Taint& from) {
    for (const auto& t : from)
      if (into.insert(t).second) changed = true;
  }
};

}  // namespace

std::set<std::string> escape_set(const IrModule& m) {
  EscapeState st;
  for (const auto& v : m.visible_ptrs) st.escaped.insert(v);
  for (const auto& f : m.functions)
    st.params[f.name].assign(f.params.size(), {});

  auto pass = [&]() {
    for (const auto& f : m.functions) {
      auto& regs = st.regs[f.name];
      auto& slots = st.slots[f.name];
      for (size_t i = 0; i < f.params.size(); ++i)
        st.add(regs[f.params[i].name], st.params[f.name][i]);

      DefMap defs(f);
      auto taint_of = [&](const Operand& o) -> Taint {
        if (o.kind != Operand::Kind::Reg) return {};
        auto it = regs.find(o.name);
        return it == regs.end() ? Taint{} : it->second;
      };
      auto slot_of_addr = [&](const Operand& o) -> const Instruction* {
        const Instruction* d = defs[o];
        return d && d->op == Opcode::SlotAddr ? d : nullptr;
      };

      for (const auto& b : f.blocks) {
        for (const auto& in : b.insts) {
          switch (in.op) {
            case Opcode::AddrOfFunc:
              if (regs[in.result].insert(in.callee).second) st.changed = true;
              break;
            case Opcode::Load:
              if (in.args[0].kind == Operand::Kind::Global)
                st.add(regs[in.result], st.globals[in.args[0].name]);
              else if (const Instruction* sa = slot_of_addr(in.args[0]))
                st.add(regs[in.result], slots[sa->slot]);
              break;
            case Opcode::Store: {
              Taint v = taint_of(in.args[0]);
              if (v.empty()) break;
              if (in.args[1].kind == Operand::Kind::Global) {
                st.add(st.globals[in.args[1].name], v);
                st.add(st.escaped, v);  // a global cell may outlive the module
              } else if (const Instruction* sa = slot_of_addr(in.args[1])) {
                st.add(slots[sa->slot], v);
              } else {
                st.add(st.escaped, v);  // unknown memory
              }
              break;
            }
            case Opcode::Call: {
              const Function* callee = m.find_function(in.callee);
              for (size_t i = 0; i < in.args.size(); ++i) {
                Taint v = taint_of(in.args[i]);
                if (v.empty()) continue;
                if (!callee || callee->is_external ||
                    i >= callee->params.size())
                  st.add(st.escaped, v);
                else
                  st.add(st.params[in.callee][i], v);
              }
              if (in.has_result() && callee)
                st.add(regs[in.result], st.rets[in.callee]);
              break;
            }
            case Opcode::Icall:
              // Unknown callee: arguments escape; the callee value itself is
              // merely being called, which is not an escape.
              for (size_t i = 1; i < in.args.size(); ++i)
                st.add(st.escaped, taint_of(in.args[i]));
              break;
            default:
              break;
          }
        }
        if (b.term.kind == TermKind::Ret && b.term.has_value) {
          Taint v = taint_of(b.term.value);
          if (!v.empty()) {
            st.add(st.rets[f.name], v);
            if (m.exported.count(f.name)) st.add(st.escaped, v);
          }
        }
      }
    }
  };

  do {
    st.changed = false;
    pass();
  } while (st.changed);
  return st.escaped;
}

}  // namespace irobf
