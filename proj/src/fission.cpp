// Fission pass: pick dominator-subtree regions worth splitting, demote
// cross-boundary registers to slots, then outline each region into a fresh
// function reached through a dispatch call.
#include "irobf/fission.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "irobf/validator.hpp"

namespace irobf {

namespace {

// Registers can appear as instruction operands or as the single value slot of
// a terminator (condbr condition, switch scrutinee, ret value).
bool term_has_value(const Terminator& t) {
  return t.kind == TermKind::CondBr || t.kind == TermKind::Switch ||
         (t.kind == TermKind::Ret && t.has_value);
}

// Fresh-name supply. All synthesized names start with "fis." so transformed
// modules stay readable and tests can separate inserted artifacts from
// original ones.
struct NameSupply {
  std::set<std::string> used;

  void absorb(const std::string& n) { used.insert(n); }

  std::string fresh(const std::string& base) {
    if (used.insert(base).second) return base;
    for (int i = 0;; ++i) {
      std::string c = base + "." + std::to_string(i);
      if (used.insert(c).second) return c;
    }
  }
};

NameSupply register_names(const Function& f) {
  NameSupply s;
  for (const Param& p : f.params) s.absorb(p.name);
  for (const BasicBlock& b : f.blocks)
    for (const Instruction& in : b.insts)
      if (in.has_result()) s.absorb(in.result);
  return s;
}

NameSupply label_names(const Function& f) {
  NameSupply s;
  for (const BasicBlock& b : f.blocks) s.absorb(b.label);
  return s;
}

NameSupply slot_names(const Function& f) {
  NameSupply s;
  for (const SlotDecl& d : f.slots) s.absorb(d.name);
  return s;
}

Instruction make_slot_addr(const std::string& result, const std::string& slot) {
  Instruction in;
  in.op = Opcode::SlotAddr;
  in.result = result;
  in.type = IrType::Ptr;
  in.slot = slot;
  return in;
}

Instruction make_store(IrType t, Operand value, const std::string& addr_reg) {
  Instruction in;
  in.op = Opcode::Store;
  in.type = t;
  in.args = {std::move(value), Operand::reg(addr_reg)};
  return in;
}

Instruction make_load(const std::string& result, IrType t,
                      const std::string& addr_reg) {
  Instruction in;
  in.op = Opcode::Load;
  in.result = result;
  in.type = t;
  in.args = {Operand::reg(addr_reg)};
  return in;
}

// --------------------------------------------------------------------------
// Region identification (value-greedy subtree selection).

struct Candidate {
  int root = 0;
  std::vector<int> members;  // sorted block indices
  std::vector<char> in;      // membership bitmap over f's blocks
  Rat value;
  bool alive = true;
};

Region make_region(const Function& f, const Candidate& c, const FreqMap& fm) {
  Region r;
  r.head = c.root;
  r.head_label = f.blocks[c.root].label;
  r.members = c.members;
  for (int b : c.members) r.member_labels.push_back(f.blocks[b].label);
  r.effect = static_cast<int>(c.members.size());
  r.cost = fm.freq[c.root];
  for (int b : c.members) {
    const BasicBlock& blk = f.blocks[b];
    if (blk.term.kind == TermKind::Ret) {
      Region::Exit e;
      e.source = b;
      e.source_label = blk.label;
      e.is_ret = true;
      r.exits.push_back(e);
      continue;
    }
    std::set<std::string> seen;  // one exit per (source, target) pair
    for (const std::string& t : successor_edges(blk)) {
      int ti = f.block_index(t);
      if (ti >= 0 && c.in[ti]) continue;
      if (!seen.insert(t).second) continue;
      Region::Exit e;
      e.source = b;
      e.source_label = blk.label;
      e.target = t;
      r.exits.push_back(e);
    }
  }
  std::sort(r.exits.begin(), r.exits.end(),
            [](const Region::Exit& a, const Region::Exit& b) {
              return std::tie(a.source, a.is_ret, a.target) <
                     std::tie(b.source, b.is_ret, b.target);
            });
  return r;
}

}  // namespace

std::vector<Region> identify_regions(const Function& f, const DomTree& dt,
                                     const LoopInfo& li, const FreqMap& fm,
                                     const FissionConfig& cfg,
                                     FissionStats* stats) {
  (void)li;  // loop scaling is already folded into fm
  FissionStats scratch;
  FissionStats& st = stats ? *stats : scratch;
  const int n = static_cast<int>(f.blocks.size());

  // Every reachable non-entry dominator subtree is a candidate; subtrees that
  // contain a setjmp or would tear a may_throw away from its handler are
  // dropped up front.
  std::vector<Candidate> cands;
  for (int root = 1; root < n; ++root) {
    if (!dt.reachable[root]) continue;
    Candidate c;
    c.root = root;
    c.members = dt.subtree(root);
    c.in.assign(n, 0);
    for (int b : c.members) c.in[b] = 1;
    bool ok = true;
    for (int b : c.members) {
      for (const Instruction& in : f.blocks[b].insts) {
        if (in.op == Opcode::Setjmp) {
          ok = false;
          ++st.skipped_setjmp;
        } else if (in.op == Opcode::MayThrow) {
          int h = f.block_index(in.handler);
          if (h < 0 || !c.in[h]) {
            ok = false;
            ++st.skipped_handler_split;
          }
        }
        if (!ok) break;
      }
      if (!ok) break;
    }
    if (!ok) continue;
    c.value = Rat(static_cast<int64_t>(c.members.size())) / fm.freq[root];
    cands.push_back(std::move(c));
  }

  std::vector<Region> out;
  for (;;) {
    if (cfg.max_regions_per_function >= 0 &&
        static_cast<int>(out.size()) >= cfg.max_regions_per_function)
      break;
    int best = -1;
    for (int i = 0; i < static_cast<int>(cands.size()); ++i) {
      if (!cands[i].alive) continue;
      if (best < 0 || cands[i].value > cands[best].value) best = i;
    }
    if (best < 0) break;
    Candidate& c = cands[best];
    if (static_cast<int>(c.members.size()) < cfg.min_effect) {
      c.alive = false;  // removed, not chosen
      ++st.skipped_min_effect;
      continue;
    }
    out.push_back(make_region(f, c, fm));
    for (Candidate& o : cands) {
      if (!o.alive) continue;
      for (int b : o.members) {
        if (c.in[b]) {
          o.alive = false;
          break;
        }
      }
    }
  }
  st.regions_chosen += static_cast<int>(out.size());
  return out;
}

namespace {

// --------------------------------------------------------------------------
// Outlining.

// Reroute every register whose definition and some use sit on opposite sides
// of the region boundary through a fresh slot: store right after the
// definition (entry top for parameters), load at the top of each use block on
// the other side. Because definitions dominate uses and the region is a
// dominator subtree, crossings only ever go outside -> inside, but the
// rewrite below is direction-agnostic anyway.
void demote_crossing_registers(Function& f, const std::set<int>& mem,
                               NameSupply& slots, NameSupply& regs,
                               FissionStats& st) {
  struct DefSite {
    int block = -1;  // -1: parameter
    int inst = -1;
    IrType type = IrType::Void;
  };
  std::map<std::string, DefSite> defs;
  std::vector<std::string> order;  // parameters first, then program order
  for (const Param& p : f.params) {
    defs[p.name] = {-1, -1, p.type};
    order.push_back(p.name);
  }
  const int nblocks = static_cast<int>(f.blocks.size());
  for (int b = 0; b < nblocks; ++b)
    for (int i = 0; i < static_cast<int>(f.blocks[b].insts.size()); ++i) {
      const Instruction& in = f.blocks[b].insts[i];
      if (!in.has_result()) continue;
      defs[in.result] = {b, i, result_type(in)};
      order.push_back(in.result);
    }

  std::map<std::string, std::set<int>> use_blocks;
  for (int b = 0; b < nblocks; ++b) {
    for (const Instruction& in : f.blocks[b].insts)
      for (const Operand& o : in.args)
        if (o.is_reg()) use_blocks[o.name].insert(b);
    const Terminator& t = f.blocks[b].term;
    if (term_has_value(t) && t.value.is_reg())
      use_blocks[t.value.name].insert(b);
  }

  struct Demotion {
    std::string reg;
    DefSite def;
    std::string slot;
    std::vector<int> load_blocks;  // blocks on the far side using the reg
  };
  std::vector<Demotion> plan;
  for (const std::string& r : order) {
    const DefSite& d = defs[r];
    bool def_inside = d.block >= 0 && mem.count(d.block) > 0;
    Demotion dm;
    for (int ub : use_blocks[r])
      if ((mem.count(ub) > 0) != def_inside) dm.load_blocks.push_back(ub);
    if (dm.load_blocks.empty()) continue;
    dm.reg = r;
    dm.def = d;
    dm.slot = slots.fresh("fis.v");
    plan.push_back(std::move(dm));
  }
  if (plan.empty()) return;

  for (const Demotion& dm : plan)
    f.slots.push_back({dm.slot, dm.def.type});

  // Stores after each definition. Insert per block in descending instruction
  // index so earlier positions stay valid; parameter stores are prepended to
  // the entry block afterwards, in parameter order.
  std::vector<const Demotion*> by_pos;
  for (const Demotion& dm : plan)
    if (dm.def.block >= 0) by_pos.push_back(&dm);
  std::sort(by_pos.begin(), by_pos.end(),
            [](const Demotion* a, const Demotion* b) {
              return std::tie(a->def.block, a->def.inst) >
                     std::tie(b->def.block, b->def.inst);
            });
  for (const Demotion* dm : by_pos) {
    std::string addr = regs.fresh("fis.a");
    auto& insts = f.blocks[dm->def.block].insts;
    insts.insert(insts.begin() + dm->def.inst + 1,
                 {make_slot_addr(addr, dm->slot),
                  make_store(dm->def.type, Operand::reg(dm->reg), addr)});
  }
  std::vector<Instruction> entry_prefix;
  for (const Demotion& dm : plan) {
    if (dm.def.block >= 0) continue;
    std::string addr = regs.fresh("fis.a");
    entry_prefix.push_back(make_slot_addr(addr, dm.slot));
    entry_prefix.push_back(
        make_store(dm.def.type, Operand::reg(dm.reg), addr));
  }
  if (!entry_prefix.empty()) {
    auto& insts = f.blocks[0].insts;
    insts.insert(insts.begin(), entry_prefix.begin(), entry_prefix.end());
  }

  // Loads at the top of each far-side use block, then rewrite that block's
  // uses to the loaded register.
  std::map<int, std::vector<Instruction>> prefixes;
  std::map<int, std::map<std::string, std::string>> renames;
  for (const Demotion& dm : plan) {
    for (int ub : dm.load_blocks) {
      std::string addr = regs.fresh("fis.a");
      std::string val = regs.fresh("fis.l");
      prefixes[ub].push_back(make_slot_addr(addr, dm.slot));
      prefixes[ub].push_back(make_load(val, dm.def.type, addr));
      renames[ub][dm.reg] = val;
    }
    ++st.demoted_registers;
  }
  for (auto& [b, pre] : prefixes) {
    auto& ren = renames[b];
    for (Instruction& in : f.blocks[b].insts)
      for (Operand& o : in.args) {
        if (!o.is_reg()) continue;
        auto it = ren.find(o.name);
        if (it != ren.end()) o.name = it->second;
      }
    Terminator& t = f.blocks[b].term;
    if (term_has_value(t) && t.value.is_reg()) {
      auto it = ren.find(t.value.name);
      if (it != ren.end()) t.value.name = it->second;
    }
    auto& insts = f.blocks[b].insts;
    insts.insert(insts.begin(), pre.begin(), pre.end());
  }
}

Terminator exit_terminator(int n_exits, int code) {
  Terminator t;
  t.kind = TermKind::Ret;
  if (n_exits >= 2) {
    t.has_value = true;
    t.value = Operand::imm_int(code);
    t.type = IrType::I32;
  }
  return t;
}

}  // namespace

Function outline_region(Function& f, const Region& r, const std::string& name,
                        FissionStats* stats) {
  FissionStats scratch;
  FissionStats& st = stats ? *stats : scratch;

  // Resolve the region against the current shape of f. Labels are the stable
  // handle: disjoint regions identified together survive each other's
  // outlining because outside edges into a dominator subtree can only target
  // its head, whose label the dispatch block keeps.
  std::set<int> mem;
  std::set<std::string> mem_labels(r.member_labels.begin(),
                                   r.member_labels.end());
  for (const std::string& l : r.member_labels) {
    int b = f.block_index(l);
    if (b <= 0)
      throw std::runtime_error("fission: region block '" + l +
                               "' not outlinable in @" + f.name);
    mem.insert(b);
  }
  int head = f.block_index(r.head_label);
  if (head < 0 || !mem.count(head))
    throw std::runtime_error("fission: region head '" + r.head_label +
                             "' invalid in @" + f.name);

  NameSupply fregs = register_names(f);
  NameSupply flabels = label_names(f);
  NameSupply fslots = slot_names(f);

  demote_crossing_registers(f, mem, fslots, fregs, st);

  // Classify slots by which side touches them (slot_addr is the only access
  // path). Shared ones become pointer parameters; inside-only ones move.
  std::map<std::string, std::pair<bool, bool>> touched;  // inside, outside
  for (int b = 0; b < static_cast<int>(f.blocks.size()); ++b)
    for (const Instruction& in : f.blocks[b].insts) {
      if (in.op != Opcode::SlotAddr) continue;
      if (mem.count(b))
        touched[in.slot].first = true;
      else
        touched[in.slot].second = true;
    }
  std::vector<std::string> shared;
  std::set<std::string> priv;
  for (const SlotDecl& d : f.slots) {
    auto it = touched.find(d.name);
    if (it == touched.end()) continue;
    if (it->second.first && it->second.second)
      shared.push_back(d.name);
    else if (it->second.first)
      priv.insert(d.name);
  }

  const int k = static_cast<int>(r.exits.size());
  bool any_ret_exit = false;
  for (const Region::Exit& e : r.exits) any_ret_exit |= e.is_ret;

  // Original returns inside the region hand their value back through a
  // dedicated output slot; the remFunc-side dispatch target loads and rets.
  std::string retslot;
  if (any_ret_exit && f.ret_type != IrType::Void) {
    retslot = fslots.fresh("fis.ret");
    f.slots.push_back({retslot, f.ret_type});
    shared.push_back(retslot);
  }

  // ---- build the split-out function ----
  Function sep;
  sep.name = name;
  sep.ret_type = k >= 2 ? IrType::I32 : IrType::Void;

  NameSupply sregs;
  for (int b : mem) {
    for (const Instruction& in : f.blocks[b].insts) {
      if (in.has_result()) sregs.absorb(in.result);
      for (const Operand& o : in.args)
        if (o.is_reg()) sregs.absorb(o.name);
    }
    const Terminator& t = f.blocks[b].term;
    if (term_has_value(t) && t.value.is_reg()) sregs.absorb(t.value.name);
  }
  std::map<std::string, std::string> slot_param;
  for (const std::string& s : shared) {
    std::string pn = sregs.fresh(s);
    sep.params.push_back({pn, IrType::Ptr});
    slot_param[s] = pn;
  }
  for (const SlotDecl& d : f.slots)
    if (priv.count(d.name)) sep.slots.push_back(d);
  st.moved_private_slots += static_cast<int>(priv.size());

  // Exit lookup by labels (indices may be stale).
  std::map<std::pair<std::string, std::string>, int> label_exit;
  std::map<std::string, int> ret_exit;
  for (int i = 0; i < k; ++i) {
    const Region::Exit& e = r.exits[i];
    if (e.is_ret)
      ret_exit[e.source_label] = i;
    else
      label_exit[{e.source_label, e.target}] = i;
  }

  NameSupply slabels;
  for (const std::string& l : r.member_labels) slabels.absorb(l);

  // Clone member blocks: head first (it is sepFunc's entry unless glue is
  // needed), remaining members in current block order.
  std::vector<int> clone_order{head};
  for (int b : mem)
    if (b != head) clone_order.push_back(b);

  std::map<std::string, std::string> subst;  // shared slot_addr result -> param
  std::vector<BasicBlock> body;
  for (int b : clone_order) {
    const BasicBlock& src = f.blocks[b];
    BasicBlock nb;
    nb.label = src.label;
    for (const Instruction& in : src.insts) {
      if (in.op == Opcode::SlotAddr && slot_param.count(in.slot)) {
        subst[in.result] = slot_param[in.slot];
        continue;
      }
      nb.insts.push_back(in);
    }
    nb.term = src.term;
    body.push_back(std::move(nb));
  }
  for (BasicBlock& nb : body) {
    for (Instruction& in : nb.insts)
      for (Operand& o : in.args) {
        if (!o.is_reg()) continue;
        auto it = subst.find(o.name);
        if (it != subst.end()) o.name = it->second;
      }
    if (term_has_value(nb.term) && nb.term.value.is_reg()) {
      auto it = subst.find(nb.term.value.name);
      if (it != subst.end()) nb.term.value.name = it->second;
    }
  }

  // Rewrite terminators: region-leaving edges go to numbered exit stubs,
  // original returns store the return value and return their exit code.
  std::vector<std::string> stub_label(k);
  for (BasicBlock& nb : body) {
    if (nb.term.kind == TermKind::Ret) {
      int code = ret_exit.at(nb.label);
      if (f.ret_type != IrType::Void)
        nb.insts.push_back(make_store(f.ret_type, nb.term.value,
                                      slot_param.at(retslot)));
      nb.term = exit_terminator(k, code);
      continue;
    }
    auto reroute = [&](std::string& target) {
      if (mem_labels.count(target)) return;
      int code = label_exit.at({nb.label, target});
      if (stub_label[code].empty())
        stub_label[code] =
            slabels.fresh("fis.exit" + std::to_string(code));
      target = stub_label[code];
    };
    for (std::string& t : nb.term.targets) reroute(t);
    for (SwitchCase& c : nb.term.cases) reroute(c.target);
    if (nb.term.kind == TermKind::Switch) reroute(nb.term.default_target);
  }

  // A synthetic entry is only needed when the head has predecessors inside
  // the region (entry blocks must be predecessor-free).
  bool head_has_internal_preds = false;
  for (int b : mem)
    for (const std::string& t : successor_edges(f.blocks[b]))
      if (t == r.head_label) head_has_internal_preds = true;
  if (head_has_internal_preds) {
    BasicBlock glue;
    glue.label = slabels.fresh("fis.entry");
    glue.term.kind = TermKind::Br;
    glue.term.targets = {r.head_label};
    sep.blocks.push_back(std::move(glue));
    ++st.sep_entry_glue;
  }
  for (BasicBlock& nb : body) sep.blocks.push_back(std::move(nb));
  for (int c = 0; c < k; ++c) {
    if (stub_label[c].empty()) continue;
    BasicBlock stub;
    stub.label = stub_label[c];
    stub.term = exit_terminator(k, c);
    sep.blocks.push_back(std::move(stub));
  }

  // ---- rewrite f ----
  // Dispatch block sits at the head's position under the head's label, so
  // every outside edge into the region lands on it untouched.
  BasicBlock disp;
  disp.label = r.head_label;
  Instruction call;
  call.op = Opcode::Call;
  call.callee = name;
  call.type = sep.ret_type;
  for (const std::string& s : shared) {
    std::string addr = fregs.fresh("fis.a");
    disp.insts.push_back(make_slot_addr(addr, s));
    call.args.push_back(Operand::reg(addr));
  }
  if (k >= 2) call.result = fregs.fresh("fis.code");
  std::string code_reg = call.result;
  disp.insts.push_back(std::move(call));

  std::vector<BasicBlock> ret_blocks;
  std::vector<std::string> exit_target(k);
  for (int i = 0; i < k; ++i) {
    const Region::Exit& e = r.exits[i];
    if (!e.is_ret) {
      exit_target[i] = e.target;
      continue;
    }
    BasicBlock rb;
    rb.label = flabels.fresh("fis.ret");
    rb.term.kind = TermKind::Ret;
    if (f.ret_type != IrType::Void) {
      std::string addr = fregs.fresh("fis.a");
      std::string val = fregs.fresh("fis.l");
      rb.insts.push_back(make_slot_addr(addr, retslot));
      rb.insts.push_back(make_load(val, f.ret_type, addr));
      rb.term.has_value = true;
      rb.term.value = Operand::reg(val);
      rb.term.type = f.ret_type;
    }
    exit_target[i] = rb.label;
    ret_blocks.push_back(std::move(rb));
  }

  if (k >= 2) {
    disp.term.kind = TermKind::Switch;
    disp.term.value = Operand::reg(code_reg);
    disp.term.type = IrType::I32;
    for (int c = 0; c + 1 < k; ++c)
      disp.term.cases.push_back({c, exit_target[c]});
    disp.term.default_target = exit_target[k - 1];
    ++st.multi_exit_regions;
  } else if (k == 1) {
    disp.term.kind = TermKind::Br;
    disp.term.targets = {exit_target[0]};
    ++st.single_exit_regions;
  } else {
    // The region never hands control back (endless loop, trap, or a longjmp
    // unwinding past this frame), so the successor of the call is moot.
    disp.term.kind = TermKind::Br;
    disp.term.targets = {disp.label};
    ++st.no_exit_regions;
  }
  if (any_ret_exit) ++st.ret_exit_regions;

  std::vector<BasicBlock> kept;
  for (int b = 0; b < static_cast<int>(f.blocks.size()); ++b) {
    if (b == head)
      kept.push_back(std::move(disp));
    else if (!mem.count(b))
      kept.push_back(std::move(f.blocks[b]));
  }
  for (BasicBlock& rb : ret_blocks) kept.push_back(std::move(rb));
  f.blocks = std::move(kept);
  if (!priv.empty()) {
    std::vector<SlotDecl> ks;
    for (const SlotDecl& d : f.slots)
      if (!priv.count(d.name)) ks.push_back(d);
    f.slots = std::move(ks);
  }

  st.blocks_moved += r.effect;
  return sep;
}

FissionOutcome run_fission(const IrModule& m, const FissionConfig& cfg,
                           uint64_t rng_seed) {
  (void)rng_seed;  // selection is purely analytical
  FissionOutcome out;
  out.module = m;
  FissionStats& st = out.stats;

  std::vector<double> removed_ratios;  // one entry per function with a body
  std::vector<int> sep_sizes;

  const size_t n_input = out.module.functions.size();
  for (size_t fi = 0; fi < n_input; ++fi) {
    std::string fname = out.module.functions[fi].name;
    if (out.module.functions[fi].is_external) {
      out.provenance[fname] = {{fname}, "unchanged"};
      continue;
    }
    ++st.ori_funcs;
    std::vector<Region> regions;
    if (out.module.functions[fi].blocks.size() >= 2) {
      const Function& f = out.module.functions[fi];
      DomTree dt = dominator_tree(f);
      LoopInfo li = loop_info(f, dt, cfg.default_trip_count);
      FreqMap fm = block_frequency(f, dt, li);
      regions = identify_regions(f, dt, li, fm, cfg, &st);
    }
    if (regions.empty()) {
      out.provenance[fname] = {{fname}, "unchanged"};
      removed_ratios.push_back(0.0);
      continue;
    }
    // Outline in head-position order so suffix numbering follows the layout
    // of the original function rather than the selection ranking.
    std::vector<int> order(regions.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return regions[a].head < regions[b].head;
    });
    int orig_blocks = static_cast<int>(out.module.functions[fi].blocks.size());
    int moved = 0;
    for (size_t i = 0; i < order.size(); ++i) {
      const Region& rg = regions[order[i]];
      std::string nm = out.module.fresh_function_name(
          fname + ".sep." + std::to_string(i));
      // note: push_back below may reallocate, so re-index the function here
      Function sep = outline_region(out.module.functions[fi], rg, nm, &st);
      moved += rg.effect;
      sep_sizes.push_back(rg.effect);
      out.module.functions.push_back(std::move(sep));
      out.provenance[nm] = {{fname}, "sepFunc"};
      ++st.sep_funcs;
    }
    out.provenance[fname] = {{fname}, "remFunc"};
    removed_ratios.push_back(static_cast<double>(moved) / orig_blocks);
  }

  if (st.ori_funcs > 0)
    st.fission_ratio = static_cast<double>(st.sep_funcs) / st.ori_funcs;
  if (!sep_sizes.empty()) {
    double s = 0;
    for (int v : sep_sizes) s += v;
    st.mean_sep_blocks = s / sep_sizes.size();
  }
  if (!removed_ratios.empty()) {
    double s = 0;
    for (double v : removed_ratios) s += v;
    st.mean_removed_ratio = s / removed_ratios.size();
  }

  auto errs = validate(out.module);
  if (!errs.empty())
    throw std::runtime_error("fission: output module failed validation: " +
                             errs.front().to_string());
  return out;
}

}  // namespace irobf
