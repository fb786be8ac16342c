#include "irobf/validator.hpp"

#include <map>

namespace irobf {

std::string Violation::to_string() const {
  std::string s;
  if (!function.empty()) s += "@" + function;
  if (!block.empty()) s += " " + block;
  if (!s.empty()) s += ": ";
  return s + message;
}

namespace {

const char* kIcmpPreds[] = {"eq", "ne", "slt", "sle", "sgt", "sge"};
const char* kFcmpPreds[] = {"oeq", "one", "olt", "ole", "ogt", "oge"};

bool valid_pred(const std::string& p, bool is_fcmp) {
  for (const char* s : is_fcmp ? kFcmpPreds : kIcmpPreds)
    if (p == s) return true;
  return false;
}

struct Def {
  int block = -1;  // -1: function parameter
  int pos = 0;
  IrType type = IrType::Void;
};

class FunctionChecker {
 public:
  FunctionChecker(const IrModule& m, const Function& f, std::vector<Violation>& out)
      : m_(m), f_(f), out_(out) {}

  void run() {
    index_blocks();
    collect_defs();
    if (!bad_structure_) {
      compute_reachability();
      compute_dominators();
    }
    check_entry_preds();
    for (size_t bi = 0; bi < f_.blocks.size(); ++bi) check_block(static_cast<int>(bi));
    check_fuse_map();
  }

 private:
  const IrModule& m_;
  const Function& f_;
  std::vector<Violation>& out_;
  std::map<std::string, int> block_idx_;
  std::map<std::string, Def> defs_;
  std::vector<bool> reachable_;
  std::vector<std::vector<bool>> dom_;  // dom_[b][d]: d dominates b
  bool bad_structure_ = false;

  void err(const std::string& block, const std::string& msg) {
    out_.push_back({f_.name, block, msg});
  }

  void index_blocks() {
    for (size_t i = 0; i < f_.blocks.size(); ++i)
      block_idx_[f_.blocks[i].label] = static_cast<int>(i);
  }

  void collect_defs() {
    for (size_t i = 0; i < f_.params.size(); ++i) {
      const Param& p = f_.params[i];
      if (p.type == IrType::Void) err("", "parameter %" + p.name + " of type void");
      if (defs_.count(p.name)) {
        err("", "duplicate parameter %" + p.name);
        bad_structure_ = true;
      }
      defs_[p.name] = Def{-1, static_cast<int>(i), p.type};
    }
    for (size_t bi = 0; bi < f_.blocks.size(); ++bi) {
      const BasicBlock& b = f_.blocks[bi];
      for (size_t pi = 0; pi < b.insts.size(); ++pi) {
        const Instruction& in = b.insts[pi];
        if (!in.has_result()) continue;
        if (defs_.count(in.result)) {
          err(b.label, "register %" + in.result + " assigned more than once");
          bad_structure_ = true;
          continue;
        }
        defs_[in.result] =
            Def{static_cast<int>(bi), static_cast<int>(pi), result_type(in)};
      }
    }
    for (const auto& s : f_.slots)
      if (defs_.count(s.name))
        err("", "slot %" + s.name + " collides with a register name");
  }

  void compute_reachability() {
    reachable_.assign(f_.blocks.size(), false);
    std::vector<int> work{0};
    reachable_[0] = true;
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      for (const auto& t : successor_edges(f_.blocks[b])) {
        auto it = block_idx_.find(t);
        if (it == block_idx_.end()) continue;  // reported separately
        if (!reachable_[it->second]) {
          reachable_[it->second] = true;
          work.push_back(it->second);
        }
      }
    }
  }

  // Plain iterative set-based dominators; deliberately independent of the
  // analysis module so it can cross-check pass output.
  void compute_dominators() {
    size_t n = f_.blocks.size();
    std::vector<std::vector<int>> preds(n);
    for (size_t b = 0; b < n; ++b) {
      if (!reachable_[b]) continue;
      for (const auto& t : successor_edges(f_.blocks[b])) {
        auto it = block_idx_.find(t);
        if (it != block_idx_.end()) preds[it->second].push_back(static_cast<int>(b));
      }
    }
    dom_.assign(n, std::vector<bool>(n, true));
    dom_[0].assign(n, false);
    dom_[0][0] = true;
    bool changed = true;
    while (changed) {
      changed = false;
      for (size_t b = 1; b < n; ++b) {
        if (!reachable_[b]) continue;
        std::vector<bool> nd(n, true);
        bool any = false;
        for (int p : preds[b]) {
          if (!reachable_[p]) continue;
          any = true;
          for (size_t d = 0; d < n; ++d) nd[d] = nd[d] && dom_[p][d];
        }
        if (!any) nd.assign(n, false);
        nd[b] = true;
        if (nd != dom_[b]) {
          dom_[b] = nd;
          changed = true;
        }
      }
    }
  }

  void check_entry_preds() {
    const std::string& entry = f_.blocks[0].label;
    for (const auto& b : f_.blocks)
      for (const auto& t : successor_edges(b))
        if (t == entry) err(b.label, "edge targets the entry block");
  }

  int first_maythrow(const BasicBlock& b) const {
    for (size_t i = 0; i < b.insts.size(); ++i)
      if (b.insts[i].op == Opcode::MayThrow) return static_cast<int>(i);
    return static_cast<int>(b.insts.size());
  }

  // pos kIsTerm marks a use inside the terminator.
  static constexpr int kIsTerm = 1 << 28;

  void check_use(int block, int pos, const std::string& label, const Operand& o,
                 IrType want, const char* what) {
    if (o.kind != Operand::Kind::Reg) return;
    auto it = defs_.find(o.name);
    if (it == defs_.end()) {
      err(label, std::string(what) + " uses undefined register %" + o.name);
      return;
    }
    const Def& d = it->second;
    if (want != IrType::Void && d.type != want)
      err(label, std::string(what) + ": %" + o.name + " has type " +
                     type_name(d.type) + ", expected " + type_name(want));
    if (bad_structure_ || d.block < 0) return;  // params dominate everything
    if (block < static_cast<int>(reachable_.size()) && !reachable_[block]) return;
    if (d.block == block) {
      if (pos <= d.pos)
        err(label, std::string(what) + " uses %" + o.name + " before its definition");
    } else {
      const BasicBlock& db = f_.blocks[d.block];
      if (d.pos > first_maythrow(db))
        err(label, "%" + o.name +
                       " is defined after a may_throw and used outside its block");
      if (!dom_[block][d.block])
        err(label, std::string(what) + " uses %" + o.name +
                       " whose definition does not dominate it");
    }
  }

  void check_value_operand(int bi, int pos, const std::string& label,
                           const Operand& o, IrType want, const char* what) {
    switch (o.kind) {
      case Operand::Kind::Reg:
        check_use(bi, pos, label, o, want, what);
        break;
      case Operand::Kind::ImmInt:
        if (!is_int(want))
          err(label, std::string(what) + ": integer literal where " +
                         type_name(want) + " expected");
        break;
      case Operand::Kind::ImmFloat:
        if (!is_float(want))
          err(label, std::string(what) + ": float literal where " +
                         type_name(want) + " expected");
        break;
      case Operand::Kind::NullPtr:
        if (want != IrType::Ptr)
          err(label, std::string(what) + ": null where " + type_name(want) +
                         " expected");
        break;
      case Operand::Kind::Global:
        err(label, std::string(what) + ": a global is not a value operand");
        break;
    }
  }

  void check_address_operand(int bi, int pos, const std::string& label,
                             const Operand& o, IrType access, const char* what) {
    if (o.kind == Operand::Kind::Reg) {
      check_use(bi, pos, label, o, IrType::Ptr, what);
    } else if (o.kind == Operand::Kind::Global) {
      const GlobalVar* g = m_.find_global(o.name);
      if (!g)
        err(label, std::string(what) + " references unknown global @" + o.name);
      else if (g->type != access)
        err(label, std::string(what) + " of type " + type_name(access) +
                       " on global @" + o.name + " of type " + type_name(g->type));
    } else {
      err(label, std::string(what) + ": address must be a ptr register or a global");
    }
  }

  void check_label(const std::string& block, const std::string& t, const char* what) {
    if (!block_idx_.count(t))
      err(block, std::string(what) + " targets unknown label '" + t + "'");
  }

  void check_block(int bi) {
    const BasicBlock& b = f_.blocks[bi];
    for (size_t pi = 0; pi < b.insts.size(); ++pi)
      check_inst(bi, static_cast<int>(pi), b.insts[pi]);
    check_term(bi);
  }

  void require_result(const Instruction& in, const std::string& label) {
    if (!in.has_result())
      err(label, std::string(opcode_name(in.op)) + " requires a result register");
  }

  void forbid_result(const Instruction& in, const std::string& label) {
    if (in.has_result())
      err(label, std::string(opcode_name(in.op)) + " produces no value");
  }

  void check_inst(int bi, int pos, const Instruction& in) {
    const std::string& L = f_.blocks[bi].label;
    switch (in.op) {
      case Opcode::Const:
        require_result(in, L);
        if (in.type == IrType::Void) err(L, "const of type void");
        if (is_int(in.type) && in.imm.kind != Operand::Kind::ImmInt)
          err(L, "const " + std::string(type_name(in.type)) + " needs an integer literal");
        if (is_float(in.type) && in.imm.kind != Operand::Kind::ImmFloat)
          err(L, "const " + std::string(type_name(in.type)) + " needs a float literal");
        if (in.type == IrType::Ptr && in.imm.kind != Operand::Kind::NullPtr)
          err(L, "const ptr supports only null");
        break;
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul:
      case Opcode::Sdiv:
      case Opcode::Srem:
        require_result(in, L);
        if (!is_int(in.type))
          err(L, std::string(opcode_name(in.op)) + " needs an integer type");
        for (const auto& a : in.args)
          check_value_operand(bi, pos, L, a, in.type, opcode_name(in.op));
        break;
      case Opcode::Fadd:
      case Opcode::Fsub:
      case Opcode::Fmul:
      case Opcode::Fdiv:
        require_result(in, L);
        if (!is_float(in.type))
          err(L, std::string(opcode_name(in.op)) + " needs a float type");
        for (const auto& a : in.args)
          check_value_operand(bi, pos, L, a, in.type, opcode_name(in.op));
        break;
      case Opcode::Icmp:
      case Opcode::Fcmp: {
        require_result(in, L);
        bool fc = in.op == Opcode::Fcmp;
        if (!valid_pred(in.pred, fc))
          err(L, "bad " + std::string(opcode_name(in.op)) + " predicate '" + in.pred + "'");
        if (fc ? !is_float(in.type) : !is_int(in.type))
          err(L, std::string(opcode_name(in.op)) + " operand type mismatch");
        for (const auto& a : in.args)
          check_value_operand(bi, pos, L, a, in.type, opcode_name(in.op));
        break;
      }
      case Opcode::Zext:
      case Opcode::Trunc: {
        require_result(in, L);
        bool same_kind = (is_int(in.type) && is_int(in.to_type)) ||
                         (is_float(in.type) && is_float(in.to_type));
        if (!same_kind)
          err(L, std::string(opcode_name(in.op)) + " must stay within int or float types");
        else if (in.op == Opcode::Zext && type_rank(in.type) >= type_rank(in.to_type))
          err(L, "zext must widen");
        else if (in.op == Opcode::Trunc && type_rank(in.type) <= type_rank(in.to_type))
          err(L, "trunc must narrow");
        check_value_operand(bi, pos, L, in.args[0], in.type, opcode_name(in.op));
        break;
      }
      case Opcode::Sitofp:
        require_result(in, L);
        if (!is_int(in.type) || !is_float(in.to_type)) err(L, "sitofp is int -> float");
        check_value_operand(bi, pos, L, in.args[0], in.type, "sitofp");
        break;
      case Opcode::Fptosi:
        require_result(in, L);
        if (!is_float(in.type) || !is_int(in.to_type)) err(L, "fptosi is float -> int");
        check_value_operand(bi, pos, L, in.args[0], in.type, "fptosi");
        break;
      case Opcode::SlotAddr:
        require_result(in, L);
        if (f_.slot_index(in.slot) < 0)
          err(L, "slot_addr of unknown slot %" + in.slot);
        break;
      case Opcode::Load:
        require_result(in, L);
        if (in.type == IrType::Void) err(L, "load of type void");
        check_address_operand(bi, pos, L, in.args[0], in.type, "load");
        break;
      case Opcode::Store:
        forbid_result(in, L);
        if (in.type == IrType::Void) err(L, "store of type void");
        check_value_operand(bi, pos, L, in.args[0], in.type, "store value");
        check_address_operand(bi, pos, L, in.args[1], in.type, "store");
        break;
      case Opcode::Call:
        check_call(bi, pos, in);
        break;
      case Opcode::Icall: {
        if (in.args.empty()) {
          err(L, "icall lacks a callee operand");
          break;
        }
        check_use(bi, pos, L, in.args[0], IrType::Ptr, "icall callee");
        if (in.args[0].kind != Operand::Kind::Reg)
          err(L, "icall callee must be a ptr register");
        for (size_t i = 1; i < in.args.size(); ++i) {
          if (in.args[i].kind != Operand::Kind::Reg)
            err(L, "icall arguments must be registers");
          else
            check_use(bi, pos, L, in.args[i], IrType::Void, "icall argument");
        }
        if (in.type == IrType::Void && in.has_result())
          err(L, "icall -> void produces no value");
        break;
      }
      case Opcode::AddrOfFunc: {
        require_result(in, L);
        const Function* t = m_.find_function(in.callee);
        if (!t) {
          err(L, "addr_of unknown function @" + in.callee);
        } else if (in.tag_ctrl >= 0 && !t->fuse_map) {
          err(L, "tagged addr_of target @" + in.callee + " is not a fused function");
        }
        break;
      }
      case Opcode::Print:
        forbid_result(in, L);
        if (!is_int(in.type) && !is_float(in.type))
          err(L, "print supports int and float values");
        check_value_operand(bi, pos, L, in.args[0], in.type, "print");
        break;
      case Opcode::Setjmp:
        if (in.args[0].kind != Operand::Kind::Reg)
          err(L, "setjmp needs a ptr register");
        else
          check_use(bi, pos, L, in.args[0], IrType::Ptr, "setjmp");
        break;
      case Opcode::Longjmp:
        forbid_result(in, L);
        if (in.args[0].kind != Operand::Kind::Reg)
          err(L, "longjmp needs a ptr register");
        else
          check_use(bi, pos, L, in.args[0], IrType::Ptr, "longjmp");
        check_value_operand(bi, pos, L, in.args[1], IrType::I32, "longjmp value");
        break;
      case Opcode::MayThrow:
        forbid_result(in, L);
        check_value_operand(bi, pos, L, in.args[0], IrType::I1, "may_throw");
        check_label(L, in.handler, "may_throw");
        break;
    }
  }

  void check_call(int bi, int pos, const Instruction& in) {
    const std::string& L = f_.blocks[bi].label;
    const Function* callee = m_.find_function(in.callee);
    if (!callee) {
      err(L, "call to unknown function @" + in.callee);
      return;
    }
    if (in.type != callee->ret_type)
      err(L, "call @" + in.callee + " return-type annotation is stale");
    if (callee->ret_type == IrType::Void && in.has_result())
      err(L, "call to void function @" + in.callee + " produces no value");
    size_t fixed = callee->params.size();
    if (in.args.size() < fixed || (!callee->is_variadic && in.args.size() != fixed)) {
      err(L, "call @" + in.callee + " expects " + std::to_string(fixed) +
                 (callee->is_variadic ? "+" : "") + " arguments, got " +
                 std::to_string(in.args.size()));
      return;
    }
    for (size_t i = 0; i < in.args.size(); ++i) {
      IrType want = i < fixed ? callee->params[i].type : IrType::Void;
      if (want == IrType::Void) {
        // Variadic extras: any typed register or literal.
        if (in.args[i].kind == Operand::Kind::Reg)
          check_use(bi, pos, L, in.args[i], IrType::Void, "call argument");
      } else {
        check_value_operand(bi, pos, L, in.args[i], want, "call argument");
      }
    }
  }

  void check_term(int bi) {
    const BasicBlock& b = f_.blocks[bi];
    const Terminator& t = b.term;
    const std::string& L = b.label;
    int pos = kIsTerm;
    switch (t.kind) {
      case TermKind::Br:
        check_label(L, t.targets[0], "br");
        break;
      case TermKind::CondBr:
        if (t.value.kind != Operand::Kind::Reg)
          err(L, "condbr condition must be an i1 register");
        else
          check_use(bi, pos, L, t.value, IrType::I1, "condbr");
        for (const auto& tgt : t.targets) check_label(L, tgt, "condbr");
        break;
      case TermKind::Switch: {
        if (!is_int(t.type)) err(L, "switch scrutinee must be an integer");
        if (t.value.kind != Operand::Kind::Reg)
          err(L, "switch scrutinee must be a register");
        else
          check_use(bi, pos, L, t.value, t.type, "switch");
        std::set<int64_t> seen;
        for (const auto& c : t.cases) {
          if (!seen.insert(normalize_int(c.value, t.type)).second)
            err(L, "duplicate switch case " + std::to_string(c.value));
          check_label(L, c.target, "switch case");
        }
        check_label(L, t.default_target, "switch default");
        break;
      }
      case TermKind::Ret:
        if (f_.ret_type == IrType::Void) {
          if (t.has_value) err(L, "ret with a value in a void function");
        } else if (!t.has_value) {
          err(L, "ret without a value in a non-void function");
        } else {
          if (t.type != f_.ret_type)
            err(L, "ret type " + std::string(type_name(t.type)) +
                       " does not match function return type " +
                       type_name(f_.ret_type));
          check_value_operand(bi, pos, L, t.value, f_.ret_type, "ret");
        }
        break;
    }
  }

  void check_fuse_map() {
    if (!f_.fuse_map) return;
    if (f_.params.empty() || f_.params[0].type != IrType::I1) {
      err("", "fused function must take ctrl: i1 as its first parameter");
      return;
    }
    int merged = static_cast<int>(f_.params.size()) - 1;
    for (const std::vector<int>* side : {&f_.fuse_map->left, &f_.fuse_map->right}) {
      std::set<int> seen;
      for (int ix : *side) {
        if (ix < 0 || ix >= merged)
          err("", "fusemap index " + std::to_string(ix) + " out of range");
        else if (!seen.insert(ix).second)
          err("", "fusemap maps two parameters to slot " + std::to_string(ix));
      }
    }
  }
};

}  // namespace

std::vector<Violation> validate(const IrModule& m) {
  std::vector<Violation> out;
  if (m.name.empty()) out.push_back({"", "", "module has no name"});

  std::set<std::string> fnames;
  for (const auto& f : m.functions)
    if (!fnames.insert(f.name).second)
      out.push_back({"", "", "duplicate function @" + f.name});
  std::set<std::string> gnames;
  for (const auto& g : m.globals) {
    if (!gnames.insert(g.name).second)
      out.push_back({"", "", "duplicate global @" + g.name});
    bool ok = (is_int(g.type) && g.init.kind == Operand::Kind::ImmInt) ||
              (is_float(g.type) && g.init.kind == Operand::Kind::ImmFloat) ||
              (g.type == IrType::Ptr && g.init.kind == Operand::Kind::NullPtr);
    if (!ok)
      out.push_back({"", "", "global @" + g.name + " initializer does not match its type"});
  }
  for (const auto& e : m.exported)
    if (!fnames.count(e)) out.push_back({"", "", "export of unknown function @" + e});
  for (const auto& v : m.visible_ptrs)
    if (!fnames.count(v))
      out.push_back({"", "", "visible_ptr of unknown function @" + v});

  for (const auto& f : m.functions) {
    if (f.is_external) continue;
    if (f.blocks.empty()) {
      out.push_back({f.name, "", "function has no blocks"});
      continue;
    }
    FunctionChecker(m, f, out).run();
  }
  return out;
}

}  // namespace irobf
