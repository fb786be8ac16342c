#include "irobf/interp.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "irobf/printer.hpp"

namespace irobf {

const char* trap_name(TrapKind k) {
  switch (k) {
    case TrapKind::None: return "none";
    case TrapKind::NullDeref: return "null-deref";
    case TrapKind::DivByZero: return "div-by-zero";
    case TrapKind::Unreachable: return "unreachable";
    case TrapKind::StepLimit: return "step-limit";
    case TrapKind::BadIcallTarget: return "bad-icall-target";
  }
  return "?";
}

Value Value::make_int(int64_t v, IrType t) {
  Value out;
  out.kind = Kind::Int;
  out.i = normalize_int(v, t);
  return out;
}

Value Value::make_float(double v, IrType t) {
  Value out;
  out.kind = Kind::Float;
  out.f = t == IrType::F32 ? static_cast<double>(static_cast<float>(v)) : v;
  return out;
}

Value Value::null() {
  Value out;
  out.kind = Kind::Ptr;
  out.space = Space::Null;
  return out;
}

std::string format_value(const IrModule& m, const Value& v) {
  switch (v.kind) {
    case Value::Kind::Int:
      return std::to_string(v.i);
    case Value::Kind::Float:
      return format_float(v.f);
    case Value::Kind::Ptr:
      if (v.space == Value::Space::Func) {
        int64_t ord = (v.bits & ~(kTagFused | kTagCtrl)) / kFunctionAlign;
        if (ord >= 0 && ord < static_cast<int64_t>(m.functions.size()))
          return "@" + m.functions[ord].name;
      }
      return v.space == Value::Space::Null ? "null" : "ptr";
  }
  return "?";
}

namespace {

bool is_int_type(IrType t) {
  switch (t) {
    case IrType::I1:
    case IrType::I8:
    case IrType::I16:
    case IrType::I32:
    case IrType::I64:
      return true;
    default:
      return false;
  }
}

bool is_float_type(IrType t) { return t == IrType::F32 || t == IrType::F64; }

Value zero_of(IrType t) {
  if (is_float_type(t)) return Value::make_float(0.0, t);
  if (t == IrType::Ptr) return Value::null();
  return Value::make_int(0, t);
}

enum Pred { kEq, kNe, kLt, kLe, kGt, kGe };

int encode_pred(const std::string& p) {
  if (p == "eq" || p == "oeq") return kEq;
  if (p == "ne" || p == "one") return kNe;
  if (p == "slt" || p == "olt") return kLt;
  if (p == "sle" || p == "ole") return kLe;
  if (p == "sgt" || p == "ogt") return kGt;
  return kGe;
}

struct COperand {
  enum class K : uint8_t { Reg, Int, Float, Null, Global } k = K::Int;
  int idx = -1;     // Reg: dense register; Global: global index
  int64_t i = 0;
  double f = 0.0;
};

struct CInst {
  Opcode op;
  IrType type = IrType::Void;     // primary type annotation
  IrType to_type = IrType::Void;  // cast destination
  int result = -1;                // dense register or -1
  int pred = 0;
  int slot = -1;      // slot_addr
  int callee = -1;    // call/addr_of: function ordinal
  int handler = -1;   // may_throw: handler block index
  int tag_ctrl = -1;  // addr_of tag
  bool tag_checked = false;
  std::vector<COperand> args;
  const Instruction* src = nullptr;
};

struct CTerm {
  TermKind kind = TermKind::Ret;
  bool has_value = false;
  IrType type = IrType::Void;
  COperand value;
  int t0 = -1, t1 = -1;  // br target / condbr pair
  std::vector<std::pair<int64_t, int>> cases;
  int dflt = -1;
};

struct CBlock {
  std::vector<CInst> insts;
  CTerm term;
};

}  // namespace

struct Interp::Impl {
  const IrModule* m;

  struct CFn {
    const Function* src = nullptr;
    bool external = true;
    int n_regs = 0;
    std::vector<IrType> param_types;
    std::vector<IrType> slot_types;
    std::vector<CBlock> blocks;
  };

  std::vector<CFn> fns;
  std::map<std::string, int> fn_index;
  std::vector<Value> global_init;

  explicit Impl(const IrModule& mod) : m(&mod) {
    for (size_t i = 0; i < mod.functions.size(); ++i)
      fn_index[mod.functions[i].name] = static_cast<int>(i);
    for (const auto& g : mod.globals) {
      Value v = zero_of(g.type);
      if (g.init.kind == Operand::Kind::ImmInt)
        v = Value::make_int(g.init.ival, g.type);
      else if (g.init.kind == Operand::Kind::ImmFloat)
        v = Value::make_float(g.init.fval, g.type);
      global_init.push_back(v);
    }
    fns.reserve(mod.functions.size());
    for (const auto& f : mod.functions) fns.push_back(compile(f));
  }

  CFn compile(const Function& f) const {
    CFn cf;
    cf.src = &f;
    cf.external = f.is_external;
    for (const auto& p : f.params) cf.param_types.push_back(p.type);
    for (const auto& s : f.slots) cf.slot_types.push_back(s.type);
    if (f.is_external) return cf;

    std::map<std::string, int> regs;
    for (const auto& p : f.params)
      regs.emplace(p.name, static_cast<int>(regs.size()));
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.has_result()) regs.emplace(in.result, static_cast<int>(regs.size()));
    cf.n_regs = static_cast<int>(regs.size());

    auto operand = [&](const Operand& o) {
      COperand c;
      switch (o.kind) {
        case Operand::Kind::Reg:
          c.k = COperand::K::Reg;
          c.idx = regs.at(o.name);
          break;
        case Operand::Kind::ImmInt:
          c.k = COperand::K::Int;
          c.i = o.ival;
          break;
        case Operand::Kind::ImmFloat:
          c.k = COperand::K::Float;
          c.f = o.fval;
          break;
        case Operand::Kind::NullPtr:
          c.k = COperand::K::Null;
          break;
        case Operand::Kind::Global:
          c.k = COperand::K::Global;
          c.idx = m->global_index(o.name);
          break;
      }
      return c;
    };

    for (const auto& b : f.blocks) {
      CBlock cb;
      for (const auto& in : b.insts) {
        CInst ci;
        ci.op = in.op;
        ci.type = in.type;
        ci.to_type = in.to_type;
        ci.src = &in;
        if (in.has_result()) ci.result = regs.at(in.result);
        if (!in.pred.empty()) ci.pred = encode_pred(in.pred);
        if (!in.slot.empty()) ci.slot = f.slot_index(in.slot);
        if (!in.callee.empty()) ci.callee = m->function_ordinal(in.callee);
        if (!in.handler.empty()) ci.handler = f.block_index(in.handler);
        ci.tag_ctrl = in.tag_ctrl;
        ci.tag_checked = in.tag_checked;
        if (in.op == Opcode::Const) ci.args.push_back(operand(in.imm));
        for (const auto& a : in.args) ci.args.push_back(operand(a));
        cb.insts.push_back(std::move(ci));
      }
      const Terminator& t = b.term;
      CTerm ct;
      ct.kind = t.kind;
      ct.has_value = t.has_value;
      ct.type = t.type;
      if (t.kind == TermKind::CondBr || t.kind == TermKind::Switch ||
          (t.kind == TermKind::Ret && t.has_value))
        ct.value = operand(t.value);
      if (t.kind == TermKind::Br) ct.t0 = f.block_index(t.targets[0]);
      if (t.kind == TermKind::CondBr) {
        ct.t0 = f.block_index(t.targets[0]);
        ct.t1 = f.block_index(t.targets[1]);
      }
      if (t.kind == TermKind::Switch) {
        for (const auto& c : t.cases)
          ct.cases.push_back({c.value, f.block_index(c.target)});
        ct.dflt = f.block_index(t.default_target);
      }
      cb.term = std::move(ct);
      cf.blocks.push_back(std::move(cb));
    }
    return cf;
  }
};

namespace {

struct Frame {
  int fn = -1;
  int block = 0;
  size_t ip = 0;
  int ret_reg = -1;       // caller register for the return value
  IrType ret_as = IrType::Void;  // type the caller's call site expects
  int64_t serial = 0;
  std::vector<Value> regs;
  std::vector<Value> slots;
  // Deep-fusion neutrality snapshot for the current block, if any.
  bool has_snapshot = false;
  std::string snapshot_key;
  std::vector<Value> snapshot;
};

struct JumpPoint {
  size_t frame_depth = 0;
  int64_t serial = 0;
  int block = 0;
  size_t resume_ip = 0;
  int result_reg = -1;
};

bool value_eq(const Value& a, const Value& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Value::Kind::Int: return a.i == b.i;
    case Value::Kind::Float:
      return a.f == b.f || (std::isnan(a.f) && std::isnan(b.f));
    case Value::Kind::Ptr:
      return a.space == b.space && a.frame_depth == b.frame_depth &&
             a.frame_serial == b.frame_serial && a.index == b.index &&
             a.bits == b.bits;
  }
  return false;
}

struct Machine {
  const Interp::Impl& M;
  RunLimits lim;
  const CheckSpec* checks = nullptr;
  CheckReport* report = nullptr;

  ExecResult res;
  std::vector<Frame> frames;
  std::vector<Value> globals;
  std::vector<JumpPoint> jumps;
  int64_t next_serial = 1;

  explicit Machine(const Interp::Impl& impl) : M(impl), globals(impl.global_init) {}

  std::string loc() const {
    if (frames.empty()) return "";
    const Frame& fr = frames.back();
    const auto& cf = M.fns[fr.fn];
    return cf.src->name + ":" + cf.src->blocks[fr.block].label;
  }

  bool trap(TrapKind k) {
    res.trap = k;
    res.trap_location = loc();
    return false;
  }

  void violation(const std::string& msg) {
    if (report) report->violations.push_back(msg);
  }

  Value eval(const Frame& fr, const COperand& o) const {
    switch (o.k) {
      case COperand::K::Reg: return fr.regs[o.idx];
      case COperand::K::Int: {
        Value v;
        v.kind = Value::Kind::Int;
        v.i = o.i;
        return v;
      }
      case COperand::K::Float: {
        Value v;
        v.kind = Value::Kind::Float;
        v.f = o.f;
        return v;
      }
      case COperand::K::Null: return Value::null();
      case COperand::K::Global: {
        Value v = Value::null();
        v.space = Value::Space::Global;
        v.index = o.idx;
        return v;
      }
    }
    return {};
  }

  // Memory cells behind a pointer value. Returns nullptr (after setting the
  // trap) when the pointer is null, dangling or not data memory.
  Value* cell(const Value& p, IrType* cell_type) {
    if (p.kind != Value::Kind::Ptr) {
      trap(TrapKind::NullDeref);
      return nullptr;
    }
    switch (p.space) {
      case Value::Space::Global:
        if (p.index < 0 || p.index >= static_cast<int>(globals.size())) break;
        *cell_type = M.m->globals[p.index].type;
        return &globals[p.index];
      case Value::Space::Slot: {
        if (p.frame_depth < 0 ||
            p.frame_depth >= static_cast<int>(frames.size()))
          break;
        Frame& owner = frames[p.frame_depth];
        if (owner.serial != p.frame_serial) break;  // dangling
        if (p.index < 0 || p.index >= static_cast<int>(owner.slots.size()))
          break;
        *cell_type = M.fns[owner.fn].slot_types[p.index];
        return &owner.slots[p.index];
      }
      default:
        break;
    }
    trap(TrapKind::NullDeref);
    return nullptr;
  }

  // Coerce a raw value into a cell/annotation type; kind mismatches are
  // memory-safety violations.
  bool coerce(Value& v, IrType t) {
    if (is_int_type(t)) {
      if (v.kind != Value::Kind::Int) return trap(TrapKind::NullDeref);
      v.i = normalize_int(v.i, t);
    } else if (is_float_type(t)) {
      if (v.kind != Value::Kind::Float) return trap(TrapKind::NullDeref);
      if (t == IrType::F32) v.f = static_cast<double>(static_cast<float>(v.f));
    } else if (t == IrType::Ptr) {
      if (v.kind != Value::Kind::Ptr) return trap(TrapKind::NullDeref);
    }
    return true;
  }

  void snapshot_block_entry(Frame& fr) {
    if (!checks || checks->neutral_blocks.empty()) return;
    const auto& cf = M.fns[fr.fn];
    std::string key = cf.src->name + ":" + cf.src->blocks[fr.block].label;
    if (checks->neutral_blocks.count(key)) {
      fr.has_snapshot = true;
      fr.snapshot_key = key;
      fr.snapshot = globals;
    } else {
      fr.has_snapshot = false;
    }
  }

  void check_block_exit(Frame& fr) {
    if (!fr.has_snapshot) return;
    fr.has_snapshot = false;
    if (fr.snapshot.size() != globals.size()) {
      violation("globals resized inside neutral block " + fr.snapshot_key);
      return;
    }
    for (size_t i = 0; i < globals.size(); ++i)
      if (!value_eq(fr.snapshot[i], globals[i])) {
        violation("neutral block " + fr.snapshot_key + " changed global @" +
                  M.m->globals[i].name);
        return;
      }
  }

  bool push_frame(int fn, std::vector<Value> args, int ret_reg, IrType ret_as) {
    if (static_cast<int>(frames.size()) >= lim.max_call_depth)
      return trap(TrapKind::StepLimit);
    const auto& cf = M.fns[fn];
    if (cf.external) return trap(TrapKind::Unreachable);
    Frame fr;
    fr.fn = fn;
    fr.ret_reg = ret_reg;
    fr.ret_as = ret_as;
    fr.serial = next_serial++;
    fr.regs.assign(cf.n_regs, Value{});
    for (size_t i = 0; i < args.size(); ++i) fr.regs[i] = args[i];
    fr.slots.reserve(cf.slot_types.size());
    for (IrType t : cf.slot_types) fr.slots.push_back(zero_of(t));
    frames.push_back(std::move(fr));
    snapshot_block_entry(frames.back());
    return true;
  }

  // Direct (untagged) indirect-call dispatch.
  bool dispatch_plain(int64_t addr, const CInst& in, const Frame& fr) {
    if (addr % kFunctionAlign != 0) return trap(TrapKind::BadIcallTarget);
    int64_t ord = addr / kFunctionAlign;
    if (ord < 0 || ord >= static_cast<int64_t>(M.fns.size()))
      return trap(TrapKind::BadIcallTarget);
    const auto& target = M.fns[ord];
    const size_t argc = in.args.size() - 1;
    if (target.param_types.size() != argc || target.src->is_variadic)
      return trap(TrapKind::BadIcallTarget);
    if (target.src->ret_type != in.type) return trap(TrapKind::BadIcallTarget);
    std::vector<Value> args(argc);
    for (size_t i = 0; i < argc; ++i) {
      args[i] = eval(fr, in.args[i + 1]);
      IrType pt = target.param_types[i];
      bool kind_ok = (is_int_type(pt) && args[i].kind == Value::Kind::Int) ||
                     (is_float_type(pt) && args[i].kind == Value::Kind::Float) ||
                     (pt == IrType::Ptr && args[i].kind == Value::Kind::Ptr);
      if (!kind_ok) return trap(TrapKind::BadIcallTarget);
      if (is_int_type(pt)) args[i].i = normalize_int(args[i].i, pt);
    }
    return push_frame(static_cast<int>(ord), std::move(args), in.result,
                      in.type);
  }

  // Tag-checked dispatch into a fused function: place arguments by the
  // callee-side placement map, zero-fill the rest, set ctrl.
  bool dispatch_fused(int64_t addr, bool ctrl, const CInst& in,
                      const Frame& fr) {
    if (addr % kFunctionAlign != 0) return trap(TrapKind::BadIcallTarget);
    int64_t ord = addr / kFunctionAlign;
    if (ord < 0 || ord >= static_cast<int64_t>(M.fns.size()))
      return trap(TrapKind::BadIcallTarget);
    const auto& target = M.fns[ord];
    if (target.external || !target.src->fuse_map)
      return trap(TrapKind::BadIcallTarget);
    const auto& side = ctrl ? target.src->fuse_map->right
                            : target.src->fuse_map->left;
    const size_t argc = in.args.size() - 1;
    if (side.size() != argc) return trap(TrapKind::BadIcallTarget);

    std::vector<Value> args(target.param_types.size());
    for (size_t i = 0; i < args.size(); ++i) args[i] = zero_of(target.param_types[i]);
    args[0] = Value::make_int(ctrl ? 1 : 0, IrType::I1);
    for (size_t i = 0; i < argc; ++i) {
      Value v = eval(fr, in.args[i + 1]);
      size_t merged = static_cast<size_t>(side[i]) + 1;  // skip ctrl
      if (merged >= args.size()) return trap(TrapKind::BadIcallTarget);
      IrType pt = target.param_types[merged];
      bool kind_ok = (is_int_type(pt) && v.kind == Value::Kind::Int) ||
                     (is_float_type(pt) && v.kind == Value::Kind::Float) ||
                     (pt == IrType::Ptr && v.kind == Value::Kind::Ptr);
      if (!kind_ok) return trap(TrapKind::BadIcallTarget);
      // Merged parameters are at least as wide as the side's original ones,
      // and the adapter block narrows back before use, so the value passes
      // through unchanged: any extension choice round-trips exactly.
      args[merged] = v;
    }
    return push_frame(static_cast<int>(ord), std::move(args), in.result,
                      in.type);
  }

  bool exec_inst(const CInst& in) {
    Frame& fr = frames.back();
    switch (in.op) {
      case Opcode::Const: {
        const COperand& c = in.args[0];
        fr.regs[in.result] = c.k == COperand::K::Float
                                 ? Value::make_float(c.f, in.type)
                             : c.k == COperand::K::Null
                                 ? Value::null()
                                 : Value::make_int(c.i, in.type);
        return true;
      }
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul: {
        int64_t a = eval(fr, in.args[0]).i, b = eval(fr, in.args[1]).i;
        uint64_t ua = static_cast<uint64_t>(a), ub = static_cast<uint64_t>(b);
        uint64_t r = in.op == Opcode::Add   ? ua + ub
                     : in.op == Opcode::Sub ? ua - ub
                                            : ua * ub;
        fr.regs[in.result] = Value::make_int(static_cast<int64_t>(r), in.type);
        return true;
      }
      case Opcode::Sdiv:
      case Opcode::Srem: {
        int64_t a = eval(fr, in.args[0]).i, b = eval(fr, in.args[1]).i;
        if (b == 0) return trap(TrapKind::DivByZero);
        int64_t r;
        if (a == INT64_MIN && b == -1)
          r = in.op == Opcode::Sdiv ? a : 0;  // wrap, like the narrower widths
        else
          r = in.op == Opcode::Sdiv ? a / b : a % b;
        fr.regs[in.result] = Value::make_int(r, in.type);
        return true;
      }
      case Opcode::Icmp: {
        int64_t a = eval(fr, in.args[0]).i, b = eval(fr, in.args[1]).i;
        bool r = in.pred == kEq   ? a == b
                 : in.pred == kNe ? a != b
                 : in.pred == kLt ? a < b
                 : in.pred == kLe ? a <= b
                 : in.pred == kGt ? a > b
                                  : a >= b;
        fr.regs[in.result] = Value::make_int(r, IrType::I1);
        return true;
      }
      case Opcode::Fadd:
      case Opcode::Fsub:
      case Opcode::Fmul:
      case Opcode::Fdiv: {
        double a = eval(fr, in.args[0]).f, b = eval(fr, in.args[1]).f;
        double r = in.op == Opcode::Fadd   ? a + b
                   : in.op == Opcode::Fsub ? a - b
                   : in.op == Opcode::Fmul ? a * b
                                           : a / b;  // IEEE: /0.0 gives inf
        fr.regs[in.result] = Value::make_float(r, in.type);
        return true;
      }
      case Opcode::Fcmp: {
        double a = eval(fr, in.args[0]).f, b = eval(fr, in.args[1]).f;
        bool r = in.pred == kEq   ? a == b
                 : in.pred == kNe ? a != b
                 : in.pred == kLt ? a < b
                 : in.pred == kLe ? a <= b
                 : in.pred == kGt ? a > b
                                  : a >= b;
        fr.regs[in.result] = Value::make_int(r, IrType::I1);
        return true;
      }
      case Opcode::Zext: {
        int64_t v = eval(fr, in.args[0]).i;
        uint64_t mask = int_bits(in.type) >= 64
                            ? ~0ull
                            : (1ull << int_bits(in.type)) - 1;
        fr.regs[in.result] = Value::make_int(
            static_cast<int64_t>(static_cast<uint64_t>(v) & mask), in.to_type);
        return true;
      }
      case Opcode::Trunc: {
        fr.regs[in.result] =
            Value::make_int(eval(fr, in.args[0]).i, in.to_type);
        return true;
      }
      case Opcode::Sitofp: {
        fr.regs[in.result] = Value::make_float(
            static_cast<double>(eval(fr, in.args[0]).i), in.to_type);
        return true;
      }
      case Opcode::Fptosi: {
        double v = eval(fr, in.args[0]).f;
        int64_t r;
        if (std::isnan(v))
          r = 0;
        else if (v >= 9223372036854775807.0)
          r = INT64_MAX;
        else if (v <= -9223372036854775808.0)
          r = INT64_MIN;
        else
          r = static_cast<int64_t>(v);
        fr.regs[in.result] = Value::make_int(r, in.to_type);
        return true;
      }
      case Opcode::SlotAddr: {
        Value p = Value::null();
        p.space = Value::Space::Slot;
        p.frame_depth = static_cast<int32_t>(frames.size() - 1);
        p.frame_serial = fr.serial;
        p.index = in.slot;
        fr.regs[in.result] = p;
        return true;
      }
      case Opcode::Load: {
        Value addr = eval(fr, in.args[0]);
        IrType ct;
        Value* c = cell(addr, &ct);
        if (!c) return false;
        Value v = *c;
        if (!coerce(v, in.type)) return false;
        frames.back().regs[in.result] = v;
        return true;
      }
      case Opcode::Store: {
        Value v = eval(fr, in.args[0]);
        Value addr = eval(fr, in.args[1]);
        IrType ct;
        Value* c = cell(addr, &ct);
        if (!c) return false;
        if (!coerce(v, ct)) return false;
        *c = v;
        return true;
      }
      case Opcode::Call: {
        if (in.callee < 0) return trap(TrapKind::Unreachable);
        const auto& target = M.fns[in.callee];
        std::vector<Value> args(in.args.size());
        for (size_t i = 0; i < in.args.size(); ++i) {
          args[i] = eval(fr, in.args[i]);
          if (i < target.param_types.size() &&
              !coerce(args[i], target.param_types[i]))
            return false;
        }
        return push_frame(in.callee, std::move(args), in.result, in.type);
      }
      case Opcode::Icall: {
        Value cal = eval(fr, in.args[0]);
        if (cal.kind != Value::Kind::Ptr) return trap(TrapKind::BadIcallTarget);
        if (cal.space != Value::Space::Func)
          return trap(TrapKind::BadIcallTarget);
        int64_t bits = cal.bits;
        bool fused = (bits & kTagFused) != 0;
        bool ctrl = (bits & kTagCtrl) != 0;
        int64_t addr = bits & ~(kTagFused | kTagCtrl);
        if (!in.tag_checked) {
          // A raw jump through a tagged pointer lands between functions.
          if (fused) {
            if (checks && checks->tag_hygiene)
              violation("untagged call site reached tagged pointer at " + loc());
            return trap(TrapKind::BadIcallTarget);
          }
          return dispatch_plain(addr, in, fr);
        }
        if (!fused) {
          if (ctrl) return trap(TrapKind::BadIcallTarget);
          return dispatch_plain(addr, in, fr);
        }
        return dispatch_fused(addr, ctrl, in, fr);
      }
      case Opcode::AddrOfFunc: {
        Value p = Value::null();
        p.space = Value::Space::Func;
        int64_t addr = static_cast<int64_t>(in.callee) * kFunctionAlign;
        p.bits = in.tag_ctrl < 0 ? addr : encode_tagged(addr, in.tag_ctrl != 0);
        fr.regs[in.result] = p;
        return true;
      }
      case Opcode::Print: {
        Value v = eval(fr, in.args[0]);
        res.output_trace.push_back(v.kind == Value::Kind::Float
                                       ? format_float(v.f)
                                       : std::to_string(v.i));
        return true;
      }
      case Opcode::Setjmp: {
        Value addr = eval(fr, in.args[0]);
        IrType ct;
        Value* c = cell(addr, &ct);
        if (!c) return false;
        JumpPoint jp;
        jp.frame_depth = frames.size() - 1;
        jp.serial = fr.serial;
        jp.block = fr.block;
        jp.resume_ip = fr.ip;  // ip already advanced past this instruction
        jp.result_reg = in.result;
        jumps.push_back(jp);
        Value token = Value::make_int(static_cast<int64_t>(jumps.size()), ct);
        if (!coerce(token, ct)) return false;
        *c = token;
        frames.back().regs[in.result] = Value::make_int(0, IrType::I32);
        return true;
      }
      case Opcode::Longjmp: {
        Value addr = eval(fr, in.args[0]);
        Value v = eval(fr, in.args[1]);
        IrType ct;
        Value* c = cell(addr, &ct);
        if (!c) return false;
        if (c->kind != Value::Kind::Int) return trap(TrapKind::NullDeref);
        int64_t token = c->i;
        if (token < 1 || token > static_cast<int64_t>(jumps.size()))
          return trap(TrapKind::NullDeref);
        const JumpPoint& jp = jumps[token - 1];
        if (jp.frame_depth >= frames.size() ||
            frames[jp.frame_depth].serial != jp.serial)
          return trap(TrapKind::NullDeref);  // target frame is gone
        int64_t rv = v.i == 0 ? 1 : v.i;
        frames.resize(jp.frame_depth + 1);
        Frame& target = frames.back();
        target.block = jp.block;
        target.ip = jp.resume_ip;
        target.has_snapshot = false;
        target.regs[jp.result_reg] = Value::make_int(rv, IrType::I32);
        return true;
      }
      case Opcode::MayThrow: {
        Value c = eval(fr, in.args[0]);
        if (c.i != 0) {
          check_block_exit(fr);
          fr.block = in.handler;
          fr.ip = 0;
          snapshot_block_entry(fr);
        }
        return true;
      }
    }
    return trap(TrapKind::Unreachable);
  }

  bool exec_term(const CTerm& t) {
    Frame& fr = frames.back();
    check_block_exit(fr);
    switch (t.kind) {
      case TermKind::Br:
        fr.block = t.t0;
        fr.ip = 0;
        snapshot_block_entry(fr);
        return true;
      case TermKind::CondBr: {
        bool taken = eval(fr, t.value).i != 0;
        if (report) {
          const auto& cf = M.fns[fr.fn];
          report->branch_outcomes[cf.src->name + ":" +
                                  cf.src->blocks[fr.block].label]
              .insert(taken);
        }
        fr.block = taken ? t.t0 : t.t1;
        fr.ip = 0;
        snapshot_block_entry(fr);
        return true;
      }
      case TermKind::Switch: {
        int64_t v = eval(fr, t.value).i;
        int target = t.dflt;
        for (const auto& [cv, tb] : t.cases)
          if (cv == v) {
            target = tb;
            break;
          }
        fr.block = target;
        fr.ip = 0;
        snapshot_block_entry(fr);
        return true;
      }
      case TermKind::Ret: {
        Value v{};
        bool has = t.has_value;
        if (has) v = eval(fr, t.value);
        const auto& cf = M.fns[fr.fn];
        if (checks) {
          auto it = checks->exit_ranges.find(cf.src->name);
          if (it != checks->exit_ranges.end()) {
            if (!has || v.kind != Value::Kind::Int || v.i < 0 ||
                v.i >= it->second)
              violation("exit selector out of range in " + cf.src->name);
          }
        }
        int ret_reg = fr.ret_reg;
        IrType ret_as = fr.ret_as;
        frames.pop_back();
        if (frames.empty()) {
          if (has && v.kind == Value::Kind::Int)
            res.exit_value = v.i;
          return false;  // normal termination
        }
        if (ret_reg >= 0) {
          if (!coerce(v, ret_as)) return false;
          frames.back().regs[ret_reg] = v;
        }
        return true;
      }
    }
    return trap(TrapKind::Unreachable);
  }

  ExecResult execute(int entry, std::vector<Value> args) {
    const auto& cf = M.fns[entry];
    if (!cf.external) {
      bool ok = args.size() == cf.param_types.size();
      for (size_t i = 0; ok && i < args.size(); ++i) {
        IrType pt = cf.param_types[i];
        ok = (is_int_type(pt) && args[i].kind == Value::Kind::Int) ||
             (is_float_type(pt) && args[i].kind == Value::Kind::Float) ||
             (pt == IrType::Ptr && args[i].kind == Value::Kind::Ptr);
        if (ok && is_int_type(pt)) args[i].i = normalize_int(args[i].i, pt);
        if (ok && pt == IrType::F32)
          args[i].f = static_cast<double>(static_cast<float>(args[i].f));
      }
      if (!ok) {
        res.trap = TrapKind::Unreachable;
        res.trap_location = cf.src->name;
        return res;
      }
    }
    if (!push_frame(entry, std::move(args), -1, IrType::Void)) return res;
    while (!frames.empty()) {
      if (++res.steps > lim.max_steps) {
        trap(TrapKind::StepLimit);
        break;
      }
      Frame& fr = frames.back();
      const auto& bb = M.fns[fr.fn].blocks[fr.block];
      if (fr.ip < bb.insts.size()) {
        const CInst& in = bb.insts[fr.ip++];
        if (!exec_inst(in)) break;
      } else {
        if (!exec_term(bb.term)) break;
      }
    }
    return res;
  }
};

}  // namespace

Interp::Interp(const IrModule& m) : impl_(std::make_unique<Impl>(m)) {}
Interp::~Interp() = default;
Interp::Interp(Interp&&) noexcept = default;
Interp& Interp::operator=(Interp&&) noexcept = default;

const IrModule& Interp::module() const { return *impl_->m; }

ExecResult Interp::run(const std::string& entry, const std::vector<Value>& args,
                       const RunLimits& limits) const {
  Machine mach(*impl_);
  mach.lim = limits;
  auto it = impl_->fn_index.find(entry);
  if (it == impl_->fn_index.end()) {
    mach.res.trap = TrapKind::Unreachable;
    mach.res.trap_location = entry;
    return mach.res;
  }
  return mach.execute(it->second, args);
}

ExecResult Interp::run_checked(const std::string& entry,
                               const std::vector<Value>& args,
                               const RunLimits& limits, const CheckSpec& checks,
                               CheckReport& report) const {
  Machine mach(*impl_);
  mach.lim = limits;
  mach.checks = &checks;
  mach.report = &report;
  auto it = impl_->fn_index.find(entry);
  if (it == impl_->fn_index.end()) {
    mach.res.trap = TrapKind::Unreachable;
    mach.res.trap_location = entry;
    return mach.res;
  }
  return mach.execute(it->second, args);
}

Value Interp::parse_typed_literal(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("expected type:value, got '" + text + "'");
  std::string ty = text.substr(0, colon), lit = text.substr(colon + 1);
  if (ty == "ptr") {
    if (lit != "null")
      throw std::invalid_argument("only 'ptr:null' is supported");
    return Value::null();
  }
  IrType t;
  if (ty == "i1") t = IrType::I1;
  else if (ty == "i8") t = IrType::I8;
  else if (ty == "i16") t = IrType::I16;
  else if (ty == "i32") t = IrType::I32;
  else if (ty == "i64") t = IrType::I64;
  else if (ty == "f32") t = IrType::F32;
  else if (ty == "f64") t = IrType::F64;
  else throw std::invalid_argument("unknown type '" + ty + "'");
  try {
    size_t pos = 0;
    if (t == IrType::F32 || t == IrType::F64) {
      double d = std::stod(lit, &pos);
      if (pos != lit.size()) throw std::out_of_range("");
      return Value::make_float(d, t);
    }
    int64_t v = std::stoll(lit, &pos);
    if (pos != lit.size()) throw std::out_of_range("");
    return Value::make_int(v, t);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad literal '" + text + "'");
  }
}

ExecResult run_module(const IrModule& m, const std::string& entry,
                      const std::vector<Value>& args, const RunLimits& limits) {
  return Interp(m).run(entry, args, limits);
}

}  // namespace irobf
