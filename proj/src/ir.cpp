#include "irobf/ir.hpp"

namespace irobf {

bool is_int(IrType t) {
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

bool is_float(IrType t) { return t == IrType::F32 || t == IrType::F64; }

int int_bits(IrType t) {
  switch (t) {
    case IrType::I1: return 1;
    case IrType::I8: return 8;
    case IrType::I16: return 16;
    case IrType::I32: return 32;
    case IrType::I64: return 64;
    default: return 0;
  }
}

int type_rank(IrType t) {
  switch (t) {
    case IrType::I1: return 1;
    case IrType::I8: return 2;
    case IrType::I16: return 3;
    case IrType::I32: return 4;
    case IrType::I64: return 5;
    case IrType::F32: return 1;
    case IrType::F64: return 2;
    default: return 0;
  }
}

const char* type_name(IrType t) {
  switch (t) {
    case IrType::Void: return "void";
    case IrType::I1: return "i1";
    case IrType::I8: return "i8";
    case IrType::I16: return "i16";
    case IrType::I32: return "i32";
    case IrType::I64: return "i64";
    case IrType::F32: return "f32";
    case IrType::F64: return "f64";
    case IrType::Ptr: return "ptr";
  }
  return "?";
}

std::optional<IrType> type_from_name(const std::string& s) {
  if (s == "void") return IrType::Void;
  if (s == "i1") return IrType::I1;
  if (s == "i8") return IrType::I8;
  if (s == "i16") return IrType::I16;
  if (s == "i32") return IrType::I32;
  if (s == "i64") return IrType::I64;
  if (s == "f32") return IrType::F32;
  if (s == "f64") return IrType::F64;
  if (s == "ptr") return IrType::Ptr;
  return std::nullopt;
}

int64_t normalize_int(int64_t v, IrType t) {
  int bits = int_bits(t);
  if (bits == 0 || bits == 64) return v;
  if (bits == 1) return v & 1;  // i1 is a plain boolean
  uint64_t u = static_cast<uint64_t>(v) & ((uint64_t{1} << bits) - 1);
  uint64_t sign = uint64_t{1} << (bits - 1);
  if (u & sign) u |= ~((uint64_t{1} << bits) - 1);
  return static_cast<int64_t>(u);
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::Const: return "const";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Mul: return "mul";
    case Opcode::Sdiv: return "sdiv";
    case Opcode::Srem: return "srem";
    case Opcode::Icmp: return "icmp";
    case Opcode::Fadd: return "fadd";
    case Opcode::Fsub: return "fsub";
    case Opcode::Fmul: return "fmul";
    case Opcode::Fdiv: return "fdiv";
    case Opcode::Fcmp: return "fcmp";
    case Opcode::Zext: return "zext";
    case Opcode::Trunc: return "trunc";
    case Opcode::Sitofp: return "sitofp";
    case Opcode::Fptosi: return "fptosi";
    case Opcode::SlotAddr: return "slot_addr";
    case Opcode::Load: return "load";
    case Opcode::Store: return "store";
    case Opcode::Call: return "call";
    case Opcode::Icall: return "icall";
    case Opcode::AddrOfFunc: return "addr_of";
    case Opcode::Print: return "print";
    case Opcode::Setjmp: return "setjmp";
    case Opcode::Longjmp: return "longjmp";
    case Opcode::MayThrow: return "may_throw";
  }
  return "?";
}

Operand Operand::reg(std::string n) {
  Operand o;
  o.kind = Kind::Reg;
  o.name = std::move(n);
  return o;
}

Operand Operand::imm_int(int64_t v) {
  Operand o;
  o.kind = Kind::ImmInt;
  o.ival = v;
  return o;
}

Operand Operand::imm_float(double v) {
  Operand o;
  o.kind = Kind::ImmFloat;
  o.fval = v;
  return o;
}

Operand Operand::null_ptr() {
  Operand o;
  o.kind = Kind::NullPtr;
  return o;
}

Operand Operand::global(std::string n) {
  Operand o;
  o.kind = Kind::Global;
  o.name = std::move(n);
  return o;
}

bool Operand::operator==(const Operand& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::Reg:
    case Kind::Global:
      return name == o.name;
    case Kind::ImmInt: return ival == o.ival;
    case Kind::ImmFloat: return fval == o.fval;
    case Kind::NullPtr: return true;
  }
  return false;
}

IrType result_type(const Instruction& in) {
  switch (in.op) {
    case Opcode::Const:
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::Sdiv:
    case Opcode::Srem:
    case Opcode::Fadd:
    case Opcode::Fsub:
    case Opcode::Fmul:
    case Opcode::Fdiv:
    case Opcode::Load:
    case Opcode::Call:  // return type cached here at build time
    case Opcode::Icall:
      return in.type;
    case Opcode::Icmp:
    case Opcode::Fcmp:
      return IrType::I1;
    case Opcode::Zext:
    case Opcode::Trunc:
    case Opcode::Sitofp:
    case Opcode::Fptosi:
      return in.to_type;
    case Opcode::SlotAddr:
    case Opcode::AddrOfFunc:
      return IrType::Ptr;
    case Opcode::Setjmp:
      return IrType::I32;
    default:
      return IrType::Void;
  }
}

std::vector<std::string> successor_edges(const BasicBlock& b) {
  std::vector<std::string> out;
  switch (b.term.kind) {
    case TermKind::Br:
    case TermKind::CondBr:
      out = b.term.targets;
      break;
    case TermKind::Switch:
      for (const auto& c : b.term.cases) out.push_back(c.target);
      out.push_back(b.term.default_target);
      break;
    case TermKind::Ret:
      break;
  }
  for (const auto& in : b.insts)
    if (in.op == Opcode::MayThrow) out.push_back(in.handler);
  return out;
}

const BasicBlock* Function::find_block(const std::string& label) const {
  for (const auto& b : blocks)
    if (b.label == label) return &b;
  return nullptr;
}

BasicBlock* Function::find_block(const std::string& label) {
  for (auto& b : blocks)
    if (b.label == label) return &b;
  return nullptr;
}

int Function::block_index(const std::string& label) const {
  for (size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].label == label) return static_cast<int>(i);
  return -1;
}

int Function::slot_index(const std::string& n) const {
  for (size_t i = 0; i < slots.size(); ++i)
    if (slots[i].name == n) return static_cast<int>(i);
  return -1;
}

int Function::param_index(const std::string& n) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == n) return static_cast<int>(i);
  return -1;
}

bool function_contains_setjmp(const Function& f) {
  for (const auto& b : f.blocks)
    for (const auto& in : b.insts)
      if (in.op == Opcode::Setjmp) return true;
  return false;
}

const Function* IrModule::find_function(const std::string& n) const {
  for (const auto& f : functions)
    if (f.name == n) return &f;
  return nullptr;
}

Function* IrModule::find_function(const std::string& n) {
  for (auto& f : functions)
    if (f.name == n) return &f;
  return nullptr;
}

int IrModule::function_ordinal(const std::string& n) const {
  for (size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == n) return static_cast<int>(i);
  return -1;
}

const GlobalVar* IrModule::find_global(const std::string& n) const {
  for (const auto& g : globals)
    if (g.name == n) return &g;
  return nullptr;
}

int IrModule::global_index(const std::string& n) const {
  for (size_t i = 0; i < globals.size(); ++i)
    if (globals[i].name == n) return static_cast<int>(i);
  return -1;
}

std::string IrModule::fresh_function_name(const std::string& base) const {
  if (!find_function(base)) return base;
  for (int i = 2;; ++i) {
    std::string cand = base + "." + std::to_string(i);
    if (!find_function(cand)) return cand;
  }
}

std::set<std::string> address_taken_functions(const IrModule& m) {
  std::set<std::string> out(m.visible_ptrs.begin(), m.visible_ptrs.end());
  for (const auto& f : m.functions)
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.op == Opcode::AddrOfFunc) out.insert(in.callee);
  return out;
}

int64_t function_address(const IrModule& m, const std::string& name) {
  int ord = m.function_ordinal(name);
  return ord < 0 ? -1 : static_cast<int64_t>(ord) * kFunctionAlign;
}

int64_t encode_tagged(int64_t addr, int ctrl) {
  return addr | kTagFused | (ctrl ? kTagCtrl : 0);
}

TaggedPtr decode_tagged(int64_t bits) {
  TaggedPtr t;
  t.is_fused = (bits & kTagFused) != 0;
  t.ctrl = (bits & kTagCtrl) ? 1 : 0;
  t.addr = bits & ~(kTagFused | kTagCtrl);
  return t;
}

}  // namespace irobf
