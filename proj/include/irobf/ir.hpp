// Core IR: a small register-plus-slot intermediate representation.
//
// Registers are single-assignment and local to a function; all cross-block
// loop-carried or merged dataflow goes through named slots (there are no phi
// instructions). Pointers are opaque: they can address a slot, a global, a
// function, or be null, and there is no pointer arithmetic and no int<->ptr
// cast.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace irobf {

enum class IrType { Void, I1, I8, I16, I32, I64, F32, F64, Ptr };

bool is_int(IrType t);
bool is_float(IrType t);
int int_bits(IrType t);
// Widths for compatibility ranking: i1 < i8 < i16 < i32 < i64, f32 < f64.
int type_rank(IrType t);
const char* type_name(IrType t);
std::optional<IrType> type_from_name(const std::string& s);

// Wrap a raw integer into the signed two's-complement range of `t`.
int64_t normalize_int(int64_t v, IrType t);

enum class Opcode {
  Const,
  Add, Sub, Mul, Sdiv, Srem,
  Icmp,
  Fadd, Fsub, Fmul, Fdiv,
  Fcmp,
  Zext, Trunc, Sitofp, Fptosi,
  SlotAddr, Load, Store,
  Call, Icall, AddrOfFunc,
  Print, Setjmp, Longjmp, MayThrow,
};

const char* opcode_name(Opcode op);

struct Operand {
  enum class Kind { Reg, ImmInt, ImmFloat, NullPtr, Global };
  Kind kind = Kind::ImmInt;
  std::string name;  // Reg / Global
  int64_t ival = 0;
  double fval = 0.0;

  static Operand reg(std::string n);
  static Operand imm_int(int64_t v);
  static Operand imm_float(double v);
  static Operand null_ptr();
  static Operand global(std::string n);

  bool is_reg() const { return kind == Kind::Reg; }
  bool operator==(const Operand& o) const;
};

// Operand layout per opcode (args vector):
//   Const                -- no args; literal in `imm`
//   Add..Fdiv            -- [lhs, rhs]
//   Icmp/Fcmp            -- [lhs, rhs], predicate in `pred`
//   Zext/Trunc/Sitofp/Fptosi -- [src]; `type` = source type, `to_type` = dest
//   SlotAddr             -- no args; slot name in `slot`
//   Load                 -- [addr]      (ptr reg or global)
//   Store                -- [value, addr]
//   Call                 -- [call args...]; callee name in `callee`
//   Icall                -- [callee ptr, call args...]; ret type in `type`
//   AddrOfFunc           -- no args; target in `callee`; tag_ctrl 0/1 if tagged
//   Print                -- [value]
//   Setjmp               -- [jmpbuf ptr]
//   Longjmp              -- [jmpbuf ptr, value]
//   MayThrow             -- [cond]; handler block label in `handler`
struct Instruction {
  Opcode op = Opcode::Const;
  std::string result;   // empty when the instruction produces no value
  IrType type = IrType::Void;     // primary type annotation (see layout note)
  IrType to_type = IrType::Void;  // conversion destination type
  std::string pred;     // icmp: eq ne slt sle sgt sge; fcmp: oeq one olt ole ogt oge
  std::vector<Operand> args;
  Operand imm;          // Const literal
  std::string slot;     // SlotAddr target
  std::string callee;   // Call / AddrOfFunc target
  std::string handler;  // MayThrow handler label
  int tag_ctrl = -1;    // AddrOfFunc: -1 plain, 0/1 tagged with ctrl
  bool tag_checked = false;  // Icall: dispatch through the tag convention

  bool has_result() const { return !result.empty(); }
};

// Result type of an instruction; Call types are resolved against the module
// at parse/build time and cached in `type`.
IrType result_type(const Instruction& in);

enum class TermKind { Br, CondBr, Switch, Ret };

struct SwitchCase {
  int64_t value = 0;
  std::string target;
};

struct Terminator {
  TermKind kind = TermKind::Ret;
  Operand value;          // condbr cond / switch scrutinee / ret value
  bool has_value = false; // ret only
  IrType type = IrType::Void;  // switch scrutinee type; ret value type
  std::vector<std::string> targets;  // br: [t]; condbr: [if_true, if_false]
  std::vector<SwitchCase> cases;     // switch
  std::string default_target;        // switch
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> insts;
  Terminator term;
};

// Every outgoing control edge of a block, in deterministic order: terminator
// targets first (cases before default for switch), then may_throw handler
// edges in instruction order. Duplicate targets appear once per edge slot.
std::vector<std::string> successor_edges(const BasicBlock& b);

struct Param {
  std::string name;
  IrType type = IrType::I64;
};

struct SlotDecl {
  std::string name;
  IrType type = IrType::I64;
};

// Per-side parameter placement of a fused function: placement[i] is the
// merged-parameter index (0-based, not counting ctrl) that original
// parameter i of that side maps to. Tag-checked indirect calls dispatch
// arguments through this map.
struct FuseMap {
  std::vector<int> left;
  std::vector<int> right;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  IrType ret_type = IrType::Void;
  bool is_variadic = false;
  bool is_external = false;  // declared only; no body
  std::vector<SlotDecl> slots;
  std::vector<BasicBlock> blocks;
  std::optional<FuseMap> fuse_map;

  const BasicBlock* find_block(const std::string& label) const;
  BasicBlock* find_block(const std::string& label);
  int block_index(const std::string& label) const;  // -1 if absent
  int slot_index(const std::string& name) const;    // -1 if absent
  int param_index(const std::string& name) const;   // -1 if absent
};

bool function_contains_setjmp(const Function& f);

struct GlobalVar {
  std::string name;
  IrType type = IrType::I64;
  Operand init;  // ImmInt / ImmFloat / NullPtr
};

struct IrModule {
  std::string name;
  std::vector<GlobalVar> globals;
  std::vector<Function> functions;
  std::set<std::string> exported;
  std::set<std::string> visible_ptrs;  // function pointers visible externally

  const Function* find_function(const std::string& name) const;
  Function* find_function(const std::string& name);
  int function_ordinal(const std::string& name) const;  // -1 if absent
  const GlobalVar* find_global(const std::string& name) const;
  int global_index(const std::string& name) const;

  // Pick a function/slot/register-safe name not yet used in the module.
  std::string fresh_function_name(const std::string& base) const;
};

// Functions whose address is taken anywhere (addr_of_func target or listed
// as an externally visible pointer).
std::set<std::string> address_taken_functions(const IrModule& m);

// Abstract function address space: ordinal within the module times 16.
// Bits 0..3 of every plain address are zero.
int64_t function_address(const IrModule& m, const std::string& name);
constexpr int64_t kFunctionAlign = 16;

// Tagged function pointers: bit 1 marks a fused target, bit 2 carries ctrl.
// Bits 0 and 3 are never touched (bit 0 stays reserved).
constexpr int64_t kTagFused = 1 << 1;
constexpr int64_t kTagCtrl = 1 << 2;

struct TaggedPtr {
  int64_t addr = 0;  // 16-aligned abstract address, tag bits cleared
  bool is_fused = false;
  int ctrl = 0;
};

int64_t encode_tagged(int64_t addr, int ctrl);
TaggedPtr decode_tagged(int64_t bits);

}  // namespace irobf
