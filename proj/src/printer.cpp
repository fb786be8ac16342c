#include "irobf/printer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace irobf {

std::string format_float(double v) {
  // Shortest form that parses back to the same double.
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  // Keep float literals visually distinct from integers.
  if (!std::strpbrk(buf, ".eEn")) std::strcat(buf, ".0");
  return buf;
}

namespace {

void print_operand(std::ostringstream& os, const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Reg: os << '%' << o.name; break;
    case Operand::Kind::ImmInt: os << o.ival; break;
    case Operand::Kind::ImmFloat: os << format_float(o.fval); break;
    case Operand::Kind::NullPtr: os << "null"; break;
    case Operand::Kind::Global: os << '@' << o.name; break;
  }
}

void print_inst(std::ostringstream& os, const Instruction& in) {
  os << "  ";
  if (in.has_result()) os << '%' << in.result << " = ";
  switch (in.op) {
    case Opcode::Const:
      os << "const " << type_name(in.type) << ' ';
      print_operand(os, in.imm);
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::Sdiv:
    case Opcode::Srem:
    case Opcode::Fadd:
    case Opcode::Fsub:
    case Opcode::Fmul:
    case Opcode::Fdiv:
      os << opcode_name(in.op) << ' ' << type_name(in.type) << ' ';
      print_operand(os, in.args[0]);
      os << ", ";
      print_operand(os, in.args[1]);
      break;
    case Opcode::Icmp:
    case Opcode::Fcmp:
      os << opcode_name(in.op) << ' ' << in.pred << ' ' << type_name(in.type)
         << ' ';
      print_operand(os, in.args[0]);
      os << ", ";
      print_operand(os, in.args[1]);
      break;
    case Opcode::Zext:
    case Opcode::Trunc:
    case Opcode::Sitofp:
    case Opcode::Fptosi:
      os << opcode_name(in.op) << ' ' << type_name(in.type) << ' ';
      print_operand(os, in.args[0]);
      os << " to " << type_name(in.to_type);
      break;
    case Opcode::SlotAddr:
      os << "slot_addr %" << in.slot;
      break;
    case Opcode::Load:
      os << "load " << type_name(in.type) << ", ";
      print_operand(os, in.args[0]);
      break;
    case Opcode::Store:
      os << "store " << type_name(in.type) << ' ';
      print_operand(os, in.args[0]);
      os << ", ";
      print_operand(os, in.args[1]);
      break;
    case Opcode::Call: {
      os << "call @" << in.callee << '(';
      for (size_t i = 0; i < in.args.size(); ++i) {
        if (i) os << ", ";
        print_operand(os, in.args[i]);
      }
      os << ')';
      break;
    }
    case Opcode::Icall: {
      os << "icall ";
      print_operand(os, in.args[0]);
      os << '(';
      for (size_t i = 1; i < in.args.size(); ++i) {
        if (i > 1) os << ", ";
        print_operand(os, in.args[i]);
      }
      os << ") -> " << type_name(in.type);
      if (in.tag_checked) os << " tagcheck";
      break;
    }
    case Opcode::AddrOfFunc:
      os << "addr_of @" << in.callee;
      if (in.tag_ctrl >= 0) os << " tag " << in.tag_ctrl;
      break;
    case Opcode::Print:
      os << "print " << type_name(in.type) << ' ';
      print_operand(os, in.args[0]);
      break;
    case Opcode::Setjmp:
      os << "setjmp ";
      print_operand(os, in.args[0]);
      break;
    case Opcode::Longjmp:
      os << "longjmp ";
      print_operand(os, in.args[0]);
      os << ", ";
      print_operand(os, in.args[1]);
      break;
    case Opcode::MayThrow:
      os << "may_throw ";
      print_operand(os, in.args[0]);
      os << ", " << in.handler;
      break;
  }
  os << '\n';
}

void print_term(std::ostringstream& os, const Terminator& t) {
  os << "  ";
  switch (t.kind) {
    case TermKind::Br:
      os << "br " << t.targets[0];
      break;
    case TermKind::CondBr:
      os << "condbr ";
      print_operand(os, t.value);
      os << ", " << t.targets[0] << ", " << t.targets[1];
      break;
    case TermKind::Switch:
      os << "switch " << type_name(t.type) << ' ';
      print_operand(os, t.value);
      for (const auto& c : t.cases)
        os << ", [" << c.value << " -> " << c.target << ']';
      os << ", default " << t.default_target;
      break;
    case TermKind::Ret:
      os << "ret";
      if (t.has_value) {
        os << ' ' << type_name(t.type) << ' ';
        print_operand(os, t.value);
      }
      break;
  }
  os << '\n';
}

void print_signature(std::ostringstream& os, const Function& f) {
  os << '(';
  for (size_t i = 0; i < f.params.size(); ++i) {
    if (i) os << ", ";
    if (f.is_external)
      os << type_name(f.params[i].type);
    else
      os << '%' << f.params[i].name << ": " << type_name(f.params[i].type);
  }
  if (f.is_variadic) {
    if (!f.params.empty()) os << ", ";
    os << "...";
  }
  os << ") -> " << type_name(f.ret_type);
}

}  // namespace

std::string print_function(const Function& f) {
  std::ostringstream os;
  if (f.is_external) {
    os << "declare @" << f.name;
    print_signature(os, f);
    os << '\n';
    return os.str();
  }
  os << "func @" << f.name;
  print_signature(os, f);
  if (f.fuse_map) {
    auto side = [&os](const std::vector<int>& v) {
      os << '[';
      for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v[i];
      }
      os << ']';
    };
    os << " fusemap ";
    side(f.fuse_map->left);
    os << ' ';
    side(f.fuse_map->right);
  }
  os << " {\n";
  for (const auto& s : f.slots)
    os << "  slot %" << s.name << ": " << type_name(s.type) << '\n';
  for (const auto& b : f.blocks) {
    os << b.label << ":\n";
    for (const auto& in : b.insts) print_inst(os, in);
    print_term(os, b.term);
  }
  os << "}\n";
  return os.str();
}

std::string print_module(const IrModule& m) {
  std::ostringstream os;
  os << "module " << m.name << '\n';
  if (!m.globals.empty()) os << '\n';
  for (const auto& g : m.globals) {
    os << "global @" << g.name << ": " << type_name(g.type) << " = ";
    print_operand(os, g.init);
    os << '\n';
  }
  if (!m.exported.empty() || !m.visible_ptrs.empty()) os << '\n';
  for (const auto& e : m.exported) os << "export @" << e << '\n';
  for (const auto& v : m.visible_ptrs) os << "visible_ptr @" << v << '\n';
  for (const auto& f : m.functions) {
    os << '\n';
    os << print_function(f);
  }
  return os.str();
}

}  // namespace irobf
