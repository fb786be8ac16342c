#include "doctest.h"
#include "irobf/ir.hpp"
#include "irobf/parser.hpp"
#include "irobf/printer.hpp"
#include "irobf/validator.hpp"

using namespace irobf;

namespace {

// Exercises every construct the grammar knows about.
const char* kKitchenSink = R"(module kitchen

global @g0: i64 = 42
global @gf: f64 = 2.5
global @gp: ptr = null

export @main
visible_ptr @callee

declare @ext(i64, ptr) -> i32
declare @vararg(i64, ...) -> void

func @callee(%x: i64) -> i64 {
entry:
  %r = add i64 %x, 1
  ret i64 %r
}

func @fu(%ctrl: i1, %p0: i32) -> i32 fusemap [0] [] {
entry:
  %z = addr_of @fu tag 1
  condbr %ctrl, r, l
l:
  ret i32 %p0
r:
  %c = const i32 7
  ret i32 %c
}

func @main(%a: i64, %b: f64) -> i32 {
  slot %s: i64
  slot %jb: i64
  slot %fp: ptr
entry:
  %p = slot_addr %s
  store i64 %a, %p
  %v = load i64, %p
  %c = icmp slt i64 %v, 10
  condbr %c, then, else
then:
  %d = fadd f64 %b, 1.5
  %cf = fcmp olt f64 %d, 3.5
  %ci = zext i1 %cf to i64
  print i64 %ci
  br join
else:
  %w = trunc i64 %v to i16
  %ww = zext i16 %w to i32
  %fv = sitofp i32 %ww to f64
  %iv = fptosi f64 %fv to i32
  print i32 %iv
  br join
join:
  %g = load i64, @g0
  store i64 %g, @g0
  %fa = addr_of @callee
  %pp = slot_addr %fp
  store ptr %fa, %pp
  %fl = load ptr, %pp
  %ic = icall %fl(%g) -> i64 tagcheck
  %cr = call @callee(%ic)
  call @vararg(%cr, %g)
  %q = srem i64 %cr, 7
  switch i64 %q, [0 -> sw0], [1 -> sw1], default swd
sw0:
  %jp = slot_addr %jb
  %sj = setjmp %jp
  %jz = icmp eq i32 %sj, 0
  condbr %jz, sjfirst, swd
sjfirst:
  longjmp %jp, 5
  br swd
sw1:
  %t = icmp eq i64 %q, 1
  may_throw %t, handler
  br swd
handler:
  print i64 99
  br swd
swd:
  ret i32 0
}
)";

IrModule parse_ok(const std::string& text) {
  IrModule m = parse_module(text);
  auto v = validate(m);
  for (const auto& viol : v) INFO(viol.to_string());
  REQUIRE(v.empty());
  return m;
}

bool rejects(const std::string& text) {
  try {
    IrModule m = parse_module(text);
    return !validate(m).empty();
  } catch (const ParseError&) {
    return true;
  }
}

}  // namespace

TEST_CASE("parse-print-parse reaches a fixpoint") {
  IrModule m1 = parse_ok(kKitchenSink);
  std::string p1 = print_module(m1);
  IrModule m2 = parse_ok(p1);
  std::string p2 = print_module(m2);
  CHECK(p1 == p2);
  CHECK(m2.name == "kitchen");
  CHECK(m2.functions.size() == 5);
  CHECK(m2.exported.count("main") == 1);
  CHECK(m2.visible_ptrs.count("callee") == 1);
}

TEST_CASE("parsed structure matches the text") {
  IrModule m = parse_ok(kKitchenSink);
  const Function* main = m.find_function("main");
  REQUIRE(main != nullptr);
  CHECK(main->params.size() == 2);
  CHECK(main->slots.size() == 3);
  CHECK(main->blocks.size() == 9);
  CHECK(main->ret_type == IrType::I32);

  const Function* ext = m.find_function("ext");
  REQUIRE(ext != nullptr);
  CHECK(ext->is_external);
  CHECK(ext->params.size() == 2);
  const Function* va = m.find_function("vararg");
  REQUIRE(va != nullptr);
  CHECK(va->is_variadic);

  const Function* fu = m.find_function("fu");
  REQUIRE(fu != nullptr);
  REQUIRE(fu->fuse_map.has_value());
  CHECK(fu->fuse_map->left == std::vector<int>{0});
  CHECK(fu->fuse_map->right.empty());

  const BasicBlock* join = main->find_block("join");
  REQUIRE(join != nullptr);
  CHECK(join->insts[6].op == Opcode::Icall);
  CHECK(join->insts[6].tag_checked);
  // Direct call return types are cached at parse time.
  CHECK(join->insts[7].op == Opcode::Call);
  CHECK(join->insts[7].type == IrType::I64);
}

TEST_CASE("successor edges are ordered: targets, cases, default, handlers") {
  IrModule m = parse_ok(kKitchenSink);
  const Function* main = m.find_function("main");
  const BasicBlock* join = main->find_block("join");
  CHECK(successor_edges(*join) ==
        std::vector<std::string>{"sw0", "sw1", "swd"});
  const BasicBlock* sw1 = main->find_block("sw1");
  CHECK(successor_edges(*sw1) == std::vector<std::string>{"swd", "handler"});
}

TEST_CASE("float literals survive the round trip") {
  CHECK(format_float(2.5) == "2.5");
  CHECK(format_float(3.0) == "3.0");
  double tricky = 0.1 + 0.2;
  std::string s = format_float(tricky);
  CHECK(std::strtod(s.c_str(), nullptr) == tricky);
}

TEST_CASE("integer normalization wraps to the type width") {
  CHECK(normalize_int(255, IrType::I8) == -1);
  CHECK(normalize_int(127, IrType::I8) == 127);
  CHECK(normalize_int(128, IrType::I8) == -128);
  CHECK(normalize_int(3, IrType::I1) == 1);
  CHECK(normalize_int(2, IrType::I1) == 0);
  CHECK(normalize_int(65535, IrType::I16) == -1);
  CHECK(normalize_int(-1, IrType::I64) == -1);
}

TEST_CASE("tagged pointer encode/decode round-trips") {
  for (int ctrl : {0, 1}) {
    for (int64_t ord = 0; ord < 100; ++ord) {
      int64_t addr = ord * kFunctionAlign;
      int64_t bits = encode_tagged(addr, ctrl);
      TaggedPtr t = decode_tagged(bits);
      CHECK(t.is_fused);
      CHECK(t.ctrl == ctrl);
      CHECK(t.addr == addr);
      // Bits 0 and 3 are never touched.
      CHECK((bits & 1) == 0);
      CHECK((bits & 8) == (addr & 8));
    }
  }
  TaggedPtr plain = decode_tagged(48);
  CHECK_FALSE(plain.is_fused);
  CHECK(plain.addr == 48);
}

TEST_CASE("function addresses are 16-aligned ordinals") {
  IrModule m = parse_ok(kKitchenSink);
  CHECK(function_address(m, "ext") == 0);
  CHECK(function_address(m, "vararg") == 16);
  CHECK(function_address(m, "callee") == 32);
  CHECK(function_address(m, "nope") == -1);
}

TEST_CASE("validator rejects malformed programs") {
  const char* head = "module t\nfunc @f(%a: i64) -> i64 {\nentry:\n";

  SUBCASE("double assignment") {
    CHECK(rejects(std::string(head) +
                  "  %x = add i64 %a, 1\n  %x = add i64 %a, 2\n  ret i64 %x\n}\n"));
  }
  SUBCASE("use before definition") {
    CHECK(rejects(std::string(head) +
                  "  %y = add i64 %x, 1\n  %x = add i64 %a, 2\n  ret i64 %y\n}\n"));
  }
  SUBCASE("unknown branch target") {
    CHECK(rejects(std::string(head) + "  br nowhere\n}\n"));
  }
  SUBCASE("type mismatch in arithmetic") {
    CHECK(rejects(std::string(head) + "  %x = fadd f64 %a, 1.0\n  ret i64 %a\n}\n"));
  }
  SUBCASE("edge into the entry block") {
    CHECK(rejects(std::string(head) + "  br entry\n}\n"));
  }
  SUBCASE("missing terminator") {
    CHECK(rejects(std::string(head) + "  %x = add i64 %a, 1\n}\n"));
  }
  SUBCASE("ret type mismatch") {
    CHECK(rejects(std::string(head) + "  ret\n}\n"));
  }
  SUBCASE("condbr on a non-i1 register") {
    CHECK(rejects(std::string(head) + "  condbr %a, entry, entry\n}\n"));
  }
  SUBCASE("call arity") {
    CHECK(rejects("module t\nfunc @g() -> void {\nentry:\n  ret\n}\n"
                  "func @f() -> void {\nentry:\n  call @g(1)\n  ret\n}\n"));
  }
  SUBCASE("tagged addr_of of a plain function") {
    CHECK(rejects("module t\nfunc @g() -> void {\nentry:\n  ret\n}\n"
                  "func @f() -> ptr {\nentry:\n  %p = addr_of @g tag 1\n  ret ptr %p\n}\n"));
  }
  SUBCASE("duplicate switch cases") {
    CHECK(rejects(std::string(head) +
                  "  switch i64 %a, [3 -> entry2], [3 -> entry2], default entry2\n"
                  "entry2:\n  ret i64 %a\n}\n"));
  }
  SUBCASE("store kind mismatch on a global") {
    CHECK(rejects("module t\nglobal @g: i64 = 0\nfunc @f(%x: f64) -> void {\n"
                  "entry:\n  store f64 %x, @g\n  ret\n}\n"));
  }
}

TEST_CASE("dominance violations are caught") {
  // %x defined in one arm, used at the join.
  CHECK(rejects(R"(module t
func @f(%a: i1) -> i64 {
entry:
  condbr %a, left, right
left:
  %x = const i64 1
  br join
right:
  br join
join:
  ret i64 %x
}
)"));
}

TEST_CASE("registers defined after may_throw stay block-local") {
  CHECK(rejects(R"(module t
func @f(%a: i1) -> i64 {
entry:
  may_throw %a, handler
  %x = const i64 1
  br next
next:
  ret i64 %x
handler:
  %y = const i64 2
  ret i64 %y
}
)"));
  // Same shape is fine when the use stays in-block.
  parse_ok(R"(module t
func @f(%a: i1) -> i64 {
entry:
  may_throw %a, handler
  %x = const i64 1
  ret i64 %x
handler:
  %y = const i64 2
  ret i64 %y
}
)");
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_module("module t\nfunc @f() -> void {\nentry:\n  frobnicate\n  ret\n}\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 4);
  }
}
