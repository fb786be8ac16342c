#include <doctest.h>

#include <string>
#include <vector>

#include "irobf/interp.hpp"
#include "support/fixtures.hpp"

using namespace irobf;
using namespace irobf::testing;

namespace {

std::vector<Value> one_i64(int64_t v) { return {Value::make_int(v, IrType::I64)}; }

}  // namespace

TEST_SUITE_BEGIN("interp");

TEST_CASE("identity and basic arithmetic") {
  IrModule m = parse_fixture(R"(module basic
func @id(%x: i64) -> i64 {
b0:
  ret i64 %x
}
func @narrow(%x: i64) -> i64 {
b0:
  %t = trunc i64 %x to i8
  %u = add i8 %t, 100
  %w = zext i8 %u to i64
  ret i64 %w
}
func @fmath(%x: i64) -> i64 {
b0:
  %f = sitofp i64 %x to f64
  %h = fdiv f64 %f, 2.0
  print f64 %h
  %s = fmul f64 %h, 4.0
  %r = fptosi f64 %s to i64
  ret i64 %r
}
)");
  Interp in(m);
  auto r = in.run("id", one_i64(7));
  REQUIRE_FALSE(r.trapped());
  CHECK(r.exit_value == 7);

  // 200 -> i8 -56; -56 + 100 = 44; zext(44) = 44.
  CHECK(in.run("narrow", one_i64(200)).exit_value == 44);
  // 130 -> i8 -126; -126 + 100 = -26 (0xE6); zext -> 230.
  CHECK(in.run("narrow", one_i64(130)).exit_value == 230);

  auto f = in.run("fmath", one_i64(7));
  REQUIRE_FALSE(f.trapped());
  CHECK(f.exit_value == 14);
  REQUIRE(f.output_trace.size() == 1);
  CHECK(f.output_trace[0] == "3.5");
}

TEST_CASE("determinism: identical runs produce identical results") {
  IrModule m = parse_fixture(kCalFileText);
  Interp in(m);
  auto args = std::vector<Value>{Value::make_int(5, IrType::I64),
                                 Value::make_int(27, IrType::I64)};
  auto a = in.run("cal_file", args);
  auto b = in.run("cal_file", args);
  CHECK(a.exit_value == b.exit_value);
  CHECK(a.output_trace == b.output_trace);
  CHECK(a.trap == b.trap);
  CHECK(a.steps == b.steps);
}

TEST_CASE("file-processing fixture computes its hand-checked values") {
  IrModule m = parse_fixture(kCalFileText);
  Interp in(m);
  auto run2 = [&](int64_t name, int64_t ch) {
    auto r = in.run("cal_file", {Value::make_int(name, IrType::I64),
                                 Value::make_int(ch, IrType::I64)});
    REQUIRE_FALSE(r.trapped());
    return *r.exit_value;
  };
  // name=0: default descriptor 3; bytes (3*31 + 7i) % 97 for i in 0..11.
  CHECK(run2(0, 3) == 1);
  CHECK(run2(0, 93) == 1);
  CHECK(run2(0, 50) == 0);
  // name=5: fd = (5*7)%32+1 = 4; ext check (5%4==1) passes.
  CHECK(run2(5, 27) == 1);
  CHECK(run2(5, 0) == 1);   // (124 + 7*10) % 97 == 0
  CHECK(run2(5, 96) == 0);
  // name=4: extension check fails -> early -1.
  CHECK(run2(4, 27) == -1);
}

TEST_CASE("counted loop iterates the syntactically predicted number of times") {
  // The loop-analysis oracle: 8 predicted trips; the body adds 2 per trip.
  IrModule m = parse_fixture(R"(module loops
func @count(%x: i64) -> i64 {
  slot %i: i64
  slot %acc: i64
e:
  %pi = slot_addr %i
  store i64 0, %pi
  %pa = slot_addr %acc
  store i64 0, %pa
  br h
h:
  %pi2 = slot_addr %i
  %iv = load i64, %pi2
  %c = icmp slt i64 %iv, 8
  condbr %c, body, exit
body:
  %pa2 = slot_addr %acc
  %av = load i64, %pa2
  %an = add i64 %av, 2
  store i64 %an, %pa2
  %pi3 = slot_addr %i
  %iv2 = load i64, %pi3
  %in = add i64 %iv2, 1
  store i64 %in, %pi3
  br h
exit:
  %pa3 = slot_addr %acc
  %fin = load i64, %pa3
  ret i64 %fin
}
)");
  auto r = run_module(m, "count", one_i64(0));
  CHECK(r.exit_value == 16);  // 8 iterations x 2
}

TEST_CASE("setjmp/longjmp unwinds to the saved frame") {
  IrModule m = parse_fixture(R"(module sj
func @callee(%buf: ptr, %x: i64) -> i64 {
b0:
  %c = icmp sgt i64 %x, 10
  condbr %c, thrower, ok
thrower:
  longjmp %buf, 42
  br ok
ok:
  ret i64 0
}
func @main(%x: i64) -> i64 {
  slot %jb: i64
m0:
  %pj = slot_addr %jb
  %t = setjmp %pj
  print i32 %t
  %c = icmp eq i32 %t, 0
  condbr %c, call_it, after
call_it:
  %r = call @callee(%pj, %x)
  print i64 %r
  br fin
after:
  br fin
fin:
  ret i64 99
}
)");
  Interp in(m);

  auto quiet = in.run("main", one_i64(5));
  REQUIRE_FALSE(quiet.trapped());
  CHECK(quiet.exit_value == 99);
  CHECK(quiet.output_trace == std::vector<std::string>{"0", "0"});

  auto jumped = in.run("main", one_i64(20));
  REQUIRE_FALSE(jumped.trapped());
  CHECK(jumped.exit_value == 99);
  // setjmp returns 0, callee longjmps 42, the %r print never runs.
  CHECK(jumped.output_trace == std::vector<std::string>{"0", "42"});
}

TEST_CASE("longjmp by zero resumes with 1, dead frames trap") {
  IrModule m = parse_fixture(R"(module sj2
func @zerojump(%buf: ptr) -> i64 {
b0:
  longjmp %buf, 0
  br b1
b1:
  ret i64 0
}
func @with_zero(%x: i64) -> i64 {
  slot %jb: i64
m0:
  %pj = slot_addr %jb
  %t = setjmp %pj
  %c = icmp eq i32 %t, 0
  condbr %c, go, done
go:
  %r = call @zerojump(%pj)
  br done
done:
  %w = zext i32 %t to i64
  ret i64 %w
}
func @saver(%buf: ptr) -> i64 {
b0:
  %t = setjmp %buf
  %w = zext i32 %t to i64
  ret i64 %w
}
func @dead(%x: i64) -> i64 {
  slot %jb: i64
m0:
  %pj = slot_addr %jb
  %r = call @saver(%pj)
  longjmp %pj, 7
  br m1
m1:
  ret i64 0
}
)");
  Interp in(m);
  CHECK(in.run("with_zero", one_i64(0)).exit_value == 1);

  auto dead = in.run("dead", one_i64(0));
  CHECK(dead.trap == TrapKind::NullDeref);
  CHECK(dead.trap_location == "dead:m0");
}

TEST_CASE("may_throw transfers control mid-block") {
  IrModule m = parse_fixture(R"(module mt
func @f(%x: i64) -> i64 {
b0:
  %c = icmp sgt i64 %x, 0
  print i64 1
  may_throw %c, handler
  print i64 2
  br done
handler:
  print i64 3
  br done
done:
  ret i64 0
}
)");
  Interp in(m);
  CHECK(in.run("f", one_i64(1)).output_trace ==
        std::vector<std::string>{"1", "3"});
  CHECK(in.run("f", one_i64(0)).output_trace ==
        std::vector<std::string>{"1", "2"});
}

TEST_CASE("traps: division, memory, step limit, external calls") {
  IrModule m = parse_fixture(R"(module traps
declare @ext(i64) -> i64
func @div(%x: i64) -> i64 {
b0:
  %r = sdiv i64 100, %x
  ret i64 %r
}
func @null_load(%x: i64) -> i64 {
  slot %p: ptr
b0:
  %pp = slot_addr %p
  %v = load ptr, %pp
  %w = load i64, %v
  ret i64 %w
}
func @spin(%x: i64) -> i64 {
b0:
  br b1
b1:
  br b1
}
func @call_ext(%x: i64) -> i64 {
b0:
  %r = call @ext(%x)
  ret i64 %r
}
func @dangling(%x: i64) -> i64 {
b0:
  %p = call @leak(%x)
  %v = load i64, %p
  ret i64 %v
}
func @leak(%x: i64) -> ptr {
  slot %s: i64
b0:
  %p = slot_addr %s
  ret ptr %p
}
)");
  Interp in(m);

  CHECK(in.run("div", one_i64(5)).exit_value == 20);
  auto dz = in.run("div", one_i64(0));
  CHECK(dz.trap == TrapKind::DivByZero);
  CHECK(dz.trap_location == "div:b0");

  CHECK(in.run("null_load", one_i64(0)).trap == TrapKind::NullDeref);

  RunLimits tight;
  tight.max_steps = 1000;
  auto spin = in.run("spin", one_i64(0), tight);
  CHECK(spin.trap == TrapKind::StepLimit);
  CHECK(spin.steps == 1001);

  CHECK(in.run("call_ext", one_i64(0)).trap == TrapKind::Unreachable);

  // A slot pointer returned from a finished frame is dangling.
  CHECK(in.run("dangling", one_i64(0)).trap == TrapKind::NullDeref);
}

TEST_CASE("indirect calls: plain dispatch, tagged dispatch, bad targets") {
  IrModule m = parse_fixture(R"(module ic
func @plain(%v: i32) -> i32 {
b0:
  %r = add i32 %v, 10
  ret i32 %r
}
func @fu(%ctrl: i1, %a: i32) -> i32 fusemap [0] [0] {
entry:
  condbr %ctrl, rside, lside
lside:
  %la = add i32 %a, 1
  ret i32 %la
rside:
  %ra = add i32 %a, 2
  ret i32 %ra
}
func @via_plain(%x: i64) -> i64 {
b0:
  %xt = trunc i64 %x to i32
  %pp = addr_of @plain
  %r = icall %pp(%xt) -> i32
  %w = zext i32 %r to i64
  ret i64 %w
}
func @via_tags(%x: i64) -> i64 {
b0:
  %xt = trunc i64 %x to i32
  %p1 = addr_of @fu tag 1
  %r1 = icall %p1(%xt) -> i32 tagcheck
  print i32 %r1
  %p0 = addr_of @fu tag 0
  %r0 = icall %p0(%xt) -> i32 tagcheck
  print i32 %r0
  ret i64 0
}
func @raw_into_tagged(%x: i64) -> i64 {
b0:
  %xt = trunc i64 %x to i32
  %p1 = addr_of @fu tag 1
  %r = icall %p1(%xt) -> i32
  %w = zext i32 %r to i64
  ret i64 %w
}
func @null_call(%x: i64) -> i64 {
  slot %c: ptr
b0:
  %pc = slot_addr %c
  %p = load ptr, %pc
  %r = icall %p() -> i64
  ret i64 %r
}
func @sig_mismatch(%x: i64) -> i64 {
b0:
  %pp = addr_of @plain
  %r = icall %pp() -> i32
  %w = zext i32 %r to i64
  ret i64 %w
}
)");
  Interp in(m);

  CHECK(in.run("via_plain", one_i64(7)).exit_value == 17);

  auto tagged = in.run("via_tags", one_i64(40));
  REQUIRE_FALSE(tagged.trapped());
  // ctrl=1 side adds 2, ctrl=0 side adds 1.
  CHECK(tagged.output_trace == std::vector<std::string>{"42", "41"});

  // Jumping through a tagged pointer without decoding lands nowhere valid.
  CHECK(in.run("raw_into_tagged", one_i64(1)).trap ==
        TrapKind::BadIcallTarget);
  CHECK(in.run("null_call", one_i64(0)).trap == TrapKind::BadIcallTarget);
  CHECK(in.run("sig_mismatch", one_i64(0)).trap == TrapKind::BadIcallTarget);
}

TEST_CASE("run_checked reports exit-range and neutrality violations") {
  IrModule m = parse_fixture(R"(module chk
global @g: i64 = 0
func @selector(%x: i64) -> i32 {
b0:
  %t = trunc i64 %x to i32
  ret i32 %t
}
func @toucher(%x: i64) -> i64 {
b0:
  store i64 %x, @g
  br b1
b1:
  %v = load i64, @g
  ret i64 %v
}
func @main(%x: i64) -> i64 {
b0:
  %s = call @selector(%x)
  %w = zext i32 %s to i64
  %t = call @toucher(%w)
  ret i64 %t
}
)");
  Interp in(m);
  CheckSpec spec;
  spec.exit_ranges["selector"] = 2;  // pretend it has two exits
  spec.neutral_blocks.insert("toucher:b0");
  spec.neutral_blocks.insert("toucher:b1");

  CheckReport ok_report;
  auto ok = in.run_checked("main", one_i64(1), {}, spec, ok_report);
  REQUIRE_FALSE(ok.trapped());
  // selector returned 1 (in range); toucher:b0 stores to @g.
  REQUIRE(ok_report.violations.size() == 1);
  CHECK(ok_report.violations[0].find("toucher:b0") != std::string::npos);
  CHECK(ok_report.branch_outcomes.empty());  // no condbr in this module

  CheckReport bad_report;
  auto bad = in.run_checked("main", one_i64(5), {}, spec, bad_report);
  REQUIRE_FALSE(bad.trapped());
  REQUIRE(bad_report.violations.size() == 2);
  CHECK(bad_report.violations[0].find("selector") != std::string::npos);
}

TEST_CASE("run_checked records condbr outcomes") {
  IrModule m = parse_fixture(kCalFileText);
  Interp in(m);
  CheckReport report;
  CheckSpec spec;
  auto r = in.run_checked("cal_file",
                          {Value::make_int(5, IrType::I64),
                           Value::make_int(27, IrType::I64)},
                          {}, spec, report);
  REQUIRE_FALSE(r.trapped());
  auto& b1 = report.branch_outcomes["cal_file:bb1"];
  CHECK(b1 == std::set<bool>{true});
  auto& b6 = report.branch_outcomes["cal_file:bb6"];
  CHECK(b6 == std::set<bool>{true, false});  // loop continues, then exits
}

TEST_CASE("typed literal parsing for CLI arguments") {
  Value v = Interp::parse_typed_literal("i64:7");
  CHECK(v.kind == Value::Kind::Int);
  CHECK(v.i == 7);
  CHECK(Interp::parse_typed_literal("i8:200").i == -56);
  CHECK(Interp::parse_typed_literal("f32:1.5").f == 1.5);
  CHECK(Interp::parse_typed_literal("ptr:null").space == Value::Space::Null);
  CHECK_THROWS_AS(Interp::parse_typed_literal("i64"), std::invalid_argument);
  CHECK_THROWS_AS(Interp::parse_typed_literal("i64:abc"),
                  std::invalid_argument);
  CHECK_THROWS_AS(Interp::parse_typed_literal("i64:7x"),
                  std::invalid_argument);
  CHECK_THROWS_AS(Interp::parse_typed_literal("q8:1"), std::invalid_argument);
  CHECK_THROWS_AS(Interp::parse_typed_literal("ptr:7"), std::invalid_argument);
}

TEST_SUITE_END();
