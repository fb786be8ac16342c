#include "support/fixtures.hpp"

#include <cstdio>
#include <cstdlib>

#include "irobf/parser.hpp"
#include "irobf/validator.hpp"

namespace irobf::testing {

const char* kCalFileText = R"(module calfile

global @default_fd: i64 = 3
global @file_len: i64 = 12

func @cal_file(%name: i64, %ch: i64) -> i64 {
  slot %res: i64
  slot %fd: i64
  slot %cnt: i64
  slot %idx: i64
bb1:
  %c1 = icmp ne i64 %name, 0
  condbr %c1, bb2, bb4
bb2:
  %p_res = slot_addr %res
  store i64 -1, %p_res
  %h1 = mul i64 %name, 7
  %h2 = srem i64 %h1, 32
  %fdv = add i64 %h2, 1
  %p_fd = slot_addr %fd
  store i64 %fdv, %p_fd
  %ext = srem i64 %name, 4
  %c2 = icmp eq i64 %ext, 1
  br bb3
bb3:
  condbr %c2, bb5, bb9
bb4:
  %dfd = load i64, @default_fd
  %p_fd4 = slot_addr %fd
  store i64 %dfd, %p_fd4
  %p_res4 = slot_addr %res
  store i64 -1, %p_res4
  %c3 = icmp ne i64 %dfd, 0
  condbr %c3, bb5, bb9
bb5:
  %p_cnt = slot_addr %cnt
  store i64 0, %p_cnt
  %p_idx = slot_addr %idx
  store i64 0, %p_idx
  br bb6
bb6:
  %p_idx6 = slot_addr %idx
  %iv = load i64, %p_idx6
  %len = load i64, @file_len
  %cl = icmp slt i64 %iv, %len
  condbr %cl, bb7, bb8
bb7:
  %p_fd7 = slot_addr %fd
  %fd7 = load i64, %p_fd7
  %p_idx7 = slot_addr %idx
  %i7 = load i64, %p_idx7
  %m1 = mul i64 %fd7, 31
  %m2 = mul i64 %i7, 7
  %sum = add i64 %m1, %m2
  %chv = srem i64 %sum, 97
  %eq = icmp eq i64 %chv, %ch
  %e = zext i1 %eq to i64
  %p_cnt7 = slot_addr %cnt
  %c7 = load i64, %p_cnt7
  %c7n = add i64 %c7, %e
  store i64 %c7n, %p_cnt7
  %i7n = add i64 %i7, 1
  store i64 %i7n, %p_idx7
  br bb6
bb8:
  %p_cnt8 = slot_addr %cnt
  %cv = load i64, %p_cnt8
  %p_res8 = slot_addr %res
  store i64 %cv, %p_res8
  br bb9
bb9:
  %p_res9 = slot_addr %res
  %rv = load i64, %p_res9
  ret i64 %rv
}
)";

const char* kBarFooText = R"(module pair

func @bar(%a: i16, %b: i64) -> i32 {
bb1:
  %aw = zext i16 %a to i64
  %s = add i64 %aw, %b
  %t = trunc i64 %s to i32
  ret i32 %t
}

func @foo(%m: i32, %n: ptr) -> i16 {
bb1:
  %v = load i16, %n
  %mw = trunc i32 %m to i16
  %r = add i16 %v, %mw
  ret i16 %r
}

func @main(%z: i64) -> i64 {
  slot %cell: i16
bb1:
  %zt = trunc i64 %z to i16
  %p = slot_addr %cell
  store i16 %zt, %p
  %zb = trunc i64 %z to i16
  %r1 = call @bar(%zb, 100)
  %r2m = zext i16 %zt to i32
  %r2 = call @foo(%r2m, %p)
  %w1 = zext i32 %r1 to i64
  %w2 = zext i16 %r2 to i64
  %sum = add i64 %w1, %w2
  print i64 %sum
  ret i64 %sum
}
)";

IrModule parse_fixture(const std::string& text) {
  IrModule m;
  try {
    m = parse_module(text);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "fixture parse error: %s\n", e.what());
    std::abort();
  }
  auto violations = validate(m);
  if (!violations.empty()) {
    for (const auto& v : violations)
      std::fprintf(stderr, "fixture invalid: %s\n", v.to_string().c_str());
    std::abort();
  }
  return m;
}

}  // namespace irobf::testing
