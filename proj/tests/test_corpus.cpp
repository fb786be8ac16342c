#include <doctest.h>

#include <set>
#include <string>

#include "irobf/analysis.hpp"
#include "irobf/corpus_gen.hpp"
#include "irobf/interp.hpp"
#include "irobf/printer.hpp"
#include "irobf/validator.hpp"

using namespace irobf;

namespace {

int count_op(const IrModule& m, Opcode op) {
  int n = 0;
  for (const auto& f : m.functions)
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.op == op) ++n;
  return n;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("same spec produces identical text, different seeds differ") {
  GenSpec s;
  s.seed = 77;
  s.n_functions = 6;
  std::string a = print_module(generate(s));
  std::string b = print_module(generate(s));
  CHECK(a == b);

  GenSpec s2 = s;
  s2.seed = 78;
  CHECK(print_module(generate(s2)) != a);

  // Round trip through text is stable too.
  for (const auto& spec : {standard_corpus_specs()[0], diffing_genspec()}) {
    CHECK(print_module(generate(spec)) == print_module(generate(spec)));
  }
}

TEST_CASE("every standard corpus program validates") {
  for (const auto& s : standard_corpus_specs()) {
    IrModule m = generate(s);
    auto v = validate(m);
    if (!v.empty()) {
      CAPTURE(s.seed);
      CAPTURE(v.front().to_string());
    }
    CHECK(v.empty());
    CHECK(m.find_function("main") != nullptr);
    CHECK(m.exported.count("main") == 1);
  }
  CHECK(validate(generate(diffing_genspec())).empty());
}

TEST_CASE("feature toggles control what appears in the module") {
  GenSpec all;
  all.seed = 9;
  all.n_functions = 8;
  all.max_blocks = 14;
  IrModule m = generate(all);
  CHECK(count_op(m, Opcode::Icall) >= 1);
  CHECK(count_op(m, Opcode::Setjmp) >= 1);
  CHECK(count_op(m, Opcode::Longjmp) >= 1);
  CHECK(count_op(m, Opcode::MayThrow) >= 1);
  CHECK(!m.globals.empty());
  CHECK(!address_taken_functions(m).empty());

  // Each indirect call site selects between two same-signature targets.
  std::set<std::string> taken;
  for (const auto& f : m.functions)
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.op == Opcode::AddrOfFunc) taken.insert(in.callee);
  REQUIRE(taken.size() >= 2);
  const Function* t0 = m.find_function(*taken.begin());
  const Function* t1 = m.find_function(*std::next(taken.begin()));
  REQUIRE(t0 != nullptr);
  REQUIRE(t1 != nullptr);
  CHECK(t0->ret_type == t1->ret_type);
  CHECK(t0->params.size() == t1->params.size());

  GenSpec none = all;
  none.icalls = none.setjmp = none.may_throw = none.globals = false;
  none.loops = false;
  IrModule m2 = generate(none);
  CHECK(count_op(m2, Opcode::Icall) == 0);
  CHECK(count_op(m2, Opcode::AddrOfFunc) == 0);
  CHECK(count_op(m2, Opcode::Setjmp) == 0);
  CHECK(count_op(m2, Opcode::Longjmp) == 0);
  CHECK(count_op(m2, Opcode::MayThrow) == 0);
  CHECK(m2.globals.empty());
  auto dt_free = [&](const Function& f) {
    if (f.is_external || f.blocks.empty()) return true;
    DomTree dt = dominator_tree(f);
    return loop_info(f, dt).loops.empty();
  };
  for (const auto& f : m2.functions) CHECK(dt_free(f));

  // Loops appear when enabled.
  bool any_loop = false;
  for (const auto& f : m.functions) {
    if (f.is_external || f.blocks.empty()) continue;
    DomTree dt = dominator_tree(f);
    if (!loop_info(f, dt).loops.empty()) any_loop = true;
  }
  CHECK(any_loop);
}

TEST_CASE("generated inputs are deterministic and type-correct") {
  IrModule m = generate(standard_corpus_specs()[3]);
  auto a = generate_inputs(m, "main", 10, 5);
  auto b = generate_inputs(m, "main", 10, 5);
  REQUIRE(a.size() == 10);
  const Function* f = m.find_function("main");
  REQUIRE(f != nullptr);
  bool varied = false;
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].size() == f->params.size());
    for (size_t k = 0; k < a[i].size(); ++k) {
      CHECK(a[i][k].kind == b[i][k].kind);
      CHECK(a[i][k].i == b[i][k].i);
      if (is_int(f->params[k].type)) CHECK(a[i][k].kind == Value::Kind::Int);
    }
    if (i > 0 && (a[i][0].i != a[0][0].i || a[i][1].i != a[0][1].i))
      varied = true;
  }
  CHECK(varied);
}

TEST_CASE("corpus programs run to completion without traps") {
  auto specs = standard_corpus_specs();
  uint64_t total_steps = 0;
  int runs = 0;
  for (size_t i = 0; i < specs.size(); i += 10) {
    IrModule m = generate(specs[i]);
    Interp vm(m);
    auto inputs = generate_inputs(m, "main", 10, specs[i].seed + 1);
    for (const auto& args : inputs) {
      ExecResult r = vm.run("main", args);
      if (r.trapped()) {
        CAPTURE(specs[i].seed);
        CAPTURE(trap_name(r.trap));
        CAPTURE(r.trap_location);
      }
      REQUIRE(!r.trapped());
      REQUIRE(r.exit_value.has_value());
      total_steps += r.steps;
      ++runs;
    }
  }
  REQUIRE(runs == 200);
  // Runs must stay cheap enough for the 200x100x5 differential budget.
  CHECK(total_steps / runs < 100000);
}

TEST_CASE("runs are reproducible") {
  IrModule m = generate(standard_corpus_specs()[42]);
  Interp vm(m);
  auto inputs = generate_inputs(m, "main", 5, 7);
  for (const auto& args : inputs) {
    ExecResult a = vm.run("main", args);
    ExecResult b = vm.run("main", args);
    CHECK(a.exit_value == b.exit_value);
    CHECK(a.output_trace == b.output_trace);
    CHECK(a.steps == b.steps);
  }
}

TEST_CASE("inputs drive both outcomes of most conditional branches") {
  auto specs = standard_corpus_specs();
  int total_sites = 0;
  int covered = 0;
  for (size_t i = 0; i < specs.size(); i += 5) {
    IrModule m = generate(specs[i]);
    Interp vm(m);
    auto inputs = generate_inputs(m, "main", 30, specs[i].seed + 1);
    std::map<std::string, std::set<bool>> seen;
    CheckSpec checks;
    for (const auto& args : inputs) {
      CheckReport rep;
      vm.run_checked("main", args, RunLimits{}, checks, rep);
      for (const auto& [site, outs] : rep.branch_outcomes)
        seen[site].insert(outs.begin(), outs.end());
    }
    for (const auto& f : m.functions)
      for (const auto& b : f.blocks)
        if (b.term.kind == TermKind::CondBr) {
          ++total_sites;
          auto it = seen.find(f.name + ":" + b.label);
          if (it != seen.end() && it->second.size() == 2) ++covered;
        }
  }
  REQUIRE(total_sites > 100);
  double cov = static_cast<double>(covered) / total_sites;
  CAPTURE(covered);
  CAPTURE(total_sites);
  CHECK(cov >= 0.9);
}

}  // TEST_SUITE
