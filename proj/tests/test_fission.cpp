#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "irobf/analysis.hpp"
#include "irobf/corpus_gen.hpp"
#include "irobf/fission.hpp"
#include "irobf/interp.hpp"
#include "irobf/parser.hpp"
#include "irobf/printer.hpp"
#include "irobf/validator.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace irobf;
using namespace irobf::testing;

namespace {

struct FnAnalyses {
  DomTree dt;
  LoopInfo li;
  FreqMap fm;
};

FnAnalyses analyze(const Function& f, int64_t default_trip = 10) {
  FnAnalyses a;
  a.dt = dominator_tree(f);
  a.li = loop_info(f, a.dt, default_trip);
  a.fm = block_frequency(f, a.dt, a.li);
  return a;
}

// Number of exits of a split-out function: exit selectors are returned as
// i32 literals, and every code in [0, k) appears in at least one ret.
int sep_exit_count(const Function& f) {
  if (f.ret_type != IrType::I32) return f.ret_type == IrType::Void ? 1 : 0;
  int64_t mx = -1;
  for (const auto& b : f.blocks)
    if (b.term.kind == TermKind::Ret && b.term.has_value &&
        b.term.value.kind == Operand::Kind::ImmInt)
      mx = std::max(mx, b.term.value.ival);
  return static_cast<int>(mx + 1);
}

bool equivalent(const ExecResult& a, const ExecResult& b) {
  return a.trap == b.trap && a.exit_value == b.exit_value &&
         a.output_trace == b.output_trace;
}

std::set<std::string> block_labels(const Function& f) {
  std::set<std::string> out;
  for (const auto& b : f.blocks) out.insert(b.label);
  return out;
}

bool inserted_label(const std::string& l) { return l.rfind("fis.", 0) == 0; }

}  // namespace

TEST_SUITE("fission") {

TEST_CASE("worked example: region identification") {
  IrModule m = parse_fixture(kCalFileText);
  const Function& f = m.functions[0];
  auto a = analyze(f);

  FissionStats st;
  auto regions = identify_regions(f, a.dt, a.li, a.fm, FissionConfig{}, &st);

  // Selection order is by value: the loop-bearing subtree {bb5..bb8} scores
  // 4 / (1/2) = 8, the hash subtree {bb2,bb3} scores 2 / (1/2) = 4.
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].member_labels ==
        std::vector<std::string>{"bb5", "bb6", "bb7", "bb8"});
  CHECK(regions[0].head_label == "bb5");
  CHECK(regions[0].effect == 4);
  CHECK(regions[0].cost == Rat(1, 2));
  CHECK(regions[1].member_labels == std::vector<std::string>{"bb2", "bb3"});
  CHECK(regions[1].head_label == "bb2");
  CHECK(regions[1].effect == 2);
  CHECK(regions[1].cost == Rat(1, 2));

  // {bb5..bb8} leaves only through bb8 -> bb9.
  REQUIRE(regions[0].exits.size() == 1);
  CHECK(regions[0].exits[0].source_label == "bb8");
  CHECK(regions[0].exits[0].target == "bb9");
  CHECK_FALSE(regions[0].exits[0].is_ret);

  // {bb2,bb3}: exit 0 continues to the bb5 side, exit 1 to the bb9 side.
  REQUIRE(regions[1].exits.size() == 2);
  CHECK(regions[1].exits[0].source_label == "bb3");
  CHECK(regions[1].exits[0].target == "bb5");
  CHECK(regions[1].exits[1].source_label == "bb3");
  CHECK(regions[1].exits[1].target == "bb9");

  // bb9 and bb4 become undersized maxima after the two picks.
  CHECK(st.skipped_min_effect == 2);
  CHECK(st.regions_chosen == 2);
}

TEST_CASE("hot loop body loses to cold subtree") {
  const char* text = R"(module hotcold
func @g(%x: i64) -> i64 {
b0:
  %c = icmp sge i64 %x, 5
  br b1
b1:
  br b2
b2:
  condbr %c, b1, b3
b3:
  condbr %c, b4, b5
b4:
  br b5
b5:
  ret i64 %x
}
)";
  IrModule m = parse_fixture(text);
  const Function& f = m.functions[0];
  auto a = analyze(f);

  // The loop body subtree's head runs ten times per call; the cold subtree
  // behind the loop exit runs half a time.
  CHECK(a.fm.freq[2] == Rat(10));
  CHECK(a.fm.freq[3] == Rat(1, 2));

  auto regions = identify_regions(f, a.dt, a.li, a.fm, FissionConfig{});
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].members == std::vector<int>{3, 4, 5});
  CHECK(regions[0].cost == Rat(1, 2));
}

TEST_CASE("worked example: whole-module split structure") {
  IrModule m = parse_fixture(kCalFileText);
  FissionOutcome out = run_fission(m);

  // One original function yields two split-out functions, numbered along
  // the original block layout: .sep.0 = {bb2,bb3}, .sep.1 = {bb5..bb8}.
  REQUIRE(out.module.functions.size() == 3);
  const Function& rem = out.module.functions[0];
  const Function* sep0 = out.module.find_function("cal_file.sep.0");
  const Function* sep1 = out.module.find_function("cal_file.sep.1");
  REQUIRE(sep0 != nullptr);
  REQUIRE(sep1 != nullptr);

  CHECK(out.stats.ori_funcs == 1);
  CHECK(out.stats.sep_funcs == 2);
  CHECK(out.stats.fission_ratio == doctest::Approx(2.0));
  CHECK(out.stats.mean_sep_blocks == doctest::Approx(3.0));
  CHECK(out.stats.mean_removed_ratio == doctest::Approx(6.0 / 9.0));
  CHECK(out.stats.demoted_registers == 2);   // %name, %ch
  CHECK(out.stats.moved_private_slots == 2); // cnt, idx
  CHECK(out.stats.multi_exit_regions == 1);
  CHECK(out.stats.single_exit_regions == 1);
  CHECK(out.stats.ret_exit_regions == 0);
  CHECK(out.stats.sep_entry_glue == 0);

  CHECK(out.provenance.at("cal_file").role == "remFunc");
  CHECK(out.provenance.at("cal_file.sep.0").role == "sepFunc");
  CHECK(out.provenance.at("cal_file.sep.1").role == "sepFunc");
  CHECK(out.provenance.at("cal_file.sep.1").origins ==
        std::vector<std::string>{"cal_file"});

  // sep.0 returns the exit selector; sep.1 has one exit and returns void.
  CHECK(sep0->ret_type == IrType::I32);
  CHECK(sep1->ret_type == IrType::Void);
  CHECK(sep_exit_count(*sep0) == 2);
  CHECK(sep_exit_count(*sep1) == 1);

  // The dispatch blocks keep the head labels and route exit codes to the
  // original targets: case 0 -> bb5 side, default (code 1) -> bb9 side.
  const BasicBlock* d0 = rem.find_block("bb2");
  REQUIRE(d0 != nullptr);
  REQUIRE(d0->term.kind == TermKind::Switch);
  REQUIRE(d0->term.cases.size() == 1);
  CHECK(d0->term.cases[0].value == 0);
  CHECK(d0->term.cases[0].target == "bb5");
  CHECK(d0->term.default_target == "bb9");
  CHECK(d0->insts.back().op == Opcode::Call);
  CHECK(d0->insts.back().callee == "cal_file.sep.0");

  const BasicBlock* d1 = rem.find_block("bb5");
  REQUIRE(d1 != nullptr);
  CHECK(d1->term.kind == TermKind::Br);
  CHECK(d1->term.targets == std::vector<std::string>{"bb9"});
  CHECK(d1->insts.back().callee == "cal_file.sep.1");

  // Loop-count slots live only inside the loop region and moved with it.
  auto slot_names = [](const Function& fn) {
    std::set<std::string> s;
    for (const auto& d : fn.slots) s.insert(d.name);
    return s;
  };
  CHECK(slot_names(*sep1).count("cnt") == 1);
  CHECK(slot_names(*sep1).count("idx") == 1);
  CHECK(slot_names(rem).count("cnt") == 0);
  CHECK(slot_names(rem).count("idx") == 0);
  CHECK(slot_names(rem).count("res") == 1);  // still shared

  // All cross-boundary traffic is pointer parameters.
  for (const Function* s : {sep0, sep1}) {
    CHECK(s->params.size() == 3);
    for (const auto& p : s->params) CHECK(p.type == IrType::Ptr);
  }

  // Block accounting: original labels are partitioned between the remnant
  // and the split-out bodies, overlapping exactly on the dispatch heads.
  std::set<std::string> orig = block_labels(m.functions[0]);
  std::set<std::string> reml = block_labels(rem);
  std::set<std::string> s0 = block_labels(*sep0), s1 = block_labels(*sep1);
  int covered = 0;
  for (const auto& l : orig) {
    bool in_rem = reml.count(l), in_sep = s0.count(l) || s1.count(l);
    CHECK((in_rem || in_sep));
    if (in_rem && in_sep) CHECK((l == "bb2" || l == "bb5"));
    ++covered;
  }
  CHECK(covered == 9);
}

TEST_CASE("worked example: behavior preserved on a grid of inputs") {
  IrModule m = parse_fixture(kCalFileText);
  FissionOutcome out = run_fission(m);
  Interp base(m), split(out.module);

  CheckSpec spec;
  spec.exit_ranges["cal_file.sep.0"] = 2;
  int runs = 0;
  for (int64_t name = -3; name <= 8; ++name)
    for (int64_t ch : {0, 5, 37, 96}) {
      std::vector<Value> args{Value::make_int(name, IrType::I64),
                              Value::make_int(ch, IrType::I64)};
      ExecResult r0 = base.run("cal_file", args);
      CheckReport rep;
      ExecResult r1 = split.run_checked("cal_file", args, RunLimits{}, spec, rep);
      CHECK(equivalent(r0, r1));
      CHECK(rep.violations.empty());
      ++runs;
    }
  CHECK(runs == 48);
}

TEST_CASE("region with an original return and a side exit") {
  const char* text = R"(module mix
func @mix(%x: i64) -> i64 {
b0:
  %c = icmp slt i64 %x, 3
  condbr %c, b1, b4
b1:
  %d = icmp slt i64 %x, 1
  condbr %d, b2, b3
b2:
  %dbl = mul i64 %x, 2
  ret i64 %dbl
b3:
  br b4
b4:
  %y = add i64 %x, 7
  ret i64 %y
}
)";
  IrModule m = parse_fixture(text);
  FissionOutcome out = run_fission(m);
  REQUIRE(out.stats.sep_funcs == 1);
  const Function* sep = out.module.find_function("mix.sep.0");
  REQUIRE(sep != nullptr);
  CHECK(out.stats.ret_exit_regions == 1);
  CHECK(out.stats.multi_exit_regions == 1);
  CHECK(sep_exit_count(*sep) == 2);

  // Exit 0 is the in-region return: the remnant's dispatch routes it to a
  // fresh block that loads the routed return value.
  const Function& rem = out.module.functions[0];
  const BasicBlock* disp = rem.find_block("b1");
  REQUIRE(disp != nullptr);
  REQUIRE(disp->term.kind == TermKind::Switch);
  const BasicBlock* retb = rem.find_block(disp->term.cases[0].target);
  REQUIRE(retb != nullptr);
  CHECK(inserted_label(retb->label));
  REQUIRE(retb->term.kind == TermKind::Ret);
  CHECK(retb->insts.size() == 2);
  CHECK(retb->insts[1].op == Opcode::Load);
  CHECK(disp->term.default_target == "b4");

  Interp base(m), split(out.module);
  CheckSpec spec;
  spec.exit_ranges["mix.sep.0"] = 2;
  for (int64_t x = -5; x <= 10; ++x) {
    std::vector<Value> args{Value::make_int(x, IrType::I64)};
    CheckReport rep;
    CHECK(equivalent(base.run("mix", args),
                     split.run_checked("mix", args, RunLimits{}, spec, rep)));
    CHECK(rep.violations.empty());
  }
}

TEST_CASE("region that never hands control back") {
  const char* text = R"(module spin
func @spin(%x: i64) -> i64 {
b0:
  br b1
b1:
  br b2
b2:
  br b1
}
)";
  IrModule m = parse_fixture(text);
  FissionOutcome out = run_fission(m);
  REQUIRE(out.stats.sep_funcs == 1);
  CHECK(out.stats.no_exit_regions == 1);
  // The loop re-enters its head, so the split-out body needs a synthetic
  // entry block in front of it.
  CHECK(out.stats.sep_entry_glue == 1);
  const Function* sep = out.module.find_function("spin.sep.0");
  REQUIRE(sep != nullptr);
  CHECK(sep->ret_type == IrType::Void);
  CHECK(inserted_label(sep->blocks[0].label));

  // Both versions run forever; the step budget cuts them off identically.
  RunLimits lim;
  lim.max_steps = 20'000;
  std::vector<Value> args{Value::make_int(1, IrType::I64)};
  ExecResult r0 = run_module(m, "spin", args, lim);
  ExecResult r1 = run_module(out.module, "spin", args, lim);
  CHECK(r0.trap == TrapKind::StepLimit);
  CHECK(r1.trap == TrapKind::StepLimit);
  CHECK(r0.output_trace == r1.output_trace);
}

TEST_CASE("selection matches the exhaustive oracle on random CFGs") {
  FissionConfig cfg;
  int with_regions = 0;
  for (uint64_t seed = 1; seed <= 120; ++seed) {
    IrModule m = random_cfg_module(seed, 12);
    const Function& f = m.functions[0];
    auto a = analyze(f, cfg.default_trip_count);
    auto impl = identify_regions(f, a.dt, a.li, a.fm, cfg);
    auto want = alg1_oracle(f, cfg.min_effect, cfg.default_trip_count);
    REQUIRE(impl.size() == want.size());
    for (size_t i = 0; i < impl.size(); ++i)
      CHECK(impl[i].members == want[i]);
    if (!impl.empty()) ++with_regions;
  }
  CHECK(with_regions > 60);  // the comparison must not be vacuous
}

TEST_CASE("identified regions satisfy their structural invariants") {
  for (uint64_t seed = 200; seed < 230; ++seed) {
    IrModule m = random_cfg_module(seed, 12);
    const Function& f = m.functions[0];
    auto a = analyze(f);
    auto regions = identify_regions(f, a.dt, a.li, a.fm, FissionConfig{});
    std::set<int> all;
    for (const Region& r : regions) {
      CHECK(r.effect == static_cast<int>(r.members.size()));
      CHECK(r.effect >= 2);
      CHECK(r.cost > Rat(0));
      CHECK(r.members.size() < f.blocks.size());
      for (int b : r.members) {
        CHECK(a.dt.dominates(r.head, b));
        CHECK(all.insert(b).second);  // regions never overlap
      }
      for (size_t i = 1; i < r.exits.size(); ++i) {
        const auto& p = r.exits[i - 1];
        const auto& q = r.exits[i];
        CHECK(std::tie(p.source, p.is_ret, p.target) <=
              std::tie(q.source, q.is_ret, q.target));
      }
      for (const auto& e : r.exits) {
        bool src_in = std::binary_search(r.members.begin(), r.members.end(),
                                         e.source);
        CHECK(src_in);
        if (!e.is_ret) {
          int t = f.block_index(e.target);
          CHECK(t >= 0);
          CHECK_FALSE(std::binary_search(r.members.begin(), r.members.end(), t));
        }
      }
    }
  }
}

TEST_CASE("corpus programs keep their behavior through fission") {
  auto specs = standard_corpus_specs();
  FissionStats total;
  int checked_modules = 0, runs = 0;
  for (size_t i = 0; i < specs.size(); i += 10) {
    IrModule m = generate(specs[i]);
    FissionOutcome out = run_fission(m);

    // Accumulate the exercise counters for the coverage assertions below.
    const FissionStats& s = out.stats;
    total.skipped_min_effect += s.skipped_min_effect;
    total.skipped_setjmp += s.skipped_setjmp;
    total.skipped_handler_split += s.skipped_handler_split;
    total.multi_exit_regions += s.multi_exit_regions;
    total.single_exit_regions += s.single_exit_regions;
    total.ret_exit_regions += s.ret_exit_regions;
    total.demoted_registers += s.demoted_registers;
    total.moved_private_slots += s.moved_private_slots;
    total.sep_entry_glue += s.sep_entry_glue;
    total.sep_funcs += s.sep_funcs;
    total.ori_funcs += s.ori_funcs;

    // The remnant plus the split-out bodies repartition the original
    // blocks; split-off entries overlap the remnant only at dispatch heads.
    for (const Function& fo : m.functions) {
      std::set<std::string> orig = block_labels(fo);
      const Function* rem = out.module.find_function(fo.name);
      REQUIRE(rem != nullptr);
      std::set<std::string> seen;
      for (const auto& l : block_labels(*rem))
        if (orig.count(l)) seen.insert(l);
      int sep_blocks = 0;
      for (const Function& fn : out.module.functions) {
        if (out.provenance.at(fn.name).role != "sepFunc") continue;
        if (out.provenance.at(fn.name).origins[0] != fo.name) continue;
        for (const auto& l : block_labels(fn))
          if (!inserted_label(l)) {
            CHECK(orig.count(l) == 1);
            ++sep_blocks;
            seen.insert(l);
          }
      }
      CHECK(seen.size() == orig.size());
      (void)sep_blocks;
    }

    // Dynamic check: identical traces, exit values and traps, with exit
    // selectors staying in range.
    CheckSpec spec;
    for (const Function& fn : out.module.functions)
      if (out.provenance.at(fn.name).role == "sepFunc" &&
          fn.ret_type == IrType::I32)
        spec.exit_ranges[fn.name] = sep_exit_count(fn);

    Interp base(m), split(out.module);
    auto inputs = generate_inputs(m, "main", 10, 900 + i);
    for (const auto& in : inputs) {
      ExecResult r0 = base.run("main", in);
      CheckReport rep;
      ExecResult r1 = split.run_checked("main", in, RunLimits{}, spec, rep);
      CHECK(equivalent(r0, r1));
      CHECK(rep.violations.empty());
      ++runs;
    }
    ++checked_modules;
  }
  CHECK(checked_modules == 20);
  CHECK(runs == 200);

  // Every selection and outlining path fires somewhere in the corpus.
  CHECK(total.sep_funcs > 0);
  CHECK(total.skipped_min_effect > 0);
  CHECK(total.skipped_setjmp > 0);
  CHECK(total.skipped_handler_split > 0);
  CHECK(total.multi_exit_regions > 0);
  CHECK(total.single_exit_regions > 0);
  CHECK(total.ret_exit_regions > 0);
  CHECK(total.demoted_registers > 0);
  CHECK(total.moved_private_slots > 0);
  CHECK(total.sep_entry_glue > 0);
}

TEST_CASE("no split function contains setjmp or a cross-function handler") {
  auto specs = standard_corpus_specs();
  for (size_t i = 0; i < specs.size(); i += 25) {
    IrModule m = generate(specs[i]);
    FissionOutcome out = run_fission(m);
    for (const Function& fn : out.module.functions) {
      bool is_sep = out.provenance.at(fn.name).role == "sepFunc";
      std::set<std::string> labels = block_labels(fn);
      for (const auto& b : fn.blocks)
        for (const auto& in : b.insts) {
          if (in.op == Opcode::Setjmp) CHECK_FALSE(is_sep);
          if (in.op == Opcode::MayThrow) CHECK(labels.count(in.handler) == 1);
        }
    }
  }
}

TEST_CASE("fission is deterministic") {
  auto specs = standard_corpus_specs();
  IrModule m = generate(specs[3]);
  std::string a = print_module(run_fission(m).module);
  std::string b = print_module(run_fission(m).module);
  CHECK(a == b);
}

TEST_CASE("modules with nothing to split pass through") {
  IrModule m = parse_fixture(kBarFooText);  // 1-block functions only
  FissionOutcome out = run_fission(m);
  CHECK(out.stats.sep_funcs == 0);
  CHECK(out.stats.fission_ratio == doctest::Approx(0.0));
  CHECK(out.module.functions.size() == m.functions.size());
  for (const auto& [name, prov] : out.provenance)
    CHECK(prov.role == "unchanged");
  CHECK(print_module(out.module) == print_module(m));
}

}  // TEST_SUITE