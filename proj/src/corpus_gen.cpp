#include "irobf/corpus_gen.hpp"

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "irobf/parser.hpp"

// The generator writes module text and parses it back, so "same GenSpec ->
// identical text" holds by construction. Programs are built from structured
// segments (straight runs, diamonds, triangles, switches, counted loops,
// may_throw sites, indirect-call selectors, one setjmp/longjmp pair) so that
// every run terminates: loops have constant trip counts <= 16, the call graph
// only points at higher function indices, division uses nonzero constant
// divisors, and pointers always reach live slots or real functions.
//
// Helper functions need room: setjmp requires n_functions >= 2 (a dedicated
// thrower), indirect calls require n_functions >= 4 (a two-target group at
// the top indices). Below those sizes the toggle degrades to a no-op.

namespace irobf {
namespace {

uint64_t udraw(std::mt19937_64& rng, uint64_t n) { return n ? rng() % n : 0; }

struct FnPlan {
  std::string name;
  std::vector<IrType> params;
  IrType ret = IrType::I64;
  bool thrower = false;
  bool icall_target = false;
  std::vector<int> forced;  // callees this function must invoke
  int call_cap = 2;
};

struct Builder {
  GenSpec spec;
  std::mt19937_64 rng;
  std::vector<FnPlan> plan;
  int thrower = -1;
  int ga = -1, gb = -1;  // indirect-call target pair

  // state for the function being generated
  int fi = 0;
  int budget = 8;
  std::string body, cur, cur_label;
  int closed = 0, regn = 0, lbln = 0, loopn = 0;
  int nslots = 2;
  bool has_fs = false, has_fp = false, has_jb = false;
  bool used_earlyret = false;
  std::vector<std::string> loop_slots;
  std::vector<std::string> ipool;  // i64 registers live in the current block
  int call_sites = 0, prints = 0;
  bool want_icall = false;
  std::vector<int> pending;

  explicit Builder(const GenSpec& s) : spec(s), rng(s.seed) {}

  uint64_t dr(uint64_t n) { return udraw(rng, n); }
  int64_t dri(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(dr(static_cast<uint64_t>(hi - lo + 1)));
  }
  bool chance(int pct) { return static_cast<int>(dr(100)) < pct; }
  static std::string istr(int64_t v) { return std::to_string(v); }

  std::string nr() { return "%v" + std::to_string(regn++); }
  std::string nl() { return "b" + std::to_string(lbln++); }

  void emit(const std::string& line) { cur += "  " + line + "\n"; }

  void seed_pool() {
    ipool.clear();
    const FnPlan& p = plan[fi];
    for (size_t k = 0; k < p.params.size(); ++k)
      if (p.params[k] == IrType::I64) ipool.push_back("%p" + std::to_string(k));
  }

  // Close the current block with `term` and open `next`.
  void close(const std::string& term, const std::string& next) {
    body += cur_label + ":\n" + cur + "  " + term + "\n";
    cur.clear();
    cur_label = next;
    ++closed;
    seed_pool();
  }

  bool fits(int cost) const { return closed + 1 + cost <= budget; }

  std::string rand_slot() {
    int k = static_cast<int>(dr(nslots + 1));
    return k == nslots ? std::string("res") : "s" + std::to_string(k);
  }

  std::string load_slot() {
    std::string s = rand_slot();
    std::string pr = nr(), v = nr();
    emit(pr + " = slot_addr %" + s);
    emit(v + " = load i64, " + pr);
    ipool.push_back(v);
    return v;
  }

  std::string ival() {
    int c = static_cast<int>(dr(10));
    if (c < 3) return istr(dri(-4, 12));
    if (c < 7 && !ipool.empty()) return ipool[dr(ipool.size())];
    return load_slot();
  }

  std::string ival_reg() {
    if (!ipool.empty() && chance(60)) return ipool[dr(ipool.size())];
    return load_slot();
  }

  // Compare a residue of a live value against a small bound so both branch
  // outcomes stay reachable even after values have grown large.
  std::string cond() {
    static const char* preds[] = {"slt", "sle", "sgt", "sge", "slt",
                                  "sle", "sgt", "sge", "eq",  "ne"};
    std::string a = ival_reg();
    std::string m = nr(), c = nr();
    // Residues of non-negative values land in [0, K); the bound must sit
    // strictly inside that range or the comparison degenerates to a constant.
    emit(m + " = srem i64 " + a + ", " + istr(dri(5, 9)));
    emit(c + " = icmp " + preds[dr(10)] + std::string(" i64 ") + m + ", " +
         istr(dri(1, 3)));
    ipool.push_back(m);
    return c;
  }

  // Fold v into a random slot so it influences the final result.
  void consume(const std::string& v) {
    std::string s = rand_slot();
    std::string pr = nr(), o = nr(), nv = nr();
    emit(pr + " = slot_addr %" + s);
    emit(o + " = load i64, " + pr);
    emit(nv + (chance(70) ? " = add i64 " : " = sub i64 ") + o + ", " + v);
    emit("store i64 " + nv + ", " + pr);
    ipool.push_back(o);
    ipool.push_back(nv);
  }

  void emit_call(int j) {
    const FnPlan& cp = plan[j];
    std::string argl;
    for (size_t k = 0; k < cp.params.size(); ++k) {
      if (k) argl += ", ";
      switch (cp.params[k]) {
        case IrType::I64:
          argl += ival_reg();  // registers carry data derived from inputs
          break;
        case IrType::I32:
        case IrType::I16:
        case IrType::I8: {
          std::string r = nr();
          emit(r + " = trunc i64 " + ival_reg() + " to " +
               type_name(cp.params[k]));
          argl += r;
          break;
        }
        case IrType::F64:
        case IrType::F32: {
          std::string r = nr();
          emit(r + " = sitofp i64 " + ival_reg() + " to " +
               type_name(cp.params[k]));
          argl += r;
          break;
        }
        case IrType::Ptr: {
          std::string r = nr();
          emit(r + " = slot_addr %s" + std::to_string(dr(nslots)));
          argl += r;
          break;
        }
        default:
          argl += "0";
          break;
      }
    }
    if (cp.ret == IrType::Void) {
      emit("call @" + cp.name + "(" + argl + ")");
    } else {
      std::string r = nr();
      emit(r + " = call @" + cp.name + "(" + argl + ")");
      if (cp.ret == IrType::I64) {
        ipool.push_back(r);
        consume(r);
      } else if (is_int(cp.ret)) {
        std::string w = nr();
        emit(w + " = zext " + std::string(type_name(cp.ret)) + " " + r +
             " to i64");
        ipool.push_back(w);
        consume(w);
      } else {
        std::string w = nr();
        emit(w + " = fptosi " + std::string(type_name(cp.ret)) + " " + r +
             " to i64");
        consume(w);
      }
    }
    ++call_sites;
  }

  // Optional extra call; mandated callees are emitted in the final block so
  // they can't get stranded inside a rarely taken arm. Extra sites repeat a
  // mandated callee or reach one step ahead — repeat edges and neighbor
  // edges barely constrain fusion pairing, long random edges do.
  void maybe_call() {
    if (call_sites + static_cast<int>(pending.size()) >= plan[fi].call_cap)
      return;
    std::vector<int> cands;
    if (!pending.empty()) {
      cands = pending;
    } else {
      for (int j = fi + 1;
           j < std::min(fi + 3, static_cast<int>(plan.size())); ++j)
        if (j != thrower) cands.push_back(j);
    }
    if (cands.empty()) return;
    int j = cands[dr(cands.size())];
    if (chance(55)) emit_call(j);
  }

  void op_batch(int n, bool in_loop) {
    for (int i = 0; i < n; ++i) {
      int k = static_cast<int>(dr(12));
      if (k < 3) {
        static const char* ops[] = {"add", "sub", "mul"};
        std::string a = ival_reg(), b = ival(), r = nr();
        emit(r + " = " + ops[dr(3)] + std::string(" i64 ") + a + ", " + b);
        ipool.push_back(r);
        if (chance(40)) consume(r);
      } else if (k == 3) {
        static const int64_t divs[] = {2, 3, 5, 7, -3, 9};
        std::string a = ival_reg(), r = nr();
        emit(r + (chance(50) ? " = sdiv i64 " : " = srem i64 ") + a + ", " +
             istr(divs[dr(6)]));
        ipool.push_back(r);
      } else if (k == 4) {
        std::string v = load_slot();
        std::string r = nr(), pr = nr();
        emit(r + " = add i64 " + v + ", " + istr(dri(1, 6)));
        emit(pr + " = slot_addr %" + rand_slot());
        emit("store i64 " + r + ", " + pr);
        ipool.push_back(r);
      } else if (k == 5) {
        const char* nt = chance(50) ? "i16" : "i32";
        std::string a = ival_reg(), t = nr(), w = nr();
        emit(t + " = trunc i64 " + a + " to " + nt);
        emit(w + " = zext " + std::string(nt) + " " + t + " to i64");
        ipool.push_back(w);
        if (chance(30)) consume(w);
      } else if (k == 6) {
        std::string c = cond(), w = nr();
        emit(w + " = zext i1 " + c + " to i64");
        consume(w);
      } else if (k == 7 && has_fs) {
        static const char* fops[] = {"fadd", "fmul", "fsub"};
        std::string pf = nr(), fv = nr(), fc = nr();
        char lit[32];
        std::snprintf(lit, sizeof lit, "%.1f", static_cast<double>(dri(1, 7)) / 2.0);
        emit(pf + " = slot_addr %fs");
        emit(fv + " = load f64, " + pf);
        emit(fc + " = " + fops[dr(3)] + std::string(" f64 ") + fv + ", " + lit);
        emit("store f64 " + fc + ", " + pf);
        if (chance(30)) {
          std::string iv = nr();
          emit(iv + " = fptosi f64 " + fc + " to i64");
          consume(iv);
        }
      } else if (k == 8 && spec.globals) {
        if (chance(60)) {
          std::string g = nr();
          emit(g + (chance(50) ? " = load i64, @g0" : " = load i64, @k0"));
          ipool.push_back(g);
          consume(g);
        } else if (!in_loop) {
          emit("store i64 " + ival_reg() + ", @g0");
        }
      } else if (k == 9 && !in_loop) {
        maybe_call();
      } else if (k == 10 && !in_loop && prints < 2) {
        emit("print i64 " + ival_reg());
        ++prints;
      } else {
        std::string a = ival_reg(), r = nr();
        emit(r + " = add i64 " + a + ", " + istr(dri(-3, 9)));
        ipool.push_back(r);
      }
    }
  }

  void seg_straight() {
    op_batch(static_cast<int>(dri(2, 5)), false);
    std::string n = nl();
    close("br " + n, n);
  }

  void seg_diamond() {
    std::string c = cond();
    std::string a = nl(), b = nl(), j = nl();
    close("condbr " + c + ", " + a + ", " + b, a);
    op_batch(static_cast<int>(dri(1, 3)), false);
    close("br " + j, b);
    op_batch(static_cast<int>(dri(1, 3)), false);
    close("br " + j, j);
  }

  void seg_triangle() {
    std::string c = cond();
    std::string a = nl(), j = nl();
    close("condbr " + c + ", " + a + ", " + j, a);
    op_batch(static_cast<int>(dri(1, 3)), false);
    close("br " + j, j);
  }

  void seg_switch() {
    int ncase = fits(5) && chance(40) ? 3 : 2;
    std::string v = ival_reg();
    std::string m = nr(), s = nr();
    emit(m + " = add i64 " + v + ", " + istr(dri(0, 3)));
    emit(s + " = srem i64 " + m + ", " + istr(ncase + 1));
    std::vector<std::string> arms;
    for (int i = 0; i < ncase; ++i) arms.push_back(nl());
    std::string d = nl(), j = nl();
    std::string t = "switch i64 " + s;
    for (int i = 0; i < ncase; ++i)
      t += ", [" + istr(i) + " -> " + arms[i] + "]";
    t += ", default " + d;
    close(t, arms[0]);
    for (int i = 0; i < ncase; ++i) {
      op_batch(1, false);
      close("br " + j, i + 1 < ncase ? arms[i + 1] : d);
    }
    op_batch(1, false);
    close("br " + j, j);
  }

  void seg_loop(int depth) {
    std::string iv = "i" + std::to_string(loopn++);
    loop_slots.push_back(iv);
    bool nest = depth == 0 && spec.loops && fits(6) && chance(25);
    bool obscure = chance(20);  // two-part step defeats trip-count analysis
    int64_t init = dri(-2, 4);
    int64_t step = obscure ? 2 : dri(1, 3);
    int64_t trips = dri(1, depth > 0 ? 6 : (nest ? 6 : 12));
    int64_t bound = init + trips * step;
    std::string ph = nr();
    emit(ph + " = slot_addr %" + iv);
    emit("store i64 " + istr(init) + ", " + ph);
    std::string h = nl(), b = nl(), x = nl();
    close("br " + h, h);
    std::string hp = nr(), hv = nr(), hc = nr();
    emit(hp + " = slot_addr %" + iv);
    emit(hv + " = load i64, " + hp);
    emit(hc + " = icmp slt i64 " + hv + ", " + istr(bound));
    close("condbr " + hc + ", " + b + ", " + x, b);
    op_batch(static_cast<int>(dri(1, 3)), true);
    if (nest) seg_loop(depth + 1);
    std::string sp = nr(), sv = nr();
    emit(sp + " = slot_addr %" + iv);
    emit(sv + " = load i64, " + sp);
    if (obscure) {
      std::string h1 = nr(), v2 = nr(), h2 = nr();
      emit(h1 + " = add i64 " + sv + ", 1");
      emit("store i64 " + h1 + ", " + sp);
      emit(v2 + " = load i64, " + sp);
      emit(h2 + " = add i64 " + v2 + ", 1");
      emit("store i64 " + h2 + ", " + sp);
    } else {
      std::string s1 = nr();
      emit(s1 + " = add i64 " + sv + ", " + istr(step));
      emit("store i64 " + s1 + ", " + sp);
    }
    close("br " + h, x);
  }

  void seg_maythrow() {
    std::string c = cond();
    if (chance(50)) {
      // Dedicated handler block, reachable only through the throw edge.
      std::string h = nl(), cont = nl();
      emit("may_throw " + c + ", " + h);
      op_batch(1, false);
      close("br " + cont, h);
      std::string pr = nr();
      emit(pr + " = slot_addr %" + rand_slot());
      emit("store i64 " + istr(dri(5, 9)) + ", " + pr);
      close("br " + cont, cont);
    } else {
      // Handler doubling as the join around the throwing block, so the
      // handler is not dominated by the throw site.
      std::string mtb = nl(), cont = nl();
      close("condbr " + c + ", " + mtb + ", " + cont, mtb);
      std::string c2 = cond();
      emit("may_throw " + c2 + ", " + cont);
      op_batch(1, false);
      close("br " + cont, cont);
      std::string pr = nr();
      emit(pr + " = slot_addr %" + rand_slot());
      emit("store i64 " + istr(dri(3, 7)) + ", " + pr);
    }
  }

  void seg_icall() {
    has_fp = true;
    std::string c = cond();
    std::string sa = nl(), sb = nl(), j = nl();
    close("condbr " + c + ", " + sa + ", " + sb, sa);
    std::string a1 = nr(), p1 = nr();
    emit(a1 + " = addr_of @" + plan[ga].name);
    emit(p1 + " = slot_addr %fp");
    emit("store ptr " + a1 + ", " + p1);
    close("br " + j, sb);
    std::string a2 = nr(), p2 = nr();
    emit(a2 + " = addr_of @" + plan[gb].name);
    emit(p2 + " = slot_addr %fp");
    emit("store ptr " + a2 + ", " + p2);
    close("br " + j, j);
    std::string pl = nr(), fv = nr(), rv = nr();
    emit(pl + " = slot_addr %fp");
    emit(fv + " = load ptr, " + pl);
    std::string arg = ival_reg();  // icall arguments must be registers
    emit(rv + " = icall " + fv + "(" + arg + ") -> i64");
    consume(rv);
  }

  void seg_setjmp() {
    has_jb = true;
    // Fresh block first: keeps the setjmp site out of the entry block, in
    // territory that dominator-subtree passes actually consider.
    std::string sb = nl();
    close("br " + sb, sb);
    std::string pj = nr(), t = nr(), tw = nr();
    emit(pj + " = slot_addr %jb");
    emit(t + " = setjmp " + pj);
    emit(tw + " = zext i32 " + t + " to i64");
    consume(tw);
    std::string c = nr();
    emit(c + " = icmp eq i32 " + t + ", 0");
    std::string sj = nl(), cont = nl();
    close("condbr " + c + ", " + sj + ", " + cont, sj);
    // Reduced argument keeps the thrower's branch balanced across inputs.
    std::string raw = ival_reg(), arg = nr();
    emit(arg + " = srem i64 " + raw + ", 7");
    std::string rv = nr();
    emit(rv + " = call @" + plan[thrower].name + "(" + pj + ", " + arg + ")");
    consume(rv);
    close("br " + cont, cont);
  }

  std::string thrower_text(const FnPlan& p) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "func @%s(%%p0: ptr, %%p1: i64) -> i64 {\n"
                  "b0:\n"
                  "  %%c = icmp sgt i64 %%p1, %lld\n"
                  "  condbr %%c, b1, b2\n"
                  "b1:\n"
                  "  longjmp %%p0, 5\n"
                  "  br b2\n"
                  "b2:\n"
                  "  %%r = mul i64 %%p1, 3\n"
                  "  ret i64 %%r\n"
                  "}\n\n",
                  p.name.c_str(), static_cast<long long>(dri(1, 5)));
    return buf;
  }

  // Emits the value materialization for a return and hands back the ret
  // line itself (main also prints, so every exit is observable).
  std::string ret_sequence() {
    const FnPlan& p = plan[fi];
    if (fi == 0) {
      std::string pr = nr(), rv = nr();
      emit(pr + " = slot_addr %res");
      emit(rv + " = load i64, " + pr);
      emit("print i64 " + rv);
      return "ret i64 " + rv;
    }
    if (p.ret == IrType::Void) return "ret";
    std::string pr = nr(), rv = nr();
    emit(pr + " = slot_addr %res");
    emit(rv + " = load i64, " + pr);
    if (p.ret == IrType::I64) return "ret i64 " + rv;
    std::string t = nr();
    if (is_int(p.ret))
      emit(t + " = trunc i64 " + rv + " to " + type_name(p.ret));
    else
      emit(t + " = sitofp i64 " + rv + " to " + type_name(p.ret));
    return "ret " + std::string(type_name(p.ret)) + " " + t;
  }

  // Guarded early return; gives functions a second exit so split regions
  // can carry several ways out.
  void seg_earlyret() {
    used_earlyret = true;
    std::string c = cond();
    std::string rb = nl(), cont = nl();
    close("condbr " + c + ", " + rb + ", " + cont, rb);
    // Mandated callees must run no matter which exit wins, so the early
    // path repeats the calls the final block makes on the normal path.
    for (int j : pending) emit_call(j);
    close(ret_sequence(), cont);
  }

  void pick_segment() {
    struct Cand {
      int weight;
      int cost;
      int id;
    };
    std::vector<Cand> cands;
    if (fits(1)) cands.push_back({30, 1, 0});
    if (fits(3)) cands.push_back({18, 3, 1});
    if (fits(2)) cands.push_back({14, 2, 2});
    if (fits(4)) cands.push_back({10, 4, 3});
    if (spec.loops && fits(3)) cands.push_back({16, 3, 4});
    if (spec.may_throw && fits(2)) cands.push_back({10, 2, 5});
    if (!used_earlyret && fits(2)) cands.push_back({6, 2, 6});
    if (cands.empty()) return;
    int total = 0;
    for (const auto& c : cands) total += c.weight;
    int r = static_cast<int>(dr(total));
    int id = cands.back().id;
    for (const auto& c : cands) {
      if (r < c.weight) {
        id = c.id;
        break;
      }
      r -= c.weight;
    }
    switch (id) {
      case 0: seg_straight(); break;
      case 1: seg_diamond(); break;
      case 2: seg_triangle(); break;
      case 3: seg_switch(); break;
      case 4: seg_loop(0); break;
      case 5: seg_maythrow(); break;
      case 6: seg_earlyret(); break;
    }
  }

  std::string gen_function(int idx) {
    fi = idx;
    const FnPlan& p = plan[idx];
    if (p.thrower) return thrower_text(p);

    body.clear();
    cur.clear();
    closed = regn = lbln = loopn = 0;
    call_sites = prints = 0;
    loop_slots.clear();
    pending = p.forced;
    nslots = 2 + static_cast<int>(dr(2));
    has_fs = chance(35);
    has_fp = has_jb = false;
    used_earlyret = false;
    budget = spec.max_blocks < 3 ? 3 : spec.max_blocks;

    cur_label = nl();
    seed_pool();

    // Entry: route parameters into slots so later blocks can reach them.
    // Every data slot gets parameter-derived content; a slot left at its
    // zero init would make downstream comparisons input-independent.
    std::vector<bool> seeded(nslots, false);
    for (size_t k = 0; k < p.params.size(); ++k) {
      std::string pr = "%p" + std::to_string(k);
      std::string tgt = "s" + std::to_string(k % nslots);
      switch (p.params[k]) {
        case IrType::I64: {
          std::string ap = nr();
          emit(ap + " = slot_addr %" + tgt);
          emit("store i64 " + pr + ", " + ap);
          seeded[k % nslots] = true;
          break;
        }
        case IrType::I32:
        case IrType::I16:
        case IrType::I8:
        case IrType::I1: {
          std::string w = nr(), ap = nr();
          emit(w + " = zext " + std::string(type_name(p.params[k])) + " " + pr +
               " to i64");
          emit(ap + " = slot_addr %" + tgt);
          emit("store i64 " + w + ", " + ap);
          ipool.push_back(w);
          seeded[k % nslots] = true;
          break;
        }
        case IrType::F64:
          if (has_fs) {
            std::string ap = nr();
            emit(ap + " = slot_addr %fs");
            emit("store f64 " + pr + ", " + ap);
            break;
          }
          [[fallthrough]];
        case IrType::F32: {
          std::string w = nr(), ap = nr();
          emit(w + " = fptosi " + std::string(type_name(p.params[k])) + " " +
               pr + " to i64");
          emit(ap + " = slot_addr %" + tgt);
          emit("store i64 " + w + ", " + ap);
          ipool.push_back(w);
          seeded[k % nslots] = true;
          break;
        }
        case IrType::Ptr: {
          // Internal convention: ptr arguments always point at i64 cells.
          std::string w = nr(), ap = nr();
          emit(w + " = load i64, " + pr);
          emit(ap + " = slot_addr %" + tgt);
          emit("store i64 " + w + ", " + ap);
          ipool.push_back(w);
          seeded[k % nslots] = true;
          break;
        }
        default:
          break;
      }
    }
    for (int k = 0; k < nslots; ++k) {
      if (seeded[k]) continue;
      std::string ap = nr();
      if (!ipool.empty()) {
        std::string mixed = nr();
        emit(mixed + " = add i64 " + ipool[dr(ipool.size())] + ", " +
             istr(dri(1, 9) + 3 * k));
        emit(ap + " = slot_addr %s" + std::to_string(k));
        emit("store i64 " + mixed + ", " + ap);
      } else {
        emit(ap + " = slot_addr %s" + std::to_string(k));
        emit("store i64 " + istr(dri(1, 9)) + ", " + ap);
      }
    }
    {
      std::string ap = nr();
      emit(ap + " = slot_addr %res");
      if (!ipool.empty()) {
        std::string mixed = nr();
        emit(mixed + " = add i64 " + ipool[dr(ipool.size())] + ", " +
             istr(dri(0, 9)));
        emit("store i64 " + mixed + ", " + ap);
      } else {
        emit("store i64 " + istr(dri(0, 9)) + ", " + ap);
      }
    }

    if (idx == 0 && thrower >= 0 && fits(3)) seg_setjmp();
    want_icall = ga >= 0 && idx < ga && (idx == 0 || chance(30));
    bool want_loop = spec.loops && idx == 0;
    bool want_mt = spec.may_throw && idx == 0;

    int segs = 1 + static_cast<int>(dr(5));
    for (int s = 0; s < segs; ++s) {
      if (want_icall && fits(3)) {
        seg_icall();
        want_icall = false;
        continue;
      }
      if (want_loop && fits(3)) {
        seg_loop(0);
        want_loop = false;
        continue;
      }
      if (want_mt && fits(2)) {
        seg_maythrow();
        want_mt = false;
        continue;
      }
      pick_segment();
    }
    if (want_icall && fits(3)) seg_icall();
    if (want_mt && fits(2)) seg_maythrow();

    // Remaining mandated calls go in the final block, unconditionally.
    while (!pending.empty()) {
      int j = pending.front();
      pending.erase(pending.begin());
      emit_call(j);
    }

    std::string ret_line = ret_sequence();
    body += cur_label + ":\n" + cur + "  " + ret_line + "\n";

    std::string text = "func @" + p.name + "(";
    for (size_t k = 0; k < p.params.size(); ++k) {
      if (k) text += ", ";
      text += "%p" + std::to_string(k) + ": " + type_name(p.params[k]);
    }
    text += ") -> " + std::string(type_name(p.ret)) + " {\n";
    text += "  slot %res: i64\n";
    for (int k = 0; k < nslots; ++k)
      text += "  slot %s" + std::to_string(k) + ": i64\n";
    if (has_fs) text += "  slot %fs: f64\n";
    if (has_fp) text += "  slot %fp: ptr\n";
    if (has_jb) text += "  slot %jb: i64\n";
    for (const auto& iv : loop_slots) text += "  slot %" + iv + ": i64\n";
    text += body + "}\n\n";
    return text;
  }

  void plan_module() {
    int n = spec.n_functions < 1 ? 1 : spec.n_functions;
    plan.resize(n);
    plan[0].name = "main";
    plan[0].params = {IrType::I64, IrType::I64};
    plan[0].ret = IrType::I64;
    plan[0].call_cap = 2;
    if (spec.setjmp && n >= 2) {
      thrower = 1;
      plan[1].name = "f1";
      plan[1].params = {IrType::Ptr, IrType::I64};
      plan[1].ret = IrType::I64;
      plan[1].thrower = true;
      plan[1].call_cap = 0;
    }
    if (spec.icalls && n >= 4) {
      ga = n - 2;
      gb = n - 1;
    }
    static const IrType ppool[] = {
        IrType::I64, IrType::I64, IrType::I64, IrType::I64, IrType::I32,
        IrType::I32, IrType::I16, IrType::I16, IrType::F64, IrType::F64,
        IrType::I8,  IrType::Ptr, IrType::F32};
    bool float_ret_due = false;
    for (int i = 1; i < n; ++i) {
      if (i == thrower) continue;
      FnPlan& p = plan[i];
      p.name = "f" + std::to_string(i);
      if (i == ga || i == gb) {
        p.params = {IrType::I64};
        p.ret = IrType::I64;
        p.icall_target = true;
        continue;
      }
      // Always at least one i64 parameter so input entropy reaches the body
      // and its branches can swing both ways.
      p.params.push_back(IrType::I64);
      int np = static_cast<int>(dr(4));
      for (int k = 0; k < np; ++k) p.params.push_back(ppool[dr(13)]);
      // Float returns come in adjacent pairs: a lone float-returning
      // function has no ret-compatible fusion partner among int returns,
      // and stranding one per module would drag the aggregate fusion ratio.
      int rw = static_cast<int>(dr(15));
      bool more_generics = i + 1 < (ga >= 0 ? ga : n);
      if (float_ret_due) {
        p.ret = IrType::F64;
        float_ret_due = false;
      } else if (rw >= 14 && more_generics) {
        p.ret = IrType::F64;
        float_ret_due = true;
      } else {
        p.ret = rw < 6    ? IrType::I64
                : rw < 9  ? IrType::I32
                : rw < 11 ? IrType::I16
                          : IrType::Void;
      }
    }
    // Give every function (except the thrower, which main's setjmp site
    // reaches) a designated caller so the whole module executes per run.
    // Prefer the nearest previous function: neighbor call edges keep the
    // pairing graph sparse (a direct call edge forbids fusing its endpoints),
    // where a hub fanning out of main would isolate half the module.
    std::vector<int> load(n, 0);
    for (int i = 1; i < n; ++i) {
      if (i == thrower) continue;
      std::vector<int> cands;
      for (int c = 0; c < i; ++c)
        if (c != thrower && load[c] < plan[c].call_cap) cands.push_back(c);
      if (cands.empty()) continue;
      int c = chance(75) ? cands.back() : cands[dr(cands.size())];
      plan[c].forced.push_back(i);
      ++load[c];
    }
  }

  std::string module_text() {
    plan_module();
    std::string out = "module gen" + std::to_string(spec.seed) + "\n\n";
    if (spec.globals) {
      out += "global @g0: i64 = " + istr(dri(-5, 20)) + "\n";
      out += "global @k0: i64 = " + istr(dri(1, 15)) + "\n\n";
    }
    for (int i = 0; i < static_cast<int>(plan.size()); ++i)
      out += gen_function(i);
    out += "export @main\n";
    if (ga >= 0 && chance(40)) out += "visible_ptr @" + plan[ga].name + "\n";
    return out;
  }
};

}  // namespace

IrModule generate(const GenSpec& spec) {
  Builder b(spec);
  return parse_module(b.module_text());
}

std::vector<std::vector<Value>> generate_inputs(const IrModule& m,
                                                const std::string& entry,
                                                int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Function* f = m.find_function(entry);
  std::vector<std::vector<Value>> out;
  out.reserve(n < 0 ? 0 : n);
  for (int i = 0; i < n; ++i) {
    std::vector<Value> v;
    if (f) {
      for (const auto& p : f->params) {
        switch (p.type) {
          case IrType::I1:
            v.push_back(Value::make_int(static_cast<int64_t>(udraw(rng, 2)),
                                        IrType::I1));
            break;
          case IrType::I8:
          case IrType::I16:
          case IrType::I32:
          case IrType::I64:
            v.push_back(Value::make_int(
                -8 + static_cast<int64_t>(udraw(rng, 33)), p.type));
            break;
          case IrType::F32:
          case IrType::F64:
            v.push_back(Value::make_float(
                (-16 + static_cast<int64_t>(udraw(rng, 49))) / 2.0, p.type));
            break;
          default:
            v.push_back(Value::null());
            break;
        }
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<GenSpec> standard_corpus_specs() {
  std::vector<GenSpec> v;
  v.reserve(200);
  for (int i = 0; i < 200; ++i) {
    GenSpec s;
    s.seed = 1000 + i;
    // Even function counts: an odd pool necessarily strands one function
    // per module, which alone would eat two thirds of the fusion-ratio
    // headroom the stats acceptance bar leaves.
    s.n_functions = 4 + 2 * ((i / 2) % 4);
    s.max_blocks = 8 + i % 9;
    s.loops = true;
    s.icalls = i % 2 == 0;
    s.setjmp = i % 3 == 0;
    s.may_throw = i % 4 != 3;
    s.globals = i % 5 != 4;
    v.push_back(s);
  }
  return v;
}

GenSpec diffing_genspec() {
  GenSpec s;
  s.seed = 4242;
  s.n_functions = 60;
  s.max_blocks = 14;
  return s;
}

}  // namespace irobf
