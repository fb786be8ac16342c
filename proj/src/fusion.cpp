#include "irobf/fusion.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>

#include "irobf/validator.hpp"

namespace irobf {

namespace {

// Deterministic bounded draw; bias is irrelevant here, reproducibility isn't.
uint64_t draw(std::mt19937_64& rng, uint64_t n) { return n ? rng() % n : 0; }

Operand zero_operand(IrType t) {
  if (t == IrType::Ptr) return Operand::null_ptr();
  if (is_float(t)) return Operand::imm_float(0.0);
  return Operand::imm_int(0);
}

Instruction make_slot_addr(std::string result, std::string slot) {
  Instruction in;
  in.op = Opcode::SlotAddr;
  in.result = std::move(result);
  in.type = IrType::Ptr;
  in.slot = std::move(slot);
  return in;
}

Instruction make_store(IrType t, Operand value, Operand addr) {
  Instruction in;
  in.op = Opcode::Store;
  in.type = t;
  in.args = {std::move(value), std::move(addr)};
  return in;
}

Instruction make_load(std::string result, IrType t, Operand addr) {
  Instruction in;
  in.op = Opcode::Load;
  in.result = std::move(result);
  in.type = t;
  in.args = {std::move(addr)};
  return in;
}

Instruction make_resize(Opcode op, std::string result, IrType from, Operand v,
                        IrType to) {
  Instruction in;
  in.op = op;
  in.result = std::move(result);
  in.type = from;
  in.to_type = to;
  in.args = {std::move(v)};
  return in;
}

// Fresh names that cannot collide with any register, parameter or slot of
// the function they are inserted into.
struct NameSupply {
  std::set<std::string> used;
  int n = 0;
  explicit NameSupply(const Function& f) {
    for (const auto& p : f.params) used.insert(p.name);
    for (const auto& s : f.slots) used.insert(s.name);
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.has_result()) used.insert(in.result);
  }
  std::string fresh(const std::string& base) {
    for (;;) {
      std::string c = base + std::to_string(n++);
      if (used.insert(c).second) return c;
    }
  }
};

bool eligible_fn(const Function& f) {
  return !f.is_external && !f.is_variadic && !f.blocks.empty();
}

bool calls_directly(const Function& f, const std::string& callee) {
  for (const auto& b : f.blocks)
    for (const auto& in : b.insts)
      if (in.op == Opcode::Call && in.callee == callee) return true;
  return false;
}

// Maximum cardinality matching on a general graph (blossom contraction).
// Pool sizes are small (tens of functions), so the O(V^3) classic is plenty;
// a plain greedy pass can strand a quarter of an awkward pool, and stranded
// functions cost fusion ratio directly.
class MaxMatcher {
 public:
  explicit MaxMatcher(int n) : n_(n), adj_(n), match_(n, -1), p_(n), base_(n) {}
  void add_edge(int a, int b) {
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }
  void seed(int a, int b) { match_[a] = b, match_[b] = a; }
  void run() {
    for (int v = 0; v < n_; ++v)
      if (match_[v] < 0) augment(v);
  }
  int match(int v) const { return match_[v]; }

 private:
  int n_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> match_, p_, base_;

  int lca(int a, int b) {
    std::vector<bool> used(n_, false);
    for (;;) {
      a = base_[a];
      used[a] = true;
      if (match_[a] < 0) break;
      a = p_[match_[a]];
    }
    for (;;) {
      b = base_[b];
      if (used[b]) return b;
      b = p_[match_[b]];
    }
  }
  void mark_path(std::vector<bool>& blossom, int v, int b, int child) {
    while (base_[v] != b) {
      blossom[base_[v]] = true;
      blossom[base_[match_[v]]] = true;
      p_[v] = child;
      child = match_[v];
      v = p_[match_[v]];
    }
  }
  int find_path(int root) {
    std::vector<bool> used(n_, false);
    std::fill(p_.begin(), p_.end(), -1);
    for (int i = 0; i < n_; ++i) base_[i] = i;
    used[root] = true;
    std::vector<int> q = {root};
    for (size_t qi = 0; qi < q.size(); ++qi) {
      int v = q[qi];
      for (int to : adj_[v]) {
        if (base_[v] == base_[to] || match_[v] == to) continue;
        if (to == root || (match_[to] >= 0 && p_[match_[to]] >= 0)) {
          int cur = lca(v, to);
          std::vector<bool> blossom(n_, false);
          mark_path(blossom, v, cur, to);
          mark_path(blossom, to, cur, v);
          for (int i = 0; i < n_; ++i)
            if (blossom[base_[i]]) {
              base_[i] = cur;
              if (!used[i]) {
                used[i] = true;
                q.push_back(i);
              }
            }
        } else if (p_[to] < 0) {
          p_[to] = v;
          if (match_[to] < 0) return to;
          used[match_[to]] = true;
          q.push_back(match_[to]);
        }
      }
    }
    return -1;
  }
  void augment(int root) {
    int v = find_path(root);
    while (v >= 0) {  // every vertex on the path has p_ set; root ends it
      int pv = p_[v], next = match_[pv];
      match_[v] = pv;
      match_[pv] = v;
      v = next;
    }
  }
};

}  // namespace

int FusionPair::eliminated() const {
  int two = 0;
  for (const auto& mp : merged_params)
    if (mp.left_source && mp.right_source) ++two;
  return two;
}

std::optional<IrType> type_compatible(IrType a, IrType b) {
  if (a == IrType::Void) return b;
  if (b == IrType::Void) return a;
  if (is_int(a) && is_int(b)) return type_rank(a) >= type_rank(b) ? a : b;
  if (is_float(a) && is_float(b)) return type_rank(a) >= type_rank(b) ? a : b;
  if (a == IrType::Ptr && b == IrType::Ptr) return IrType::Ptr;
  return std::nullopt;
}

bool innocuous_block(const Function& f, const BasicBlock& b) {
  // Only plain fallthrough blocks can be re-terminated with a ctrl dispatch,
  // and a self-loop would capture the foreign path forever.
  if (b.term.kind != TermKind::Br || b.term.targets[0] == b.label) return false;
  std::set<std::string> params;
  for (const auto& p : f.params) params.insert(p.name);
  std::set<std::string> local;
  std::map<std::string, std::string> slot_of;  // in-block slot_addr results
  auto reg_ok = [&](const Operand& o) {
    return o.kind != Operand::Kind::Reg || local.count(o.name) ||
           params.count(o.name);
  };
  auto own_cell_ok = [&](const Operand& addr, IrType access) {
    if (addr.kind != Operand::Kind::Reg) return false;
    auto it = slot_of.find(addr.name);
    if (it == slot_of.end()) return false;
    int si = f.slot_index(it->second);
    if (si < 0) return false;
    IrType st = f.slots[si].type;
    return (is_int(access) && is_int(st)) || (is_float(access) && is_float(st)) ||
           (access == IrType::Ptr && st == IrType::Ptr);
  };
  for (const auto& in : b.insts) {
    switch (in.op) {
      case Opcode::Const:
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul:
      case Opcode::Icmp:
      case Opcode::Fadd:
      case Opcode::Fsub:
      case Opcode::Fmul:
      case Opcode::Fdiv:
      case Opcode::Fcmp:
      case Opcode::Zext:
      case Opcode::Trunc:
      case Opcode::Sitofp:
      case Opcode::Fptosi:
      case Opcode::SlotAddr:
      case Opcode::AddrOfFunc:
        break;
      case Opcode::Sdiv:
      case Opcode::Srem:
        // Division only with a provably nonzero divisor.
        if (in.args[1].kind != Operand::Kind::ImmInt || in.args[1].ival == 0)
          return false;
        break;
      case Opcode::Load:
        // Globals are statically type-matched; slot cells must agree in kind
        // or the load would trap. Foreign pointers may dangle.
        if (in.args[0].kind != Operand::Kind::Global &&
            !own_cell_ok(in.args[0], in.type))
          return false;
        break;
      case Opcode::Store:
        // Writes are tolerable only into the block's own local cells: a
        // global or a caller pointer would leak the foreign execution.
        if (!own_cell_ok(in.args[1], in.type)) return false;
        break;
      default:
        return false;  // calls, prints, jumps, throws: observable effects
    }
    for (const auto& o : in.args)
      if (!reg_ok(o)) return false;
    if (in.has_result()) local.insert(in.result);
    if (in.op == Opcode::SlotAddr && in.has_result())
      slot_of[in.result] = in.slot;
  }
  return true;
}

int count_innocuous_blocks(const Function& f) {
  int n = 0;
  for (const auto& b : f.blocks)
    if (innocuous_block(f, b)) ++n;
  return n;
}

FusionPair compress_params(const Function& left, const Function& right) {
  auto ret = type_compatible(left.ret_type, right.ret_type);
  if (!ret)
    throw std::runtime_error("fusion: incompatible return types for @" +
                             left.name + " x @" + right.name);
  int nl = static_cast<int>(left.params.size());
  int nr = static_cast<int>(right.params.size());
  // dp[i][j] = maximum order-preserving compatible matching of left[i:] with
  // right[j:]. Compatibility is by kind, so this is exactly an LCS over the
  // kind sequences and the greedy walk below realizes the maximum.
  std::vector<std::vector<int>> dp(nl + 1, std::vector<int>(nr + 1, 0));
  for (int i = nl - 1; i >= 0; --i)
    for (int j = nr - 1; j >= 0; --j) {
      int best = std::max(dp[i + 1][j], dp[i][j + 1]);
      if (type_compatible(left.params[i].type, right.params[j].type))
        best = std::max(best, 1 + dp[i + 1][j + 1]);
      dp[i][j] = best;
    }
  std::vector<std::pair<int, int>> matches;
  for (int i = 0, j = 0; i < nl && j < nr && dp[i][j] > 0;) {
    if (type_compatible(left.params[i].type, right.params[j].type) &&
        1 + dp[i + 1][j + 1] == dp[i][j]) {
      matches.push_back({i, j});
      ++i, ++j;
    } else if (dp[i + 1][j] >= dp[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }

  FusionPair p;
  p.left = left.name;
  p.right = right.name;
  p.merged_return = *ret;
  p.positional = true;
  // Layout: before each matched pair flush the unmatched parameters that
  // precede it (left side first), keeping both sides in original order;
  // leftover tails follow the last match.
  int li = 0, ri = 0;
  auto flush = [&](int lu, int ru) {
    for (; li < lu; ++li)
      p.merged_params.push_back({left.params[li].type, li, std::nullopt});
    for (; ri < ru; ++ri)
      p.merged_params.push_back({right.params[ri].type, std::nullopt, ri});
  };
  for (auto [ml, mr] : matches) {
    flush(ml, mr);
    if (ml != mr) p.positional = false;
    p.merged_params.push_back(
        {*type_compatible(left.params[ml].type, right.params[mr].type), ml, mr});
    li = ml + 1;
    ri = mr + 1;
  }
  flush(nl, nr);
  return p;
}

std::vector<FusionPair> select_pairs(const IrModule& m,
                                     const std::set<std::string>& pool,
                                     const FusionConfig& cfg, uint64_t rng_seed,
                                     FusionStats* stats) {
  std::vector<const Function*> cand;
  for (const auto& f : m.functions)
    if (pool.count(f.name) && eligible_fn(f)) cand.push_back(&f);
  // The shuffle is the randomness: it decides which of the many maximum
  // pairings gets picked and which side of each pair becomes ctrl = 0.
  std::mt19937_64 rng(rng_seed);
  for (size_t i = cand.size(); i > 1; --i)
    std::swap(cand[i - 1], cand[draw(rng, i)]);
  int n = static_cast<int>(cand.size());

  auto constraints_ok = [&](const Function& a, const Function& b) {
    if (!type_compatible(a.ret_type, b.ret_type)) return false;
    return !calls_directly(a, b.name) && !calls_directly(b, a.name);
  };

  // Pair up as many functions as the constraints admit. The first round
  // matches only pairs whose fused parameter count stays within the
  // register-passing preference; the second extends that matching to a
  // maximum over all admissible pairs (augmenting never shrinks it).
  MaxMatcher fit(n), full(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!constraints_ok(*cand[i], *cand[j])) continue;
      full.add_edge(i, j);
      FusionPair p = compress_params(*cand[i], *cand[j]);
      if (static_cast<int>(p.merged_params.size()) + 1 <= cfg.max_params)
        fit.add_edge(i, j);
    }
  fit.run();
  for (int i = 0; i < n; ++i)
    if (fit.match(i) > i) full.seed(i, fit.match(i));
  full.run();

  std::vector<FusionPair> out;
  for (int i = 0; i < n; ++i) {
    int j = full.match(i);
    if (j <= i) continue;
    FusionPair p = compress_params(*cand[i], *cand[j]);
    if (stats) {
      if (static_cast<int>(p.merged_params.size()) + 1 > cfg.max_params)
        stats->pairs_over_param_pref++;
      if (p.eliminated() == 0) stats->pairs_zero_compression++;
      stats->params_eliminated += p.eliminated();
    }
    out.push_back(std::move(p));
  }
  return out;
}

void fuse_pair(IrModule& m, const FusionPair& p,
               const std::set<std::string>& escaping, bool deep,
               FusionStats* stats, ProvenanceMap* prov) {
  auto bad = [&](const std::string& why) {
    throw std::runtime_error("fusion: pair @" + p.left + " x @" + p.right +
                             ": " + why);
  };
  if (p.left == p.right) bad("a function cannot fuse with itself");
  Function* lf = m.find_function(p.left);
  Function* rf = m.find_function(p.right);
  if (!lf || !rf) bad("function missing from module");
  if (!eligible_fn(*lf) || !eligible_fn(*rf)) bad("side is not fusable");

  // Check the pair against the module's current signatures and build the
  // per-side parameter placement maps.
  auto covers = [](IrType merged, IrType side) {
    auto c = type_compatible(merged, side);
    return c && *c == merged;
  };
  std::vector<int> lmap(lf->params.size(), -1), rmap(rf->params.size(), -1);
  for (size_t j = 0; j < p.merged_params.size(); ++j) {
    const MergedParam& mp = p.merged_params[j];
    if (!mp.left_source && !mp.right_source) bad("merged parameter with no source");
    if (mp.left_source) {
      int i = *mp.left_source;
      if (i < 0 || i >= static_cast<int>(lmap.size()) || lmap[i] >= 0 ||
          !covers(mp.type, lf->params[i].type))
        bad("left parameter map does not fit the current signature");
      lmap[i] = static_cast<int>(j);
    }
    if (mp.right_source) {
      int i = *mp.right_source;
      if (i < 0 || i >= static_cast<int>(rmap.size()) || rmap[i] >= 0 ||
          !covers(mp.type, rf->params[i].type))
        bad("right parameter map does not fit the current signature");
      rmap[i] = static_cast<int>(j);
    }
  }
  for (int v : lmap)
    if (v < 0) bad("left parameter not mapped");
  for (int v : rmap)
    if (v < 0) bad("right parameter not mapped");
  if (lf->ret_type != IrType::Void && !covers(p.merged_return, lf->ret_type))
    bad("merged return cannot carry the left return");
  if (rf->ret_type != IrType::Void && !covers(p.merged_return, rf->ret_type))
    bad("merged return cannot carry the right return");

  const Function left = *lf;   // stable copies; the module is edited below
  const Function right = *rf;
  const std::string fusName =
      m.fresh_function_name(p.left + "." + p.right + ".fus");

  Function fus;
  fus.name = fusName;
  fus.ret_type = p.merged_return;
  fus.params.push_back({"fus.ctrl", IrType::I1});
  for (size_t j = 0; j < p.merged_params.size(); ++j)
    fus.params.push_back(
        {"fus.p" + std::to_string(j), p.merged_params[j].type});
  FuseMap fm;
  fm.left.assign(lmap.begin(), lmap.end());
  fm.right.assign(rmap.begin(), rmap.end());
  fus.fuse_map = std::move(fm);
  for (const auto& s : left.slots) fus.slots.push_back({"l." + s.name, s.type});
  for (const auto& s : right.slots) fus.slots.push_back({"r." + s.name, s.type});

  int cv = 0, tmp = 0;
  auto scratch = [&](IrType t) {
    std::string n = "fus.cv" + std::to_string(cv++);
    fus.slots.push_back({n, t});
    return n;
  };
  auto fresh_reg = [&] { return "fus.t" + std::to_string(tmp++); };
  // The IR has no float-width cast; a store rounds to the cell's width, so a
  // scratch cell of the destination type converts in either direction.
  auto float_resize = [&](std::vector<Instruction>& out, const Operand& v,
                          IrType from, IrType to) {
    std::string cell = scratch(to);
    std::string a = fresh_reg(), w = fresh_reg();
    out.push_back(make_slot_addr(a, cell));
    out.push_back(make_store(from, v, Operand::reg(a)));
    out.push_back(make_load(w, to, Operand::reg(a)));
    if (stats) stats->float_roundtrips++;
    return Operand::reg(w);
  };

  BasicBlock entry;
  entry.label = "fus.entry";
  entry.term.kind = TermKind::CondBr;
  entry.term.value = Operand::reg("fus.ctrl");
  entry.term.targets = {"fus.radapt", "fus.ladapt"};  // ctrl=1 runs right
  fus.blocks.push_back(std::move(entry));

  auto build_side = [&](const Function& src, const std::string& pfx,
                        const std::vector<int>& map, int ctrl) {
    // Adapter: narrow each widened parameter back to the side's own type so
    // the cloned body sees exactly the values the original received.
    std::map<std::string, Operand> subst;
    BasicBlock adapt;
    adapt.label = ctrl ? "fus.radapt" : "fus.ladapt";
    for (size_t i = 0; i < src.params.size(); ++i) {
      IrType st = src.params[i].type;
      IrType mt = p.merged_params[map[i]].type;
      Operand mreg = Operand::reg("fus.p" + std::to_string(map[i]));
      if (st == mt) {
        subst[src.params[i].name] = mreg;
        continue;
      }
      std::string conv = pfx + src.params[i].name;
      if (is_int(st)) {
        adapt.insts.push_back(
            make_resize(Opcode::Trunc, conv, mt, mreg, st));
        subst[src.params[i].name] = Operand::reg(conv);
      } else {
        subst[src.params[i].name] = float_resize(adapt.insts, mreg, mt, st);
      }
      if (stats) stats->narrowed_params++;
    }
    adapt.term.kind = TermKind::Br;
    adapt.term.targets = {pfx + src.blocks[0].label};
    fus.blocks.push_back(std::move(adapt));

    if (stats && src.ret_type == IrType::Void &&
        p.merged_return != IrType::Void)
      stats->void_ret_sides++;

    auto subst_op = [&](const Operand& o) {
      if (o.kind != Operand::Kind::Reg) return o;
      auto it = subst.find(o.name);
      if (it != subst.end()) return it->second;
      Operand r = o;
      r.name = pfx + o.name;
      return r;
    };
    for (const auto& sb : src.blocks) {
      BasicBlock nb;
      nb.label = pfx + sb.label;
      for (const auto& si : sb.insts) {
        Instruction ni = si;
        if (ni.has_result()) ni.result = pfx + ni.result;
        for (auto& o : ni.args) o = subst_op(o);
        if (!ni.slot.empty()) ni.slot = pfx + ni.slot;
        if (!ni.handler.empty()) ni.handler = pfx + ni.handler;
        nb.insts.push_back(std::move(ni));
      }
      Terminator nt = sb.term;
      if (nt.kind == TermKind::CondBr || nt.kind == TermKind::Switch ||
          (nt.kind == TermKind::Ret && nt.has_value))
        nt.value = subst_op(nt.value);
      for (auto& t : nt.targets) t = pfx + t;
      for (auto& c : nt.cases) c.target = pfx + c.target;
      if (!nt.default_target.empty()) nt.default_target = pfx + nt.default_target;
      if (nt.kind == TermKind::Ret && p.merged_return != IrType::Void) {
        if (src.ret_type == IrType::Void) {
          nt.has_value = true;
          nt.value = zero_operand(p.merged_return);
        } else if (src.ret_type != p.merged_return &&
                   nt.value.kind == Operand::Kind::Reg) {
          if (is_int(src.ret_type)) {
            std::string w = fresh_reg();
            nb.insts.push_back(make_resize(Opcode::Zext, w, src.ret_type,
                                           nt.value, p.merged_return));
            nt.value = Operand::reg(w);
          } else {
            nt.value = float_resize(nb.insts, nt.value, src.ret_type,
                                    p.merged_return);
          }
          if (stats) stats->widened_rets++;
        }
        nt.type = p.merged_return;  // literals carry over under the wider type
      }
      nb.term = std::move(nt);
      fus.blocks.push_back(std::move(nb));
    }
  };
  build_side(left, "l.", lmap, 0);
  build_side(right, "r.", rmap, 1);

  if (deep) {
    // Pair innocuous blocks in block order, one from each side, and splice
    // each pair into one block executed on both ctrl paths: left work first,
    // then right work, then a ctrl dispatch to the original successors.
    std::vector<int> ls, rs;
    for (size_t i = 0; i < fus.blocks.size(); ++i) {
      const BasicBlock& b = fus.blocks[i];
      if (!innocuous_block(fus, b)) continue;
      if (b.label.rfind("l.", 0) == 0) ls.push_back(static_cast<int>(i));
      if (b.label.rfind("r.", 0) == 0) rs.push_back(static_cast<int>(i));
    }
    size_t npairs = std::min(ls.size(), rs.size());
    if (npairs) {
      std::map<std::string, std::string> relabel;
      std::vector<bool> dead(fus.blocks.size(), false);
      for (size_t k = 0; k < npairs; ++k) {
        BasicBlock& L = fus.blocks[ls[k]];
        BasicBlock& R = fus.blocks[rs[k]];
        BasicBlock mergedb;
        mergedb.label = "fus.deep" + std::to_string(k);
        mergedb.insts = L.insts;
        mergedb.insts.insert(mergedb.insts.end(), R.insts.begin(),
                             R.insts.end());
        mergedb.term.kind = TermKind::CondBr;
        mergedb.term.value = Operand::reg("fus.ctrl");
        mergedb.term.targets = {R.term.targets[0], L.term.targets[0]};
        relabel[L.label] = mergedb.label;
        relabel[R.label] = mergedb.label;
        L = std::move(mergedb);
        dead[rs[k]] = true;
        if (stats) stats->deep_fused_blocks++;
      }
      std::vector<BasicBlock> kept;
      kept.reserve(fus.blocks.size() - npairs);
      for (size_t i = 0; i < fus.blocks.size(); ++i)
        if (!dead[i]) kept.push_back(std::move(fus.blocks[i]));
      fus.blocks = std::move(kept);
      auto fix = [&](std::string& t) {
        auto it = relabel.find(t);
        if (it != relabel.end()) t = it->second;
      };
      for (auto& b : fus.blocks) {
        for (auto& in : b.insts)
          if (!in.handler.empty()) fix(in.handler);
        for (auto& t : b.term.targets) fix(t);
        for (auto& c : b.term.cases) fix(c.target);
        if (!b.term.default_target.empty()) fix(b.term.default_target);
      }
    }
  }

  // Swap the pair out of the module: the fusFunc takes the left slot.
  int li = m.function_ordinal(p.left);
  m.functions[li] = std::move(fus);
  m.functions.erase(m.functions.begin() + m.function_ordinal(p.right));
  if (prov) {
    prov->erase(p.left);
    prov->erase(p.right);
    (*prov)[fusName] = {{p.left, p.right}, "fusFunc"};
  }

  // Trampolines: an escaping side keeps its own name (external callers and
  // stored pointers stay valid); a local address-taken side of a
  // non-positional pair gets a fresh one. The body is a placeholder call to
  // the original side that the rewriting pass below converts like any other
  // call site.
  auto make_trampoline = [&](const Function& side, const std::string& name) {
    Function t;
    t.name = name;
    t.params = side.params;
    t.ret_type = side.ret_type;
    std::string rr = "fus.r";
    for (const auto& pp : t.params)
      if (pp.name == rr) rr += "x";
    BasicBlock b;
    b.label = "bb0";
    Instruction call;
    call.op = Opcode::Call;
    call.callee = side.name;
    call.type = side.ret_type;
    for (const auto& pp : side.params) call.args.push_back(Operand::reg(pp.name));
    if (side.ret_type != IrType::Void) {
      call.result = rr;
      b.term.kind = TermKind::Ret;
      b.term.has_value = true;
      b.term.type = side.ret_type;
      b.term.value = Operand::reg(rr);
    } else {
      b.term.kind = TermKind::Ret;
    }
    b.insts.push_back(std::move(call));
    t.blocks.push_back(std::move(b));
    return t;
  };

  const Function* sides[2] = {&left, &right};
  for (int ctrl = 0; ctrl < 2; ++ctrl) {
    const Function& side = *sides[ctrl];
    std::vector<Instruction*> addr_sites;
    for (auto& g : m.functions)
      for (auto& b : g.blocks)
        for (auto& in : b.insts)
          if (in.op == Opcode::AddrOfFunc && in.callee == side.name)
            addr_sites.push_back(&in);
    if (escaping.count(side.name)) {
      m.functions.push_back(make_trampoline(side, side.name));
      if (prov) (*prov)[side.name] = {{side.name}, "trampoline"};
      if (stats) stats->named_trampolines++;
      // addr_of sites still name the (new) trampoline; nothing to retarget.
    } else if (!addr_sites.empty()) {
      if (p.positional) {
        for (Instruction* in : addr_sites) {
          in->callee = fusName;
          in->tag_ctrl = ctrl;
        }
        if (stats)
          stats->tagged_addr_sites += static_cast<int>(addr_sites.size());
      } else {
        std::string tn = m.fresh_function_name(side.name + ".tramp");
        m.functions.push_back(make_trampoline(side, tn));
        for (Instruction* in : addr_sites) in->callee = tn;
        if (prov) (*prov)[tn] = {{side.name}, "trampoline"};
        if (stats) stats->fresh_trampolines++;
      }
    }
  }

  // Rewrite every direct call of either side (the fused body's own recursive
  // calls and the placeholder trampolines included): ctrl constant first,
  // each argument widened into its merged position, the rest zero-filled,
  // and the result narrowed back to what the caller statically expects.
  for (auto& g : m.functions) {
    bool touches = false;
    for (const auto& b : g.blocks) {
      for (const auto& in : b.insts)
        if (in.op == Opcode::Call &&
            (in.callee == p.left || in.callee == p.right)) {
          touches = true;
          break;
        }
      if (touches) break;
    }
    if (!touches) continue;
    NameSupply names(g);
    auto add_scratch = [&](IrType t) {
      std::string n = names.fresh("fus.cv");
      g.slots.push_back({n, t});
      return n;
    };
    auto caller_float_resize = [&](std::vector<Instruction>& out,
                                   const Operand& v, IrType from, IrType to) {
      std::string cell = add_scratch(to);
      std::string a = names.fresh("fus.w");
      std::string w = names.fresh("fus.w");
      out.push_back(make_slot_addr(a, cell));
      out.push_back(make_store(from, v, Operand::reg(a)));
      out.push_back(make_load(w, to, Operand::reg(a)));
      if (stats) stats->float_roundtrips++;
      return Operand::reg(w);
    };
    for (auto& b : g.blocks) {
      std::vector<Instruction> out;
      out.reserve(b.insts.size());
      for (auto& in : b.insts) {
        if (in.op != Opcode::Call ||
            (in.callee != p.left && in.callee != p.right)) {
          out.push_back(std::move(in));
          continue;
        }
        int ctrl = in.callee == p.left ? 0 : 1;
        const Function& side = *sides[ctrl];
        const std::vector<int>& map = ctrl ? rmap : lmap;
        std::vector<Operand> margs;
        std::vector<bool> filled(p.merged_params.size(), false);
        margs.reserve(p.merged_params.size());
        for (const auto& mp : p.merged_params) margs.push_back(zero_operand(mp.type));
        for (size_t i = 0; i < side.params.size(); ++i) {
          IrType st = side.params[i].type;
          IrType mt = p.merged_params[map[i]].type;
          Operand o = in.args[i];
          if (st != mt && o.kind == Operand::Kind::Reg) {
            if (is_int(st)) {
              std::string w = names.fresh("fus.w");
              out.push_back(make_resize(Opcode::Zext, w, st, o, mt));
              o = Operand::reg(w);
            } else {
              o = caller_float_resize(out, o, st, mt);
            }
            if (stats) stats->widened_call_args++;
          }
          margs[map[i]] = std::move(o);
          filled[map[i]] = true;
        }
        if (stats)
          for (bool fl : filled)
            if (!fl) stats->zero_filled_args++;
        Instruction call = std::move(in);
        call.callee = fusName;
        call.type = p.merged_return;
        call.args.clear();
        call.args.push_back(Operand::imm_int(ctrl));
        for (auto& a : margs) call.args.push_back(std::move(a));
        std::string result = call.result;
        IrType rt = side.ret_type;
        if (!result.empty() && rt != p.merged_return) {
          std::string wide = names.fresh("fus.c");
          call.result = wide;
          out.push_back(std::move(call));
          if (is_int(rt)) {
            out.push_back(make_resize(Opcode::Trunc, result, p.merged_return,
                                      Operand::reg(wide), rt));
          } else {
            std::string cell = add_scratch(rt);
            std::string a = names.fresh("fus.c");
            out.push_back(make_slot_addr(a, cell));
            out.push_back(
                make_store(p.merged_return, Operand::reg(wide), Operand::reg(a)));
            out.push_back(make_load(result, rt, Operand::reg(a)));
            if (stats) stats->float_roundtrips++;
          }
          if (stats) stats->narrowed_call_results++;
        } else {
          out.push_back(std::move(call));
        }
        if (stats) stats->rewritten_call_sites++;
      }
      b.insts = std::move(out);
    }
  }
}

int mark_tag_checked_icalls(IrModule& m, FusionStats* stats) {
  size_t nf = m.functions.size();
  std::map<std::string, int> fidx;
  for (size_t i = 0; i < nf; ++i) fidx[m.functions[i].name] = static_cast<int>(i);
  std::set<std::string> taken = address_taken_functions(m);

  // Per-function shape info: which registers hold which slot's address, and
  // which slots have their address escape beyond direct load/store use (those
  // collapse into a single "heap" region, pessimistically shared module-wide).
  std::vector<std::map<std::string, std::string>> slot_of(nf);
  std::vector<std::set<std::string>> esc_slot(nf);
  for (size_t fi = 0; fi < nf; ++fi) {
    const Function& f = m.functions[fi];
    for (const auto& b : f.blocks)
      for (const auto& in : b.insts)
        if (in.op == Opcode::SlotAddr && in.has_result())
          slot_of[fi][in.result] = in.slot;
    auto mark = [&](const Operand& o) {
      if (o.kind != Operand::Kind::Reg) return;
      auto it = slot_of[fi].find(o.name);
      if (it != slot_of[fi].end()) esc_slot[fi].insert(it->second);
    };
    for (const auto& b : f.blocks) {
      for (const auto& in : b.insts)
        for (size_t ai = 0; ai < in.args.size(); ++ai) {
          if (in.op == Opcode::Load && ai == 0) continue;
          if (in.op == Opcode::Store && ai == 1) continue;
          mark(in.args[ai]);
        }
      if (b.term.kind == TermKind::Ret && b.term.has_value) mark(b.term.value);
    }
  }

  std::vector<std::map<std::string, bool>> regT(nf);
  std::vector<std::map<std::string, bool>> slotT(nf);
  std::map<std::string, bool> globT;
  std::vector<std::vector<bool>> paramT(nf);
  std::vector<bool> retT(nf, false);
  for (size_t i = 0; i < nf; ++i) paramT[i].assign(m.functions[i].params.size(), false);
  bool heap = false;
  bool changed = true;

  auto tainted = [&](size_t fi, const Operand& o) {
    if (o.kind != Operand::Kind::Reg) return false;
    auto it = regT[fi].find(o.name);
    return it != regT[fi].end() && it->second;
  };
  auto set_reg = [&](size_t fi, const std::string& r) {
    if (r.empty()) return;
    bool& cur = regT[fi][r];
    if (!cur) cur = changed = true;
  };

  while (changed) {
    changed = false;
    for (size_t fi = 0; fi < nf; ++fi) {
      const Function& f = m.functions[fi];
      for (size_t i = 0; i < f.params.size(); ++i)
        if (paramT[fi][i]) set_reg(fi, f.params[i].name);
      for (const auto& b : f.blocks) {
        for (const auto& in : b.insts) {
          switch (in.op) {
            case Opcode::AddrOfFunc:
              if (in.tag_ctrl >= 0) set_reg(fi, in.result);
              break;
            case Opcode::Load: {
              if (in.type != IrType::Ptr) break;
              bool t = false;
              const Operand& a = in.args[0];
              if (a.kind == Operand::Kind::Global) {
                t = globT[a.name];
              } else if (a.kind == Operand::Kind::Reg) {
                auto it = slot_of[fi].find(a.name);
                if (it != slot_of[fi].end())
                  t = slotT[fi][it->second] ||
                      (esc_slot[fi].count(it->second) && heap);
                else
                  t = heap;
              }
              if (t) set_reg(fi, in.result);
              break;
            }
            case Opcode::Store: {
              if (!tainted(fi, in.args[0])) break;
              const Operand& a = in.args[1];
              if (a.kind == Operand::Kind::Global) {
                bool& cur = globT[a.name];
                if (!cur) cur = changed = true;
              } else if (a.kind == Operand::Kind::Reg) {
                auto it = slot_of[fi].find(a.name);
                if (it != slot_of[fi].end()) {
                  bool& cur = slotT[fi][it->second];
                  if (!cur) cur = changed = true;
                  if (esc_slot[fi].count(it->second) && !heap)
                    heap = changed = true;
                } else if (!heap) {
                  heap = changed = true;
                }
              }
              break;
            }
            case Opcode::Call: {
              auto cit = fidx.find(in.callee);
              if (cit == fidx.end()) break;
              int ci = cit->second;
              for (size_t ai = 0; ai < in.args.size() &&
                                  ai < paramT[ci].size();
                   ++ai)
                if (tainted(fi, in.args[ai]) && !paramT[ci][ai])
                  paramT[ci][ai] = changed = true;
              if (retT[ci]) set_reg(fi, in.result);
              break;
            }
            case Opcode::Icall: {
              // An indirect call can land in any address-taken function, and
              // a fused callee scatters arguments by its placement map, so a
              // tainted argument taints every parameter of every candidate.
              bool any_arg = false;
              for (size_t ai = 1; ai < in.args.size(); ++ai)
                any_arg = any_arg || tainted(fi, in.args[ai]);
              bool any_ret = false;
              for (const auto& tn : taken) {
                int ti = fidx[tn];
                any_ret = any_ret || retT[ti];
                if (any_arg)
                  for (size_t pi = 0; pi < paramT[ti].size(); ++pi)
                    if (!paramT[ti][pi]) paramT[ti][pi] = changed = true;
              }
              if (any_ret && in.type == IrType::Ptr) set_reg(fi, in.result);
              break;
            }
            default:
              break;
          }
        }
        if (b.term.kind == TermKind::Ret && b.term.has_value &&
            tainted(fi, b.term.value) && !retT[fi])
          retT[fi] = changed = true;
      }
    }
  }

  int flagged = 0;
  for (size_t fi = 0; fi < nf; ++fi)
    for (auto& b : m.functions[fi].blocks)
      for (auto& in : b.insts)
        if (in.op == Opcode::Icall) {
          bool t = tainted(fi, in.args[0]);
          in.tag_checked = t;
          if (t) ++flagged;
          if (stats) (t ? stats->tagcheck_icalls : stats->plain_icalls)++;
        }
  return flagged;
}

FusionOutcome run_fusion(const IrModule& m, const std::set<std::string>& pool,
                         const FusionConfig& cfg, uint64_t rng_seed) {
  FusionOutcome out;
  out.module = m;
  for (const auto& f : m.functions)
    out.provenance[f.name] = {{f.name}, "unchanged"};
  FusionStats& st = out.stats;

  for (const auto& f : out.module.functions)
    if (pool.count(f.name) && eligible_fn(f)) {
      st.eligible_functions++;
      st.innocuous_blocks += count_innocuous_blocks(f);
    }

  std::vector<FusionPair> pairs =
      select_pairs(out.module, pool, cfg, rng_seed, &st);
  std::set<std::string> es = out.module.exported;
  es.insert(out.module.visible_ptrs.begin(), out.module.visible_ptrs.end());
  for (const auto& pr : pairs)
    fuse_pair(out.module, pr, es, cfg.deep, &st, &out.provenance);
  mark_tag_checked_icalls(out.module, &st);

  st.pairs = static_cast<int>(pairs.size());
  st.fused_functions = 2 * st.pairs;
  st.unpaired = st.eligible_functions - st.fused_functions;
  st.fusion_ratio =
      st.eligible_functions
          ? static_cast<double>(st.fused_functions) / st.eligible_functions
          : 0.0;
  st.rp = st.pairs ? static_cast<double>(st.params_eliminated) / st.pairs : 0.0;
  st.hbb = st.eligible_functions
               ? static_cast<double>(st.innocuous_blocks) / st.eligible_functions
               : 0.0;

  auto viols = validate(out.module);
  if (!viols.empty())
    throw std::runtime_error("fusion produced invalid IR: " +
                             viols.front().to_string());
  return out;
}

}  // namespace irobf
