// Fusion: aggregate pairs of functions into single ctrl-dispatched functions.
//
// A fused function (fusFunc) takes ctrl: i1 as its first parameter and routes
// to one of the two original bodies. Parameter lists are compressed by an
// order-preserving maximum matching over compatible types; direct call sites
// are rewritten in place, indirect calls go through tagged function pointers
// or trampolines, and pairs of innocuous blocks can be deep-fused into blocks
// executed on both ctrl paths.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "irobf/ir.hpp"
#include "irobf/provenance.hpp"

namespace irobf {

struct FusionConfig {
  bool deep = true;    // merge innocuous block pairs into shared blocks
  int max_params = 6;  // preferred ceiling on fusFunc parameters (incl. ctrl)
};

// One merged parameter: its type plus the source parameter index on each
// side; a side without a source treats the slot as zero-filled padding.
struct MergedParam {
  IrType type = IrType::I64;
  std::optional<int> left_source;
  std::optional<int> right_source;
};

struct FusionPair {
  std::string left;   // executes when ctrl = 0
  std::string right;  // executes when ctrl = 1
  std::vector<MergedParam> merged_params;
  IrType merged_return = IrType::Void;
  // True iff every two-sided merged parameter draws from the same index on
  // both sides (one-sided padding entries aside); only positional pairs can
  // be dispatched through tagged pointers without a trampoline.
  bool positional = false;

  int eliminated() const;  // parameters saved by compression
};

struct FusionStats {
  int eligible_functions = 0;
  int fused_functions = 0;
  int pairs = 0;
  double fusion_ratio = 0.0;  // fused / eligible
  double rp = 0.0;            // mean parameters eliminated per pair
  double hbb = 0.0;           // mean innocuous blocks per eligible function

  // Pass-path exercise counters.
  int params_eliminated = 0;
  int innocuous_blocks = 0;
  int unpaired = 0;
  int pairs_over_param_pref = 0;   // matched only by the relaxed second phase
  int pairs_zero_compression = 0;  // no compatible parameters at all
  int void_ret_sides = 0;          // void return merged with a value return
  int widened_rets = 0;            // in-body return value widenings
  int rewritten_call_sites = 0;
  int zero_filled_args = 0;        // padding arguments at rewritten calls
  int widened_call_args = 0;       // argument conversions at rewritten calls
  int narrowed_call_results = 0;   // result conversions at rewritten calls
  int narrowed_params = 0;         // adapter-block parameter narrowings
  int float_roundtrips = 0;        // float width changes via scratch slots
  int named_trampolines = 0;       // exported/visible side keeps its name
  int fresh_trampolines = 0;       // non-positional address-taken fallback
  int tagged_addr_sites = 0;       // addr_of sites rewritten to tagged form
  int tagcheck_icalls = 0;         // icall sites flagged by the taint pass
  int plain_icalls = 0;            // icall sites the taint pass left alone
  int deep_fused_blocks = 0;       // innocuous block pairs spliced
};

// Widest common type: int x int and float x float widen to the higher rank,
// ptr x ptr stays ptr, void pairs with anything (returns only), and mixing
// kinds is incompatible.
std::optional<IrType> type_compatible(IrType a, IrType b);

// A block that cannot trap, cannot touch memory outside its own slots, and
// whose registers are all defined in-block or function parameters; such a
// block may run on the foreign ctrl path of a fusFunc without being observed.
bool innocuous_block(const Function& f, const BasicBlock& b);
int count_innocuous_blocks(const Function& f);

// Order-preserving maximum matching of compatible parameters; fills every
// FusionPair field. Throws if the return types are incompatible.
FusionPair compress_params(const Function& left, const Function& right);

// Random maximal pairing of pool functions under the fusion constraints
// (no variadics, compatible returns, no direct call edge in either
// direction). Pairs that fit max_params are matched first.
std::vector<FusionPair> select_pairs(const IrModule& m,
                                     const std::set<std::string>& pool,
                                     const FusionConfig& cfg, uint64_t rng_seed,
                                     FusionStats* stats = nullptr);

// Rewrite the module for one pair: build the fusFunc, retarget every direct
// call, emit trampolines for escaping sides, tag local address-taken sides,
// and (optionally) deep-fuse innocuous blocks. `escaping` lists functions
// whose address or name is visible outside the module. Throws if the pair
// does not match the module's current state.
void fuse_pair(IrModule& m, const FusionPair& p,
               const std::set<std::string>& escaping, bool deep,
               FusionStats* stats = nullptr, ProvenanceMap* prov = nullptr);

// Conservative may-carry-tag dataflow over registers, slots, globals and
// call boundaries; flags (and counts) every icall whose callee register may
// hold a tagged pointer. Unflagged sites keep the cheap plain dispatch.
int mark_tag_checked_icalls(IrModule& m, FusionStats* stats = nullptr);

struct FusionOutcome {
  IrModule module;
  ProvenanceMap provenance;
  FusionStats stats;
};

// Full pass over a pool of candidate functions: select, fuse every pair,
// then run the tag-check marking. The result module always validates.
FusionOutcome run_fusion(const IrModule& m, const std::set<std::string>& pool,
                         const FusionConfig& cfg = {}, uint64_t rng_seed = 0);

}  // namespace irobf
