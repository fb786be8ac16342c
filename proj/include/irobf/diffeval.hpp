// Binary-diffing-style evaluation of obfuscation strength. Per-function
// features follow the classic differ recipe (block / edge / call counts plus
// an opcode histogram and call-graph degrees; names are never used), matches
// are greedy mutual-best by similarity, and Precision@1 applies the relaxed
// judgment: matching any function derived from the original (its split-out
// parts, its remainder, a fusion containing it, or its trampoline) counts as
// a successful pairing.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "irobf/ir.hpp"
#include "irobf/provenance.hpp"

namespace irobf {

struct FunctionFeatures {
  int n_blocks = 0;
  int n_edges = 0;  // control-flow edges, handler edges included
  int n_calls = 0;  // direct and indirect call instructions
  int n_instructions = 0;  // instructions plus one terminator per block
  std::map<std::string, int> opcode_histogram;  // mnemonic -> count
  int cg_in_degree = 0;   // distinct direct callers within the module
  int cg_out_degree = 0;  // distinct direct callees
};

using FeatureMap = std::map<std::string, FunctionFeatures>;

// Features for every body function (externals have no body to fingerprint).
FeatureMap extract_features(const IrModule& m);

// 0.5 * cosine(opcode histograms) + 0.5 * mean scalar closeness, where each
// scalar feature contributes 1 - |a-b| / max(a, b, 1). Symmetric, 1 on self.
double similarity(const FunctionFeatures& a, const FunctionFeatures& b);

struct MatchReport {
  struct Match {
    std::string fn_a, fn_b;
    double sim = 0.0;
  };
  std::vector<Match> matches;  // greedy mutual-best partial injection

  // Filled by score_precision: for each original function, the 1-based rank
  // of the first true match in its similarity-sorted candidate list (0 when
  // no candidate is a true match). Precision@1 = |rank == 1| / total.
  std::map<std::string, int> per_function_rank;
  double precision_at_1 = 0.0;
  int hits = 0;
  int total = 0;
};

// Matching only; the precision fields stay zero until score_precision runs.
MatchReport match_features(const FeatureMap& orig, const FeatureMap& obf);

// `prov` maps obfuscated names to original origins (the sidecar contents).
void score_precision(MatchReport& report, const FeatureMap& orig,
                     const FeatureMap& obf, const ProvenanceMap& prov);

// extract + match + score in one call.
MatchReport diff_modules(const IrModule& orig, const IrModule& obf,
                         const ProvenanceMap& prov);

// Whole-module opcode histogram (terminators included), and Euclidean
// distances from a baseline normalized by the maximum across variants
// (all-zero distances normalize to 0).
std::map<std::string, long> module_opcode_histogram(const IrModule& m);
std::vector<double> normalized_distances(
    const std::map<std::string, long>& baseline,
    const std::vector<std::map<std::string, long>>& variants);
std::vector<double> opcode_distance(const IrModule& baseline,
                                    const std::vector<IrModule>& variants);

// Report bodies: a human-readable table and the machine-readable JSON
// ({precision_at_1, matches, ranks, opcode_distances}).
std::string diff_report_text(const MatchReport& report);
std::string diff_report_json(const MatchReport& report,
                             const std::vector<double>& opcode_distances);

}  // namespace irobf
