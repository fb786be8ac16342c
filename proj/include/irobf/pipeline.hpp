// Pass scheduling. Fission always runs before fusion; the mode decides which
// functions enter the fusion pool afterwards:
//
//   fission_only  split functions, no fusion
//   fusion_only   no fission; every body function is a fusion candidate
//   fufi_sep      fuse only the split-out functions (never address-taken,
//                 so no tagged pointers or trampolines can appear)
//   fufi_ori      fuse only functions fission left untouched
//   fufi_all      fuse split-out and untouched functions in one pool
//
// Remainder functions never enter a pool. Provenance composes across the two
// passes, so every output function maps back to original function names.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irobf/fission.hpp"
#include "irobf/fusion.hpp"
#include "irobf/ir.hpp"
#include "irobf/provenance.hpp"

namespace irobf {

enum class ObfMode { FissionOnly, FusionOnly, FufiSep, FufiOri, FufiAll };

const char* to_string(ObfMode mode);
std::optional<ObfMode> parse_mode(const std::string& name);
const std::vector<ObfMode>& all_modes();  // reporting order

struct ObfuscationConfig {
  ObfMode mode = ObfMode::FufiAll;
  uint64_t seed = 0;  // drives every randomized choice
  FissionConfig fission;
  FusionConfig fusion;
  // Overrides `seed` for the fusion stage only (config key fusion.seed).
  std::optional<uint64_t> fusion_seed;
};

// Both pass stat blocks plus the six table metrics in reporting shape.
struct StatsReport {
  FissionStats fission;
  FusionStats fusion;
  bool ran_fission = false;
  bool ran_fusion = false;

  // ("Fission Ratio", "#BB", "RR", "Fusion Ratio", "#RP", "#HBB") in order.
  std::vector<std::pair<std::string, double>> table() const;
};

struct ObfuscationOutcome {
  IrModule module;
  ProvenanceMap provenance;
  StatsReport stats;
};

// Runs the configured passes over a valid module. The output module always
// validates; throws std::runtime_error / std::logic_error on internal
// contract violations (never returns a broken module).
ObfuscationOutcome obfuscate(const IrModule& m, const ObfuscationConfig& cfg);

// Every function maps to itself: the ground-truth baseline for diffing a
// module against an untransformed copy.
ProvenanceMap identity_provenance(const IrModule& m);

// Sidecar bodies. The provenance sidecar is the differ's ground truth:
// {"functions": {name: {"origins": [...], "role": "..."}}, "seed": n,
//  "mode": "..."}.
std::string provenance_json(const ProvenanceMap& prov, uint64_t seed,
                            ObfMode mode);
ProvenanceMap parse_provenance_json(const std::string& text);  // throws
std::string stats_json(const StatsReport& report);

}  // namespace irobf
