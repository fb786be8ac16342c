#include "irobf/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>

namespace irobf {

const char* to_string(ObfMode mode) {
  switch (mode) {
    case ObfMode::FissionOnly: return "fission_only";
    case ObfMode::FusionOnly: return "fusion_only";
    case ObfMode::FufiSep: return "fufi_sep";
    case ObfMode::FufiOri: return "fufi_ori";
    case ObfMode::FufiAll: return "fufi_all";
  }
  return "?";
}

const std::vector<ObfMode>& all_modes() {
  static const std::vector<ObfMode> modes = {
      ObfMode::FissionOnly, ObfMode::FusionOnly, ObfMode::FufiSep,
      ObfMode::FufiOri, ObfMode::FufiAll};
  return modes;
}

std::optional<ObfMode> parse_mode(const std::string& name) {
  for (ObfMode m : all_modes())
    if (name == to_string(m)) return m;
  return std::nullopt;
}

std::vector<std::pair<std::string, double>> StatsReport::table() const {
  return {{"Fission Ratio", fission.fission_ratio},
          {"#BB", fission.mean_sep_blocks},
          {"RR", fission.mean_removed_ratio},
          {"Fusion Ratio", fusion.fusion_ratio},
          {"#RP", fusion.rp},
          {"#HBB", fusion.hbb}};
}

namespace {

// Translate the second pass's origins through the first pass's map. Roles
// keep the most recent transformation; a function the second pass left
// alone keeps whatever the first pass called it.
ProvenanceMap compose_provenance(const ProvenanceMap& first,
                                 const ProvenanceMap& second) {
  ProvenanceMap out;
  for (const auto& [name, pr] : second) {
    FunctionProvenance composed;
    composed.role = pr.role;
    if (pr.role == "unchanged") {
      auto self = first.find(name);
      if (self != first.end()) composed.role = self->second.role;
    }
    for (const auto& origin : pr.origins) {
      auto hop = first.find(origin);
      if (hop == first.end())
        throw std::logic_error("provenance gap at " + origin);
      for (const auto& root : hop->second.origins)
        if (std::find(composed.origins.begin(), composed.origins.end(),
                      root) == composed.origins.end())
          composed.origins.push_back(root);
    }
    out[name] = std::move(composed);
  }
  return out;
}

}  // namespace

ObfuscationOutcome obfuscate(const IrModule& m, const ObfuscationConfig& cfg) {
  ObfuscationOutcome out;
  uint64_t fusion_seed = cfg.fusion_seed.value_or(cfg.seed);

  if (cfg.mode == ObfMode::FusionOnly) {
    std::set<std::string> pool;
    for (const auto& f : m.functions)
      if (!f.is_external) pool.insert(f.name);
    FusionOutcome fu = run_fusion(m, pool, cfg.fusion, fusion_seed);
    out.module = std::move(fu.module);
    out.provenance = std::move(fu.provenance);
    out.stats.fusion = fu.stats;
    out.stats.ran_fusion = true;
    return out;
  }

  FissionOutcome fi = run_fission(m, cfg.fission, cfg.seed);
  out.stats.fission = fi.stats;
  out.stats.ran_fission = true;
  if (cfg.mode == ObfMode::FissionOnly) {
    out.module = std::move(fi.module);
    out.provenance = std::move(fi.provenance);
    return out;
  }

  std::set<std::string> pool;
  for (const auto& [name, pr] : fi.provenance) {
    const Function* f = fi.module.find_function(name);
    if (f == nullptr || f->is_external) continue;
    bool pooled = cfg.mode == ObfMode::FufiSep   ? pr.role == "sepFunc"
                  : cfg.mode == ObfMode::FufiOri ? pr.role == "unchanged"
                  : pr.role == "sepFunc" || pr.role == "unchanged";
    if (pooled) pool.insert(name);
  }

  FusionOutcome fu = run_fusion(fi.module, pool, cfg.fusion, fusion_seed);
  // Split-out functions are internal by construction: nothing in this mode
  // may have needed a tagged pointer or a trampoline.
  if (cfg.mode == ObfMode::FufiSep &&
      (fu.stats.tagged_addr_sites || fu.stats.named_trampolines ||
       fu.stats.fresh_trampolines))
    throw std::logic_error("fufi_sep pooled an address-taken function");

  out.module = std::move(fu.module);
  out.provenance = compose_provenance(fi.provenance, fu.provenance);
  out.stats.fusion = fu.stats;
  out.stats.ran_fusion = true;
  return out;
}

ProvenanceMap identity_provenance(const IrModule& m) {
  ProvenanceMap out;
  for (const auto& f : m.functions) out[f.name] = {{f.name}, "unchanged"};
  return out;
}

std::string provenance_json(const ProvenanceMap& prov, uint64_t seed,
                            ObfMode mode) {
  nlohmann::json functions = nlohmann::json::object();
  for (const auto& [name, pr] : prov)
    functions[name] = {{"origins", pr.origins}, {"role", pr.role}};
  nlohmann::json j = {
      {"functions", std::move(functions)},
      {"seed", seed},
      {"mode", to_string(mode)},
  };
  return j.dump(2) + "\n";
}

ProvenanceMap parse_provenance_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);  // throws on bad JSON
  ProvenanceMap out;
  for (const auto& [name, entry] : j.at("functions").items()) {
    FunctionProvenance pr;
    pr.role = entry.at("role").get<std::string>();
    for (const auto& o : entry.at("origins"))
      pr.origins.push_back(o.get<std::string>());
    out[name] = std::move(pr);
  }
  return out;
}

std::string stats_json(const StatsReport& report) {
  nlohmann::json j;
  for (const auto& [key, value] : report.table()) j[key] = value;

  const FissionStats& fi = report.fission;
  j["detail"]["fission"] = {
      {"ran", report.ran_fission},
      {"ori_funcs", fi.ori_funcs},
      {"sep_funcs", fi.sep_funcs},
      {"regions_chosen", fi.regions_chosen},
      {"blocks_moved", fi.blocks_moved},
      {"skipped_min_effect", fi.skipped_min_effect},
      {"skipped_setjmp", fi.skipped_setjmp},
      {"skipped_handler_split", fi.skipped_handler_split},
      {"multi_exit_regions", fi.multi_exit_regions},
      {"single_exit_regions", fi.single_exit_regions},
      {"no_exit_regions", fi.no_exit_regions},
      {"ret_exit_regions", fi.ret_exit_regions},
      {"demoted_registers", fi.demoted_registers},
      {"moved_private_slots", fi.moved_private_slots},
      {"sep_entry_glue", fi.sep_entry_glue},
  };
  const FusionStats& fu = report.fusion;
  j["detail"]["fusion"] = {
      {"ran", report.ran_fusion},
      {"eligible_functions", fu.eligible_functions},
      {"fused_functions", fu.fused_functions},
      {"pairs", fu.pairs},
      {"params_eliminated", fu.params_eliminated},
      {"innocuous_blocks", fu.innocuous_blocks},
      {"unpaired", fu.unpaired},
      {"pairs_over_param_pref", fu.pairs_over_param_pref},
      {"pairs_zero_compression", fu.pairs_zero_compression},
      {"void_ret_sides", fu.void_ret_sides},
      {"widened_rets", fu.widened_rets},
      {"rewritten_call_sites", fu.rewritten_call_sites},
      {"zero_filled_args", fu.zero_filled_args},
      {"widened_call_args", fu.widened_call_args},
      {"narrowed_call_results", fu.narrowed_call_results},
      {"narrowed_params", fu.narrowed_params},
      {"float_roundtrips", fu.float_roundtrips},
      {"named_trampolines", fu.named_trampolines},
      {"fresh_trampolines", fu.fresh_trampolines},
      {"tagged_addr_sites", fu.tagged_addr_sites},
      {"tagcheck_icalls", fu.tagcheck_icalls},
      {"plain_icalls", fu.plain_icalls},
      {"deep_fused_blocks", fu.deep_fused_blocks},
  };
  return j.dump(2) + "\n";
}

}  // namespace irobf
