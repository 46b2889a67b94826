#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "bbx/attacks/boundary.hpp"
#include "bbx/attacks/hopskipjump.hpp"
#include "bbx/attacks/mga.hpp"
#include "bbx/attacks/simba.hpp"

namespace bbx {

using AttackSpec = std::variant<SimbaConfig, HsjConfig, BoundaryConfig, MgaConfig>;

inline std::string attack_name(const AttackSpec& spec) {
  struct Visitor {
    std::string operator()(const SimbaConfig&) const { return "simba"; }
    std::string operator()(const HsjConfig&) const { return "hopskipjump"; }
    std::string operator()(const BoundaryConfig&) const { return "boundary"; }
    std::string operator()(const MgaConfig&) const { return "mga"; }
  };
  return std::visit(Visitor{}, spec);
}

inline bool attack_needs_probabilities(const AttackSpec& spec) {
  return std::holds_alternative<SimbaConfig>(spec) || std::holds_alternative<MgaConfig>(spec);
}

inline AttackSpec with_seed(AttackSpec spec, std::uint64_t seed) {
  std::visit([seed](auto& cfg) { cfg.seed = seed; }, spec);
  return spec;
}

inline void validate_attack(const AttackSpec& spec) {
  std::visit([](const auto& cfg) { cfg.validate(); }, spec);
}

inline AttackOutcome run_attack(Oracle& oracle, const Image& x, int y, const AttackSpec& spec,
                                RngStream& rng) {
  struct Visitor {
    Oracle& oracle;
    const Image& x;
    int y;
    RngStream& rng;
    AttackOutcome operator()(const SimbaConfig& c) { return simba_attack(oracle, x, y, c, rng); }
    AttackOutcome operator()(const HsjConfig& c) {
      return hopskipjump_attack(oracle, x, y, c, rng);
    }
    AttackOutcome operator()(const BoundaryConfig& c) {
      return boundary_attack(oracle, x, y, c, rng);
    }
    AttackOutcome operator()(const MgaConfig& c) { return mga_attack(oracle, x, y, c, rng); }
  };
  return std::visit(Visitor{oracle, x, y, rng}, spec);
}

inline AttackOutcome run_attack(Oracle& oracle, const Image& x, int y, const AttackSpec& spec) {
  RngStream rng(std::visit([](const auto& cfg) { return cfg.seed; }, spec));
  return run_attack(oracle, x, y, spec, rng);
}

}  // namespace bbx
