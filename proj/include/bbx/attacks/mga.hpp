#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "bbx/attacks/common.hpp"
#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"
#include "bbx/rng.hpp"

namespace bbx {

struct MgaConfig {
  double epsilon = 0.047;  // L-inf bound every population member respects
  long long max_queries = 1000;
  double mutation_rate = 0.001;
  int population_size = 6;
  std::uint64_t seed = 0;
  // Externally supplied starting perturbations (clamped into the epsilon
  // ball); missing members are filled with random sign patterns.
  std::vector<Perturbation> initial_population;

  void validate() const {
    if (!(epsilon > 0.0)) throw ParamError("mga: epsilon must be positive");
    if (max_queries < 0) throw ParamError("mga: max_queries must be non-negative");
    if (!(mutation_rate > 0.0) || !(mutation_rate < 1.0))
      throw ParamError("mga: mutation_rate must lie in (0,1)");
    if (population_size < 2) throw ParamError("mga: population_size must be at least 2");
    if (static_cast<int>(initial_population.size()) > population_size)
      throw ParamError("mga: more injected members than population_size");
  }
};

// Sign-flip mutation: each element negates independently with probability mr.
inline Perturbation mga_mutate(const Perturbation& delta, double mr, RngStream& rng) {
  if (!(mr >= 0.0 && mr <= 1.0)) throw ParamError("mga_mutate: mr must lie in [0,1]");
  Perturbation out = delta;
  for (auto& v : out.data)
    if (rng.bernoulli(mr)) v = -v;
  return out;
}

// Microbial GA over perturbations in the epsilon L-inf ball: each round holds
// a two-member tournament (both fitnesses freshly queried), overwrites the
// loser with a uniform crossover of the winner, mutates it, and re-clamps.
// Fitness is the untargeted decision margin of clip(x+delta), so termination
// on a positive margin is exactly a label flip. No query is spent on x
// itself; callers pass a correctly classified image.
inline AttackOutcome mga_attack(Oracle& oracle, const Image& x, int y, const MgaConfig& cfg,
                                RngStream& rng) {
  cfg.validate();
  if (!oracle.has_probabilities())
    throw ProbabilityAccessError("mga: needs a probability oracle");

  const detail::StopWatch clock;
  detail::QueryLog log(oracle);

  AttackOutcome out;
  out.adversarial = x;
  out.adversarial_label = y;

  const auto clamp_ball = [&](Perturbation& d) {
    for (auto& v : d.data) v = std::clamp(v, -cfg.epsilon, cfg.epsilon);
  };

  std::vector<Perturbation> pop;
  pop.reserve(cfg.population_size);
  for (const auto& injected : cfg.initial_population) {
    if (injected.height != x.height || injected.width != x.width ||
        injected.channels != x.channels)
      throw ShapeError("mga: injected member shape differs from the image");
    pop.push_back(injected);
    clamp_ball(pop.back());
  }
  while (static_cast<int>(pop.size()) < cfg.population_size) {
    Perturbation d = Perturbation::zeros_like(x);
    for (auto& v : d.data) v = rng.bernoulli(0.5) ? cfg.epsilon : -cfg.epsilon;
    pop.push_back(std::move(d));
  }

  double best_margin = -2.0;
  Image best_image = x;
  ProbabilityVector best_p;

  // Returns the margin, or nullopt when the query budget is already spent.
  const auto evaluate = [&](const Perturbation& d,
                            ProbabilityVector& p_out) -> std::optional<double> {
    if (log.count() >= cfg.max_queries) return std::nullopt;
    const Image cand = add_perturbation(x, d);
    p_out = log.predict_proba(cand);
    const double m = margin_from_probabilities(p_out, y, AttackMode::Untargeted);
    if (m > best_margin) {
      best_margin = m;
      best_image = cand;
      best_p = p_out;
    }
    return m;
  };

  const auto finish = [&](bool success) {
    out.success = success;
    out.adversarial = best_image;
    if (!best_p.empty()) {
      out.adversarial_label = argmax_label(best_p);
      if (out.adversarial_label != y)
        out.misclassification_confidence = best_p[out.adversarial_label];
    }
    out.queries_used = log.count();
    out.elapsed_seconds = clock.seconds();
    out.l2_distance = l2_distance(x, out.adversarial);
    out.linf_distance = linf_distance(x, out.adversarial);
    return out;
  };

  ProbabilityVector p;
  for (const auto& member : pop) {
    const auto m = evaluate(member, p);
    if (!m) return finish(false);
    if (*m > 0.0) return finish(true);
  }

  while (log.count() < cfg.max_queries) {
    ++out.iterations;
    const int i = static_cast<int>(rng.uniform_below(cfg.population_size));
    int j = static_cast<int>(rng.uniform_below(cfg.population_size - 1));
    if (j >= i) ++j;

    const auto mi = evaluate(pop[i], p);
    if (!mi) return finish(false);
    if (*mi > 0.0) return finish(true);
    const auto mj = evaluate(pop[j], p);
    if (!mj) return finish(false);
    if (*mj > 0.0) return finish(true);

    const int winner = *mi >= *mj ? i : j;
    const int loser = winner == i ? j : i;
    Perturbation child = pop[loser];
    for (std::size_t k = 0; k < child.data.size(); ++k)
      if (rng.bernoulli(0.5)) child.data[k] = pop[winner].data[k];
    child = mga_mutate(child, cfg.mutation_rate, rng);
    clamp_ball(child);
    pop[loser] = std::move(child);
  }
  return finish(false);
}

inline AttackOutcome mga_attack(Oracle& oracle, const Image& x, int y, const MgaConfig& cfg) {
  RngStream rng(cfg.seed);
  return mga_attack(oracle, x, y, cfg, rng);
}

}  // namespace bbx
