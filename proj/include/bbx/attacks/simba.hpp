#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "bbx/attacks/common.hpp"
#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"
#include "bbx/rng.hpp"

namespace bbx {

struct SimbaConfig {
  double epsilon = 0.5;
  long long max_iters = 6000;
  std::optional<double> omega;  // hard L2 budget on the total perturbation
  bool targeted = false;
  std::optional<int> target_class;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0)) throw ParamError("simba: epsilon must be positive");
    if (max_iters < 0) throw ParamError("simba: max_iters must be non-negative");
    if (omega && !(*omega > 0.0)) throw ParamError("simba: omega must be positive");
    if (targeted && !target_class) throw ParamError("simba: targeted mode needs target_class");
  }
};

// Greedy first-improvement search over a seeded random permutation of the
// pixel-coordinate basis: each direction q tries x*+eps·q then x*-eps·q and
// keeps the first candidate that strictly improves the objective (lower
// true-class probability, or higher target-class probability when targeted).
// Candidates that would leave the omega L2 ball are skipped without querying,
// so the budget is never exceeded. One query scores the starting image; each
// direction costs at most two more.
inline AttackOutcome simba_attack(Oracle& oracle, const Image& x, int y, const SimbaConfig& cfg,
                                  RngStream& rng) {
  cfg.validate();
  if (!oracle.has_probabilities())
    throw ProbabilityAccessError("simba: needs a probability oracle");
  if (cfg.targeted && *cfg.target_class == y)
    throw PreconditionError("simba: target class equals the true label");

  const detail::StopWatch clock;
  detail::QueryLog log(oracle);
  const int pivot = cfg.targeted ? *cfg.target_class : y;

  AttackOutcome out;
  out.adversarial = x;

  ProbabilityVector p = log.predict_proba(x);
  if (pivot >= static_cast<int>(p.size()))
    throw ParamError("simba: class index out of range for this oracle");
  if (argmax_label(p) != y)
    throw PreconditionError("simba: starting image is not classified as the given label");

  double score = p[pivot];  // minimized untargeted, maximized targeted
  std::optional<double> last_conf;
  int label = y;

  std::vector<int> order(x.data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  Image x_star = x;
  const auto improves = [&](double cand) {
    return cfg.targeted ? cand > score : cand < score;
  };
  const auto within_budget = [&](const Image& cand) {
    return !cfg.omega || l2_distance(x, cand) <= *cfg.omega;
  };

  bool done = false;
  for (int q : order) {
    if (done || out.iterations >= cfg.max_iters) break;
    ++out.iterations;
    for (double sign : {+1.0, -1.0}) {
      Image cand = x_star;
      cand.data[q] = clip01(cand.data[q] + sign * cfg.epsilon);
      if (!within_budget(cand)) continue;
      const ProbabilityVector pc = log.predict_proba(cand);
      if (!improves(pc[pivot])) continue;
      x_star = std::move(cand);
      score = pc[pivot];
      label = argmax_label(pc);
      last_conf = pc[label];
      const bool flipped = cfg.targeted ? label == *cfg.target_class : label != y;
      if (flipped) {
        out.success = true;
        done = true;
      }
      break;
    }
  }

  out.adversarial = std::move(x_star);
  out.queries_used = log.count();
  out.elapsed_seconds = clock.seconds();
  out.l2_distance = l2_distance(x, out.adversarial);
  out.linf_distance = linf_distance(x, out.adversarial);
  out.adversarial_label = label;
  if (label != y && last_conf) out.misclassification_confidence = last_conf;
  return out;
}

inline AttackOutcome simba_attack(Oracle& oracle, const Image& x, int y, const SimbaConfig& cfg) {
  RngStream rng(cfg.seed);
  return simba_attack(oracle, x, y, cfg, rng);
}

}  // namespace bbx
