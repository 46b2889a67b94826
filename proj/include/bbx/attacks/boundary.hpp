#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bbx/attacks/common.hpp"
#include "bbx/attacks/hopskipjump.hpp"
#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"
#include "bbx/rng.hpp"

namespace bbx {

struct BoundaryConfig {
  double epsilon = 0.01;  // source-step contraction factor eta
  double delta = 0.1;     // orthogonal-step scale, relative to current distance
  long long max_iters = 1000;
  int window = 10;  // steps per adaptation round
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0) || !(epsilon < 1.0))
      throw ParamError("boundary: epsilon must lie in (0,1)");
    if (!(delta > 0.0)) throw ParamError("boundary: delta must be positive");
    if (max_iters < 0) throw ParamError("boundary: max_iters must be non-negative");
    if (window < 1) throw ParamError("boundary: window must be at least 1");
  }
};

struct BoundaryStepRecord {
  double old_distance = 0.0;
  double orth_distance = 0.0;   // pre-contraction candidate distance to x
  double cand_distance = 0.0;   // contracted candidate distance to x
  double eta_before = 0.0;      // eta in force when the candidate was built
  bool queried = false;         // false when the box constraint discarded it
  bool accepted = false;
};

using BoundaryTrace = std::vector<BoundaryStepRecord>;

// Decision-only descent along the class boundary: each step perturbs within
// the sphere around x through the current adversarial point (orthogonal step),
// contracts toward x by the factor (1-eta), and keeps the candidate only if
// it stays adversarial. Candidates the contraction pushes outside [0,1] are
// discarded unqueried and count as rejections. Acceptance over a fixed window
// steers eta and delta toward a 50% acceptance rate.
inline AttackOutcome boundary_attack(Oracle& oracle, const Image& x, int y,
                                     const BoundaryConfig& cfg, RngStream& rng,
                                     BoundaryTrace* trace = nullptr) {
  cfg.validate();
  const detail::StopWatch clock;
  detail::QueryLog log(oracle);
  detail::require_correctly_classified(log, x, y, "boundary");

  AttackOutcome out;
  out.adversarial = x;
  out.adversarial_label = y;

  HsjConfig init_cfg;  // untargeted defaults; only initialization fields used
  Image x_star = x;
  try {
    x_star = hsj_initialize(log, x, y, init_cfg, rng);
  } catch (const InitFailure&) {
    out.queries_used = log.count();
    out.elapsed_seconds = clock.seconds();
    return out;
  }

  constexpr double kEtaFloor = 1e-4, kEtaCap = 0.5;
  constexpr double kDeltaFloor = 1e-4, kDeltaCap = 1.0;
  constexpr double kBoxGuard = 1e-9;  // tolerated float spill outside [0,1]
  double eta = cfg.epsilon;
  double delta = cfg.delta;
  int window_accepts = 0, window_steps = 0;
  const std::size_t dim = x.data.size();

  for (long long t = 0; t < cfg.max_iters; ++t) {
    ++out.iterations;
    const double d = l2_distance(x, x_star);

    // Orthogonal step: Gaussian draw scaled to delta*d, component along
    // (x - x_star) removed, then re-projected onto the sphere of radius d.
    std::vector<double> pert(dim);
    double norm2 = 0.0;
    for (auto& v : pert) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double scale = delta * d / std::max(std::sqrt(norm2), 1e-300);
    for (auto& v : pert) v *= scale;

    std::vector<double> axis(dim);
    for (std::size_t i = 0; i < dim; ++i) axis[i] = x.data[i] - x_star.data[i];
    double dot = 0.0;
    for (std::size_t i = 0; i < dim; ++i) dot += pert[i] * axis[i];
    const double d2 = d * d;
    for (std::size_t i = 0; i < dim; ++i) pert[i] -= dot / d2 * axis[i];

    std::vector<double> orth(dim);
    double off2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      orth[i] = x_star.data[i] + pert[i] - x.data[i];
      off2 += orth[i] * orth[i];
    }
    const double sphere = d / std::max(std::sqrt(off2), 1e-300);
    for (std::size_t i = 0; i < dim; ++i) orth[i] = x.data[i] + orth[i] * sphere;

    Image cand = x_star;
    bool in_box = true;
    for (std::size_t i = 0; i < dim; ++i) {
      const double v = x.data[i] + (1.0 - eta) * (orth[i] - x.data[i]);
      if (v < -kBoxGuard || v > 1.0 + kBoxGuard) {
        in_box = false;
        break;
      }
      cand.data[i] = clip01(v);
    }

    BoundaryStepRecord rec;
    rec.old_distance = d;
    rec.eta_before = eta;
    if (in_box) {
      double orth_d2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i)
        orth_d2 += (orth[i] - x.data[i]) * (orth[i] - x.data[i]);
      rec.orth_distance = std::sqrt(orth_d2);
      rec.cand_distance = l2_distance(x, cand);
      rec.queried = true;
      if (detail::adversarial_at(log, cand, y, AttackMode::Untargeted, std::nullopt)) {
        rec.accepted = true;
        x_star = std::move(cand);
      }
    }
    if (trace) trace->push_back(rec);

    window_accepts += rec.accepted ? 1 : 0;
    if (++window_steps == cfg.window) {
      const double rate = static_cast<double>(window_accepts) / cfg.window;
      if (rate > 0.5) {
        eta = std::min(eta * 1.5, kEtaCap);
        delta = std::min(delta * 1.1, kDeltaCap);
      } else {
        eta = std::max(eta * 0.7, kEtaFloor);
        delta = std::max(delta * 0.9, kDeltaFloor);
      }
      window_accepts = window_steps = 0;
    }
  }

  out.adversarial = x_star;
  out.success = true;
  if (log.has_probabilities()) {
    const ProbabilityVector p = log.predict_proba(x_star);
    out.adversarial_label = argmax_label(p);
    out.misclassification_confidence = p[out.adversarial_label];
  } else {
    out.adversarial_label = log.predict_label(x_star);
  }
  out.queries_used = log.count();
  out.elapsed_seconds = clock.seconds();
  out.l2_distance = l2_distance(x, out.adversarial);
  out.linf_distance = linf_distance(x, out.adversarial);
  return out;
}

inline AttackOutcome boundary_attack(Oracle& oracle, const Image& x, int y,
                                     const BoundaryConfig& cfg) {
  RngStream rng(cfg.seed);
  return boundary_attack(oracle, x, y, cfg, rng);
}

}  // namespace bbx
