#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "bbx/attacks/common.hpp"
#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"
#include "bbx/rng.hpp"

namespace bbx {

struct HsjConfig {
  int batch_size = 64;  // Monte-Carlo probes per gradient-direction estimate
  long long max_iters = 20;
  AttackMode mode = AttackMode::Untargeted;
  std::optional<int> target_class;
  int init_trials = 50;
  double binsearch_threshold = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw ParamError("hsj: batch_size must be at least 1");
    if (max_iters < 0) throw ParamError("hsj: max_iters must be non-negative");
    if (init_trials < 1) throw ParamError("hsj: init_trials must be at least 1");
    if (!(binsearch_threshold > 0.0) || !(binsearch_threshold < 1.0))
      throw ParamError("hsj: binsearch_threshold must lie in (0,1)");
    if (mode == AttackMode::Targeted && !target_class)
      throw ParamError("hsj: targeted mode needs target_class");
  }
};

namespace detail {

inline bool adversarial_at(Oracle& oracle, const Image& p, int y, AttackMode mode,
                           std::optional<int> target) {
  return decision_margin(oracle, p, y, mode, target) > 0.0;
}

inline Image blend(const Image& x, const Image& x_adv, double alpha) {
  Image out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (1.0 - alpha) * x.data[i] + alpha * x_adv.data[i];
  return out;
}

}  // namespace detail

// Bisects the segment [x, x_adv] in the blend parameter until the bracket
// width drops to theta (relative to the full segment), returning the
// adversarial endpoint. Costs ceil(log2(1/theta)) queries, except when x_adv
// is already within theta of x in absolute L2: then one probe of the midpoint
// settles it.
inline Image boundary_binary_search(Oracle& oracle, const Image& x, const Image& x_adv, int y,
                                    AttackMode mode, std::optional<int> target, double theta) {
  if (!(theta > 0.0) || !(theta < 1.0))
    throw ParamError("boundary_binary_search: theta must lie in (0,1)");
  if (!x.same_shape(x_adv)) throw ShapeError("boundary_binary_search: shape mismatch");

  if (l2_distance(x, x_adv) <= theta) {
    const Image mid = detail::blend(x, x_adv, 0.5);
    return detail::adversarial_at(oracle, mid, y, mode, target) ? mid : x_adv;
  }

  double lo = 0.0, hi = 1.0;
  const long long rounds =
      static_cast<long long>(std::ceil(std::log2(1.0 / theta) - 1e-12));
  for (long long i = 0; i < rounds; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (detail::adversarial_at(oracle, detail::blend(x, x_adv, mid), y, mode, target))
      hi = mid;
    else
      lo = mid;
  }
  return detail::blend(x, x_adv, hi);
}

// Draws uniform-noise images until one satisfies the adversarial condition
// (at most init_trials), then bisects it toward x. The result is always
// adversarial; running out of trials raises InitFailure.
inline Image hsj_initialize(Oracle& oracle, const Image& x, int y, const HsjConfig& cfg,
                            RngStream& rng) {
  cfg.validate();
  for (int trial = 0; trial < cfg.init_trials; ++trial) {
    Image noise = x;
    for (auto& v : noise.data) v = rng.uniform();
    if (detail::adversarial_at(oracle, noise, y, cfg.mode, cfg.target_class))
      return boundary_binary_search(oracle, x, noise, y, cfg.mode, cfg.target_class,
                                    cfg.binsearch_threshold);
  }
  throw InitFailure("hsj_initialize: no adversarial noise image within " +
                    std::to_string(cfg.init_trials) + " trials");
}

namespace detail {

// Monte-Carlo gradient-direction estimate at a boundary point: sign-weighted
// unit Gaussian probes at the given radius, with the mean sign subtracted as
// a baseline. Degenerate all-same-sign batches fall back to the signed mean
// probe direction.
inline std::vector<double> hsj_gradient_direction(Oracle& oracle, const Image& at, double radius,
                                                  int batch, int y, AttackMode mode,
                                                  std::optional<int> target, RngStream& rng) {
  const std::size_t dim = at.data.size();
  std::vector<std::vector<double>> probes(batch, std::vector<double>(dim));
  std::vector<double> signs(batch);
  double sign_sum = 0.0;
  for (int b = 0; b < batch; ++b) {
    double norm2 = 0.0;
    for (auto& v : probes[b]) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double inv = 1.0 / std::max(std::sqrt(norm2), 1e-300);
    for (auto& v : probes[b]) v *= inv;
    Image probe = at;
    for (std::size_t i = 0; i < dim; ++i)
      probe.data[i] = clip01(probe.data[i] + radius * probes[b][i]);
    signs[b] = adversarial_at(oracle, probe, y, mode, target) ? 1.0 : -1.0;
    sign_sum += signs[b];
  }
  const double baseline = sign_sum / batch;

  std::vector<double> v(dim, 0.0);
  const bool degenerate = std::abs(baseline) == 1.0;
  for (int b = 0; b < batch; ++b) {
    const double w = degenerate ? baseline / batch : signs[b] - baseline;
    for (std::size_t i = 0; i < dim; ++i) v[i] += w * probes[b][i];
  }
  double norm2 = 0.0;
  for (double c : v) norm2 += c * c;
  const double inv = 1.0 / std::max(std::sqrt(norm2), 1e-300);
  for (auto& c : v) c *= inv;
  return v;
}

}  // namespace detail

// Label-only boundary attack: project to the boundary, estimate a gradient
// direction from sign probes, take the largest geometric step that stays
// adversarial, and re-project. The projected distance to x never increases
// from one iteration to the next (worse candidates are discarded).
inline AttackOutcome hopskipjump_attack(Oracle& oracle, const Image& x, int y,
                                        const HsjConfig& cfg, RngStream& rng,
                                        std::vector<double>* distance_trace = nullptr) {
  cfg.validate();
  if (cfg.mode == AttackMode::Targeted && *cfg.target_class == y)
    throw PreconditionError("hsj: target class equals the true label");

  const detail::StopWatch clock;
  detail::QueryLog log(oracle);
  detail::require_correctly_classified(log, x, y, "hsj");

  AttackOutcome out;
  out.adversarial = x;
  out.adversarial_label = y;

  Image x_proj = x;
  try {
    x_proj = hsj_initialize(log, x, y, cfg, rng);  // already boundary-projected
  } catch (const InitFailure&) {
    out.queries_used = log.count();
    out.elapsed_seconds = clock.seconds();
    return out;
  }

  for (long long t = 1; t <= cfg.max_iters; ++t) {
    ++out.iterations;
    const double d = l2_distance(x, x_proj);
    const double radius = d / std::sqrt(static_cast<double>(t));
    const std::vector<double> v = detail::hsj_gradient_direction(
        log, x_proj, radius, cfg.batch_size, y, cfg.mode, cfg.target_class, rng);

    double step = d / std::sqrt(static_cast<double>(t));
    Image stepped = x_proj;
    bool found = false;
    while (step > 1e-9 * d) {
      Image cand = x_proj;
      for (std::size_t i = 0; i < cand.data.size(); ++i)
        cand.data[i] = clip01(cand.data[i] + step * v[i]);
      if (detail::adversarial_at(log, cand, y, cfg.mode, cfg.target_class)) {
        stepped = std::move(cand);
        found = true;
        break;
      }
      step *= 0.5;
    }
    if (!found) {
      if (distance_trace) distance_trace->push_back(d);
      continue;
    }

    const Image reproj = boundary_binary_search(log, x, stepped, y, cfg.mode, cfg.target_class,
                                                cfg.binsearch_threshold);
    if (l2_distance(x, reproj) <= d) x_proj = reproj;
    if (distance_trace) distance_trace->push_back(l2_distance(x, x_proj));
  }

  out.adversarial = x_proj;
  out.success = true;
  if (log.has_probabilities()) {
    const ProbabilityVector p = log.predict_proba(x_proj);
    out.adversarial_label = argmax_label(p);
    out.misclassification_confidence = p[out.adversarial_label];
  } else {
    out.adversarial_label = log.predict_label(x_proj);
  }
  out.queries_used = log.count();
  out.elapsed_seconds = clock.seconds();
  out.l2_distance = l2_distance(x, out.adversarial);
  out.linf_distance = linf_distance(x, out.adversarial);
  return out;
}

inline AttackOutcome hopskipjump_attack(Oracle& oracle, const Image& x, int y,
                                        const HsjConfig& cfg) {
  RngStream rng(cfg.seed);
  return hopskipjump_attack(oracle, x, y, cfg, rng);
}

}  // namespace bbx
