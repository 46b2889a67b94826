#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"

namespace bbx {

enum class AttackMode { Untargeted, Targeted };

struct AttackOutcome {
  Image adversarial;
  bool success = false;
  long long queries_used = 0;
  long long iterations = 0;
  double elapsed_seconds = 0.0;
  double l2_distance = 0.0;
  double linf_distance = 0.0;
  int adversarial_label = -1;
  std::optional<double> misclassification_confidence;
};

// Score form of the boundary function on a known probability vector.
inline double margin_from_probabilities(const ProbabilityVector& p, int y, AttackMode mode,
                                        std::optional<int> target = std::nullopt) {
  if (mode == AttackMode::Targeted && !target)
    throw ParamError("decision_margin: targeted mode needs a target class");
  const int pivot = mode == AttackMode::Targeted ? *target : y;
  if (pivot < 0 || pivot >= static_cast<int>(p.size()))
    throw ParamError("decision_margin: class index " + std::to_string(pivot) + " out of range");
  double best_other = 0.0;
  bool seen = false;
  for (int k = 0; k < static_cast<int>(p.size()); ++k) {
    if (k == pivot) continue;
    if (!seen || p[k] > best_other) best_other = p[k], seen = true;
  }
  if (!seen) throw ParamError("decision_margin: need at least two classes");
  return mode == AttackMode::Targeted ? p[pivot] - best_other : best_other - p[pivot];
}

// Boundary function: positive iff the adversarial condition holds. Probability
// oracles give the score form; label-only oracles give the sign (+1 / -1).
// A margin of exactly 0 sits on the boundary and counts as not adversarial.
inline double decision_margin(Oracle& oracle, const Image& x_star, int y, AttackMode mode,
                              std::optional<int> target = std::nullopt) {
  if (mode == AttackMode::Targeted && !target)
    throw ParamError("decision_margin: targeted mode needs a target class");
  if (!oracle.has_probabilities()) {
    const int label = oracle.predict_label(x_star);
    const bool adversarial = mode == AttackMode::Targeted ? label == *target : label != y;
    return adversarial ? 1.0 : -1.0;
  }
  return margin_from_probabilities(oracle.predict_proba(x_star), y, mode, target);
}

namespace detail {

// Counts this attack's own queries so outcomes can report exact totals; budget
// enforcement stays with whatever CountingOracle the caller may have wrapped.
class QueryLog final : public Oracle {
 public:
  explicit QueryLog(Oracle& inner) : inner_(inner) {}

  ProbabilityVector predict_proba(const Image& x) override {
    ++count_;
    return inner_.predict_proba(x);
  }
  int predict_label(const Image& x) override {
    ++count_;
    return inner_.predict_label(x);
  }
  bool has_probabilities() const override { return inner_.has_probabilities(); }
  int num_classes() const override { return inner_.num_classes(); }
  long long count() const { return count_; }

 private:
  Oracle& inner_;
  long long count_ = 0;
};

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void require_correctly_classified(Oracle& oracle, const Image& x, int y,
                                         const char* attack) {
  if (oracle.predict_label(x) != y)
    throw PreconditionError(std::string(attack) +
                            ": starting image is not classified as the given label");
}

}  // namespace detail

}  // namespace bbx
