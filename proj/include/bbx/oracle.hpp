#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "bbx/errors.hpp"
#include "bbx/image.hpp"

namespace bbx {

// Per-class probabilities; entries nonnegative, sum within 1e-5 of one.
using ProbabilityVector = std::vector<double>;

inline bool probability_vector_valid(const ProbabilityVector& p) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::fabs(sum - 1.0) <= 1e-5;
}

// Ties broken by lowest class index, so replays are deterministic.
inline int argmax_label(const ProbabilityVector& p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

// The black-box target. Implementations must be deterministic: the same
// image always yields the same output, and predict_label agrees with
// argmax of predict_proba wherever both are supported.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual ProbabilityVector predict_proba(const Image& x) = 0;
  virtual int predict_label(const Image& x) { return argmax_label(predict_proba(x)); }
  virtual bool has_probabilities() const { return true; }
  virtual int num_classes() const = 0;
};

// Wraps an oracle, counting every predict call and enforcing an optional
// hard budget B: the (B+1)-th query throws without touching the inner
// oracle. Single-owner per attack run; the counter is not synchronized.
class CountingOracle final : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner, std::optional<long> budget = std::nullopt)
      : inner_(inner), budget_(budget) {}

  ProbabilityVector predict_proba(const Image& x) override {
    charge();
    return inner_.predict_proba(x);
  }
  int predict_label(const Image& x) override {
    charge();
    return inner_.predict_label(x);
  }
  bool has_probabilities() const override { return inner_.has_probabilities(); }
  int num_classes() const override { return inner_.num_classes(); }

  long queries_used() const { return queries_used_; }
  std::optional<long> budget() const { return budget_; }
  // Queries left under the budget; nullopt when unbudgeted.
  std::optional<long> remaining() const {
    if (!budget_) return std::nullopt;
    return *budget_ - queries_used_;
  }

 private:
  void charge() {
    if (budget_ && queries_used_ >= *budget_)
      throw QueryBudgetExceeded("query budget of " + std::to_string(*budget_) + " exhausted");
    ++queries_used_;
  }

  Oracle& inner_;
  std::optional<long> budget_;
  long queries_used_ = 0;
};

// Hard-label view: decision-based attacks are compiled against this to
// prove they never touch probabilities.
class LabelOnlyOracle final : public Oracle {
 public:
  explicit LabelOnlyOracle(Oracle& inner) : inner_(inner) {}

  ProbabilityVector predict_proba(const Image&) override {
    throw ProbabilityAccessError("probability query against a label-only oracle");
  }
  int predict_label(const Image& x) override { return inner_.predict_label(x); }
  bool has_probabilities() const override { return false; }
  int num_classes() const override { return inner_.num_classes(); }

 private:
  Oracle& inner_;
};

}  // namespace bbx
