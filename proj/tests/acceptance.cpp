// Acceptance gate. Runs eleven end-to-end checks against pinned scenarios and
// prints one PASS/FAIL line each; the process exits nonzero if any fail.
// Every tolerance and time cap lives in the constants below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "bbx/adv_train.hpp"
#include "bbx/attacks/dispatch.hpp"
#include "bbx/cifar10.hpp"
#include "bbx/dataset.hpp"
#include "bbx/defenses.hpp"
#include "bbx/harness.hpp"
#include "bbx/metrics.hpp"
#include "bbx/model.hpp"
#include "bbx/ppm.hpp"
#include "bbx/train.hpp"
#include "bbx/weights_io.hpp"

namespace {

using namespace bbx;
namespace fs = std::filesystem;

constexpr double kSimbaTimeCap = 10.0;         // seconds, criterion 1
constexpr double kGeometryTimeCap = 60.0;      // seconds, criterion 2
constexpr double kHsjAbsTol = 1e-2;            // absolute L2 error, criterion 2
constexpr double kBoundaryRelTol = 0.05;       // relative L2 error, criterion 2
constexpr double kStepContractTol = 1e-6;      // contraction identity, criterion 3
constexpr double kMutationStatTol = 0.01;      // flip-fraction slack, criterion 4
constexpr int kMgaSuccessFloor = 95;           // of 100 feasible trials, criterion 4
constexpr double kSuccessFloor = 0.90;         // per attack, criterion 5
constexpr double kSuiteTimeCap = 300.0;        // seconds, criterion 5
constexpr double kJpegConstTol = 1.0 / 255.0;  // criterion 6
constexpr double kRecoveryDrop = 0.30;         // success-rate points, criterion 7
constexpr double kCleanAccTol = 0.05;          // accuracy points, criterion 8
constexpr double kSsimZeroVarTol = 1e-8;       // criterion 9
constexpr double kGradTol = 1e-4;              // criterion 10
constexpr double kMonotoneSlack = 1e-12;       // distance traces, criterion 3

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Collects requirements; keeps the first failure message for the report line.
struct Checker {
  bool ok = true;
  std::string first;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (ok) first = what;
    ok = false;
  }
};

template <typename E, typename F>
bool throws(F&& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

void set_array(ModelWeights& w, const std::string& name, std::vector<double> values) {
  auto& arr = w.array(name);
  if (arr.values.size() != values.size()) throw std::logic_error("set_array: size mismatch");
  arr.values = std::move(values);
}

// Two-class linear score 3*sum(x) against a fixed bias: the label flips
// exactly when sum(x) crosses 0.4, so reachability is a closed-form fact.
ModelWeights sum_threshold_model(int side) {
  Architecture arch = Architecture::linear(side, side, 1, 2);
  RngStream rng(0);
  ModelWeights w = init_weights(arch, rng);
  std::vector<double> head(2 * side * side, 0.0);
  for (int i = 0; i < side * side; ++i) head[side * side + i] = 3.0;
  set_array(w, "head.weight", std::move(head));
  set_array(w, "head.bias", {1.2, 0.0});
  return w;
}

// Two-class linear model whose decision boundary is the hyperplane
// g.x + c = 0; label 1 on the positive side.
ModelWeights hyperplane_model(const std::vector<double>& g, double c, int side) {
  Architecture arch = Architecture::linear(side, side, 1, 2);
  RngStream rng(0);
  ModelWeights w = init_weights(arch, rng);
  std::vector<double> head(2 * side * side, 0.0);
  for (int i = 0; i < side * side; ++i) head[side * side + i] = g[i];
  set_array(w, "head.weight", std::move(head));
  set_array(w, "head.bias", {0.0, c});
  return w;
}

// Forwards to the wrapped oracle while running a probe on every query.
class SpyOracle final : public Oracle {
 public:
  SpyOracle(Oracle& inner, std::function<void(const Image&)> check)
      : inner_(inner), check_(std::move(check)) {}
  ProbabilityVector predict_proba(const Image& x) override {
    check_(x);
    return inner_.predict_proba(x);
  }
  int predict_label(const Image& x) override {
    check_(x);
    return inner_.predict_label(x);
  }
  bool has_probabilities() const override { return inner_.has_probabilities(); }
  int num_classes() const override { return inner_.num_classes(); }

 private:
  Oracle& inner_;
  std::function<void(const Image&)> check_;
};

struct SimbaRef {
  Image adversarial;
  bool success = false;
  long long queries = 0;
  long long iterations = 0;
  int label = -1;
};

// Independent restatement of the greedy contract: one scoring query, then a
// seeded permutation of coordinates, +eps before -eps, first strict
// improvement wins, out-of-budget candidates skipped unqueried.
SimbaRef simba_reference(Oracle& oracle, const Image& x, int y, const SimbaConfig& cfg) {
  SimbaRef r;
  r.adversarial = x;
  r.label = y;
  RngStream rng(cfg.seed);
  std::vector<int> order(x.data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int pivot = cfg.targeted ? *cfg.target_class : y;

  ProbabilityVector p = oracle.predict_proba(x);
  ++r.queries;
  double score = p[pivot];
  for (int q : order) {
    if (r.success || r.iterations >= cfg.max_iters) break;
    ++r.iterations;
    for (double sign : {+1.0, -1.0}) {
      Image cand = r.adversarial;
      cand.data[q] = clip01(cand.data[q] + sign * cfg.epsilon);
      if (cfg.omega && l2_distance(x, cand) > *cfg.omega) continue;
      ++r.queries;
      const ProbabilityVector pc = oracle.predict_proba(cand);
      const bool better = cfg.targeted ? pc[pivot] > score : pc[pivot] < score;
      if (!better) continue;
      r.adversarial = cand;
      score = pc[pivot];
      r.label = argmax_label(pc);
      r.success = cfg.targeted ? r.label == *cfg.target_class : r.label != y;
      break;
    }
  }
  return r;
}

// Hyperplane at distance 0.1 from the all-0.5 image with an all-positive
// normal; points jittered around the grid center keep label 0.
struct PlaneCase {
  std::vector<double> g;
  double c = 0.0;
  double norm = 0.0;
};

PlaneCase make_plane_case() {
  PlaneCase pc;
  pc.g.resize(16);
  double dot05 = 0.0, norm2 = 0.0;
  for (int i = 0; i < 16; ++i) {
    pc.g[i] = 0.5 + 0.03 * i;
    dot05 += pc.g[i] * 0.5;
    norm2 += pc.g[i] * pc.g[i];
  }
  pc.norm = std::sqrt(norm2);
  pc.c = -dot05 - 0.1 * pc.norm;
  return pc;
}

// Seeded label-0 points whose distance to the plane lies in [0.05, 0.2].
std::vector<std::pair<Image, double>> plane_points(const PlaneCase& pc, Oracle& oracle, int count) {
  std::vector<std::pair<Image, double>> points;
  RngStream rng(4242);
  while (static_cast<int>(points.size()) < count) {
    Image x(4, 4, 1);
    for (double& v : x.data) v = 0.35 + 0.3 * rng.uniform();
    double margin = pc.c;
    for (int i = 0; i < 16; ++i) margin += pc.g[i] * x.data[i];
    const double d = -margin / pc.norm;
    if (d < 0.05 || d > 0.2) continue;
    if (oracle.predict_label(x) != 0) continue;
    points.emplace_back(std::move(x), d);
  }
  return points;
}

// Shared 8x8 two-class fixture: sigma 0.03 keeps class margins inside the
// default MGA ball while a 60-epoch MLP still separates the classes exactly.
struct MlpFixture {
  LabeledDataset data;
  ModelWeights weights;
};

const MlpFixture& mlp_fixture() {
  static const MlpFixture fx = [] {
    MlpFixture f;
    f.data = generate_synthetic(2, 150, 8, 8, 1, 0.03, 11);
    TrainConfig tc;
    tc.epochs = 60;
    RngStream rng(99);
    f.weights = train_sgd(Architecture::mlp(8, 8, 1, 2, {16}), f.data, tc, rng);
    return f;
  }();
  return fx;
}

// 1. The production SimBA agrees step for step with the greedy reference on
// 50 seeded 4x4 grayscale images against a trained linear model.
std::string check_simba_reference(Checker& c) {
  const auto t0 = Clock::now();
  const LabeledDataset train = generate_synthetic(2, 40, 4, 4, 1, 0.05, 21);
  TrainConfig tc;
  tc.epochs = 40;
  RngStream trng(31);
  const ModelWeights w = train_sgd(Architecture::linear(4, 4, 1, 2), train, tc, trng);
  ModelOracle oracle(w);

  RngStream imgs(77);
  int agreed = 0;
  for (int i = 0; i < 50; ++i) {
    Image x(4, 4, 1);
    for (double& v : x.data) v = 0.2 + 0.6 * imgs.uniform();
    const int y = oracle.predict_label(x);
    SimbaConfig cfg;
    cfg.seed = derive_seed(99, i);
    const AttackOutcome out = simba_attack(oracle, x, y, cfg);
    const SimbaRef ref = simba_reference(oracle, x, y, cfg);
    c.expect(out.success == ref.success, fmt("run %d: success flags differ", i));
    c.expect(out.adversarial_label == ref.label, fmt("run %d: final labels differ", i));
    c.expect(out.queries_used == ref.queries, fmt("run %d: query counts differ", i));
    c.expect(out.iterations == ref.iterations, fmt("run %d: iteration counts differ", i));
    c.expect(out.adversarial == ref.adversarial, fmt("run %d: adversarial images differ", i));
    if (c.ok) ++agreed;
  }
  const double dt = elapsed(t0);
  c.expect(dt < kSimbaTimeCap, fmt("took %.1fs, cap %.0fs", dt, kSimbaTimeCap));
  return fmt("50/50 seeded runs bit-identical in %.2fs", dt);
}

// 2. Both geometric attacks land within tolerance of the closed-form
// point-to-hyperplane distance on 20 seeded points, at default settings.
std::string check_geometry_distance(Checker& c) {
  const auto t0 = Clock::now();
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  double worst_hsj = 0.0, worst_bd = 1.0;
  int id = 0;
  for (const auto& [x, d] : plane_points(pc, oracle, 20)) {
    ++id;
    HsjConfig hc;
    hc.seed = derive_seed(7, id);
    RngStream hr(hc.seed);
    const AttackOutcome h = hopskipjump_attack(oracle, x, 0, hc, hr);
    c.expect(h.success, fmt("point %d: hopskipjump failed", id));
    c.expect(std::fabs(h.l2_distance - d) <= kHsjAbsTol,
             fmt("point %d: hsj off by %.4f", id, std::fabs(h.l2_distance - d)));
    worst_hsj = std::max(worst_hsj, std::fabs(h.l2_distance - d));

    BoundaryConfig bc;
    bc.seed = derive_seed(8, id);
    const AttackOutcome b = boundary_attack(oracle, x, 0, bc);
    c.expect(b.success, fmt("point %d: boundary failed", id));
    c.expect(b.l2_distance <= (1.0 + kBoundaryRelTol) * d && b.l2_distance >= d - 1e-9,
             fmt("point %d: boundary ratio %.4f", id, b.l2_distance / d));
    worst_bd = std::max(worst_bd, b.l2_distance / d);
  }
  const double dt = elapsed(t0);
  c.expect(dt < kGeometryTimeCap, fmt("took %.1fs, cap %.0fs", dt, kGeometryTimeCap));
  return fmt("hsj worst |err| %.4f, boundary worst ratio %.4f in %.2fs", worst_hsj, worst_bd, dt);
}

// 3. Accepted boundary steps contract by exactly (1 - eta), and both
// geometric attacks report monotone non-increasing distances on every run.
std::string check_step_contracts(Checker& c) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  long long accepted_steps = 0;
  int id = 0;
  for (const auto& [x, d] : plane_points(pc, oracle, 20)) {
    (void)d;
    ++id;
    BoundaryConfig bc;
    bc.seed = derive_seed(18, id);
    RngStream br(bc.seed);
    BoundaryTrace trace;
    boundary_attack(oracle, x, 0, bc, br, &trace);
    c.expect(!trace.empty(), fmt("run %d: empty boundary trace", id));
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const BoundaryStepRecord& rec = trace[k];
      if (rec.accepted) {
        c.expect(rec.queried, fmt("run %d: accepted an unqueried candidate", id));
        const double ratio = rec.cand_distance / rec.old_distance;
        c.expect(std::fabs(ratio - (1.0 - rec.eta_before)) <= kStepContractTol,
                 fmt("run %d step %zu: contraction %.8f vs eta %.8f", id, k, ratio,
                     rec.eta_before));
        ++accepted_steps;
      }
      if (k + 1 < trace.size())
        c.expect(trace[k + 1].old_distance <= trace[k].old_distance + kMonotoneSlack,
                 fmt("run %d step %zu: boundary distance increased", id, k));
    }

    HsjConfig hc;
    hc.seed = derive_seed(19, id);
    RngStream hr(hc.seed);
    std::vector<double> dtrace;
    hopskipjump_attack(oracle, x, 0, hc, hr, &dtrace);
    c.expect(!dtrace.empty(), fmt("run %d: empty hsj trace", id));
    for (std::size_t k = 0; k + 1 < dtrace.size(); ++k)
      c.expect(dtrace[k + 1] <= dtrace[k] + kMonotoneSlack,
               fmt("run %d step %zu: hsj distance increased", id, k));
  }
  return fmt("%lld accepted steps contract exactly; 20+20 traces monotone", accepted_steps);
}

// 4. Mutation semantics are exact at the rate extremes and statistically at
// one half; every queried candidate stays inside the default ball; the
// feasible linear case succeeds on at least 95 of 100 seeds.
std::string check_mga(Checker& c) {
  Perturbation base(4, 4, 1, MgaConfig{}.epsilon);
  for (std::size_t i = 0; i < base.data.size(); i += 3) base.data[i] = -base.data[i];
  RngStream mrng(5);
  c.expect(mga_mutate(base, 0.0, mrng).data == base.data, "rate 0 changed a sign");
  const Perturbation flipped = mga_mutate(base, 1.0, mrng);
  for (std::size_t i = 0; i < base.data.size(); ++i)
    c.expect(flipped.data[i] == -base.data[i], "rate 1 left a sign in place");

  const Perturbation wide(1000, 100, 1, MgaConfig{}.epsilon);
  RngStream frng(6);
  const Perturbation half = mga_mutate(wide, 0.5, frng);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < wide.data.size(); ++i)
    if (half.data[i] != wide.data[i]) ++flips;
  const double frac = static_cast<double>(flips) / static_cast<double>(wide.data.size());
  c.expect(std::fabs(frac - 0.5) <= kMutationStatTol, fmt("flip fraction %.4f", frac));

  const ModelWeights tw = sum_threshold_model(4);
  ModelOracle oracle(tw);
  const Image x(4, 4, 1, 0.3 / 16.0);
  long long seen = 0;
  SpyOracle spy(oracle, [&](const Image& q) {
    ++seen;
    c.expect(q.same_shape(x), "query shape drifted");
    double linf = 0.0;
    bool same = true;
    for (std::size_t i = 0; i < q.data.size(); ++i) {
      linf = std::max(linf, std::fabs(q.data[i] - x.data[i]));
      same = same && q.data[i] == x.data[i];
    }
    c.expect(linf <= MgaConfig{}.epsilon + 1e-12, fmt("query left the ball: %.6f", linf));
    c.expect(!same, "queried the clean input");
  });
  MgaConfig ball_cfg;
  ball_cfg.seed = 3;
  const AttackOutcome ball_out = mga_attack(spy, x, 0, ball_cfg);
  c.expect(seen == ball_out.queries_used,
           fmt("saw %lld queries, reported %lld", seen, ball_out.queries_used));

  // Hopeless oracle: the attack burns its whole budget, so every mutation and
  // crossover product passes through the ball probe.
  class Stubborn final : public Oracle {
   public:
    ProbabilityVector predict_proba(const Image&) override { return {0.9, 0.1}; }
    int num_classes() const override { return 2; }
  } stubborn;
  SpyOracle full_spy(stubborn, [&](const Image& q) {
    ++seen;
    double linf = 0.0;
    for (std::size_t i = 0; i < q.data.size(); ++i)
      linf = std::max(linf, std::fabs(q.data[i] - x.data[i]));
    c.expect(linf <= MgaConfig{}.epsilon + 1e-12, fmt("budget run left the ball: %.6f", linf));
  });
  MgaConfig budget_cfg;
  budget_cfg.seed = 4;
  const AttackOutcome budget_out = mga_attack(full_spy, x, 0, budget_cfg);
  c.expect(!budget_out.success, "stubborn oracle conceded");
  c.expect(budget_out.queries_used == budget_cfg.max_queries, "budget not exhausted");

  int successes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    MgaConfig cfg;
    cfg.seed = derive_seed(41, trial);
    const AttackOutcome out = mga_attack(oracle, x, 0, cfg);
    if (!out.success) continue;
    c.expect(oracle.predict_label(out.adversarial) != 0, fmt("trial %d: stale success", trial));
    ++successes;
  }
  c.expect(successes >= kMgaSuccessFloor, fmt("only %d/100 feasible successes", successes));
  return fmt("mutation exact, ball respected over %lld queries, %d/100 successes", seen,
             successes);
}

// 5. Each attack clears a 90% success floor on the 200-image evaluation set
// against the trained MLP, with every success re-verified by a fresh query.
std::string check_success_floor(Checker& c) {
  const auto t0 = Clock::now();
  const MlpFixture& fx = mlp_fixture();
  ModelOracle oracle(fx.weights);
  std::vector<Oracle*> oracles{&oracle};
  const LabeledDataset eval = select_evaluation_set(fx.data, oracles, 100);
  c.expect(eval.images.size() == 200, fmt("evaluation set has %zu images", eval.images.size()));

  const std::vector<AttackSpec> specs{SimbaConfig{}, HsjConfig{}, BoundaryConfig{}, MgaConfig{}};
  std::string note;
  for (const AttackSpec& spec : specs) {
    int successes = 0;
    for (std::size_t i = 0; i < eval.images.size(); ++i) {
      const AttackSpec seeded = with_seed(spec, derive_seed(1234, i));
      const AttackOutcome out = run_attack(oracle, eval.images[i], eval.labels[i], seeded);
      if (!out.success) continue;
      const int fresh = oracle.predict_label(out.adversarial);
      c.expect(fresh != eval.labels[i],
               fmt("%s image %zu: fresh query disagrees", attack_name(spec).c_str(), i));
      c.expect(fresh == out.adversarial_label,
               fmt("%s image %zu: reported label stale", attack_name(spec).c_str(), i));
      ++successes;
    }
    const double rate = successes / static_cast<double>(eval.images.size());
    c.expect(rate >= kSuccessFloor,
             fmt("%s success %.3f below %.2f", attack_name(spec).c_str(), rate, kSuccessFloor));
    note += fmt("%s %d ", attack_name(spec).c_str(), successes);
  }
  const double dt = elapsed(t0);
  c.expect(dt < kSuiteTimeCap, fmt("took %.1fs, cap %.0fs", dt, kSuiteTimeCap));
  return note + fmt("of 200 in %.1fs", dt);
}

// 6. Squeezing is idempotent with a bounded palette, median outputs come from
// their own windows, JPEG at quality 100 barely moves constants, and the
// default defense settings are 4 bits / kernel 2 / quality 75.
std::string check_defense_properties(Checker& c) {
  RngStream rng(12);
  Image x(8, 9, 3);
  for (double& v : x.data) v = rng.uniform();

  for (int depth = 1; depth <= 7; ++depth) {
    const Image y = bit_squeeze(x, depth);
    c.expect(bit_squeeze(y, depth) == y, fmt("depth %d: squeeze not idempotent", depth));
    for (int ch = 0; ch < 3; ++ch) {
      std::set<double> palette;
      for (int r = 0; r < y.height; ++r)
        for (int col = 0; col < y.width; ++col) palette.insert(y.at(r, col, ch));
      c.expect(palette.size() <= (1u << depth),
               fmt("depth %d: %zu distinct values", depth, palette.size()));
    }
  }

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  Image m(7, 6, 3);
  for (double& v : m.data) v = rng.uniform();
  for (int k = 2; k <= 3; ++k) {
    const Image out = median_smooth(m, k);
    const int anchor = (k - 1) / 2;
    for (int ch = 0; ch < m.channels; ++ch)
      for (int r = 0; r < m.height; ++r)
        for (int col = 0; col < m.width; ++col) {
          bool member = false;
          for (int dy = 0; dy < k && !member; ++dy)
            for (int dx = 0; dx < k && !member; ++dx)
              member = m.at(reflect(r - anchor + dy, m.height), reflect(col - anchor + dx, m.width),
                            ch) == out.at(r, col, ch);
          c.expect(member, fmt("k=%d: output at (%d,%d,%d) not in its window", k, r, col, ch));
        }
  }

  for (int channels : {1, 3})
    for (double level : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const Image flat(16, 16, channels, level);
      const Image filtered = jpeg_filter(flat, 100);
      for (double v : filtered.data)
        c.expect(std::fabs(v - level) <= kJpegConstTol,
                 fmt("q=100 constant %.2f moved to %.4f", level, v));
    }

  c.expect(BitSqueeze{}.depth == 4, "default squeeze depth");
  c.expect(MedianSmooth{}.kernel == 2, "default median kernel");
  c.expect(Jpeg{}.quality == 75, "default jpeg quality");
  return "squeeze/median/jpeg properties hold; defaults 4/2/75";
}

// 7. Median smoothing undoes a large share of boundary-attack successes
// against the MLP: the defended success rate drops by at least 30 points and
// a strictly positive fraction of true labels comes back.
std::string check_median_recovery(Checker& c) {
  const MlpFixture& fx = mlp_fixture();
  ModelOracle oracle(fx.weights);
  std::vector<Oracle*> oracles{&oracle};
  const LabeledDataset eval = select_evaluation_set(fx.data, oracles, 50);
  c.expect(eval.images.size() == 100, fmt("trial set has %zu images", eval.images.size()));

  int raw = 0, defended = 0, recovered = 0;
  for (std::size_t i = 0; i < eval.images.size(); ++i) {
    BoundaryConfig cfg;
    cfg.seed = derive_seed(1234, i);
    const AttackOutcome out = boundary_attack(oracle, eval.images[i], eval.labels[i], cfg);
    if (!out.success) continue;
    ++raw;
    const int label = oracle.predict_label(median_smooth(out.adversarial, MedianSmooth{}.kernel));
    if (label == eval.labels[i])
      ++recovered;
    else
      ++defended;
  }
  const double drop = (raw - defended) / static_cast<double>(eval.images.size());
  c.expect(recovered > 0, "no true label recovered");
  c.expect(drop >= kRecoveryDrop, fmt("success only dropped %.2f points", drop));
  return fmt("success %d/100 undefended, %d/100 defended, %d recovered", raw, defended, recovered);
}

// 8. Training on 500 crafted examples lowers the attack success rate below
// the clean-trained baseline while keeping clean accuracy within 5 points.
std::string check_adversarial_training(Checker& c) {
  const LabeledDataset data = generate_synthetic(2, 250, 8, 8, 1, 0.03, 11);
  const LabeledDataset held_out = generate_synthetic(2, 100, 8, 8, 1, 0.03, 500);
  const Architecture arch = Architecture::mlp(8, 8, 1, 2, {16});
  TrainConfig pretrain;
  pretrain.epochs = 80;
  TrainConfig continuation;
  continuation.epochs = 20;
  continuation.learning_rate = 0.01;
  SimbaConfig craft;
  craft.epsilon = 0.3;

  AdvTrainReport report;
  const ModelWeights baseline =
      adversarial_train(arch, data, craft, 0, pretrain, continuation, 77);
  const ModelWeights hardened =
      adversarial_train(arch, data, craft, 500, pretrain, continuation, 77, &report);
  c.expect(report.attempted == 500, fmt("attempted %d of 500", report.attempted));
  c.expect(report.generated == 500, fmt("generated %d of 500", report.generated));

  const double acc_base = accuracy(baseline, held_out);
  const double acc_hard = accuracy(hardened, held_out);
  c.expect(std::fabs(acc_base - acc_hard) <= kCleanAccTol,
           fmt("clean accuracy %.3f vs %.3f", acc_base, acc_hard));

  ModelOracle base_oracle(baseline), hard_oracle(hardened);
  std::vector<Oracle*> both{&base_oracle, &hard_oracle};
  const LabeledDataset eval = select_evaluation_set(data, both, 50);
  c.expect(eval.images.size() == 100, fmt("shared set has %zu images", eval.images.size()));

  int base_successes = 0, hard_successes = 0;
  for (std::size_t i = 0; i < eval.images.size(); ++i) {
    SimbaConfig probe;
    probe.epsilon = 0.2;
    probe.omega = 0.5;
    probe.seed = derive_seed(4321, i);
    base_successes += simba_attack(base_oracle, eval.images[i], eval.labels[i], probe).success;
    hard_successes += simba_attack(hard_oracle, eval.images[i], eval.labels[i], probe).success;
  }
  c.expect(hard_successes < base_successes,
           fmt("success %d -> %d, not strictly lower", base_successes, hard_successes));
  return fmt("success %d/100 -> %d/100, clean accuracy %.2f vs %.2f", base_successes,
             hard_successes, acc_base, acc_hard);
}

// 9. Metric closed forms: self-similarity is one, the zero-variance constant
// case equals C1/(1+C1), the noise rate is its complement, and the success
// rate is plain division.
std::string check_metric_forms(Checker& c) {
  RngStream rng(23);
  Image x(9, 7, 1);
  for (double& v : x.data) v = rng.uniform();
  c.expect(std::fabs(ssim(x, x) - 1.0) <= 1e-12, fmt("ssim(x,x) = %.15f", ssim(x, x)));

  const Image black(8, 8, 1, 0.0), white(8, 8, 1, 1.0);
  constexpr double kC1 = 0.01 * 0.01;
  const double expected = kC1 / (1.0 + kC1);
  c.expect(std::fabs(ssim(black, white) - expected) <= kSsimZeroVarTol,
           fmt("zero-variance ssim %.10f vs %.10f", ssim(black, white), expected));

  for (int i = 0; i < 3; ++i) {
    Image a(6, 5, 3), b(6, 5, 3);
    for (double& v : a.data) v = rng.uniform();
    for (double& v : b.data) v = rng.uniform();
    c.expect(noise_rate(a, b) == 1.0 - ssim(a, b), "noise rate is not the ssim complement");
  }

  std::vector<AttackOutcome> outcomes(8);
  for (int i : {0, 3, 5}) outcomes[i].success = true;
  c.expect(attack_success_rate(outcomes) == 3.0 / 8.0, "success rate arithmetic");
  c.expect(throws<EmptyInputError>([] { attack_success_rate({}); }),
           "empty outcome list must throw");
  return "identity, zero-variance, complement, and ratio forms all exact";
}

// 10. The harness is deterministic across worker counts, query accounting is
// exact for all four attacks, and analytic gradients match finite differences.
std::string check_reproducibility(Checker& c) {
  ExperimentConfig cfg;
  SyntheticSpec ds;
  ds.classes = 2;
  ds.per_class = 12;
  ds.height = 5;
  ds.width = 5;
  ds.channels = 1;
  ds.noise_sigma = 0.08;
  cfg.dataset = ds;
  cfg.model.kind = "linear";
  cfg.model.train.epochs = 40;
  SimbaConfig attack;
  attack.epsilon = 0.4;
  cfg.attack = attack;
  cfg.defenses = {BitSqueeze{4}, MedianSmooth{2}};
  cfg.eval_per_class = 3;
  cfg.seed = 5;
  cfg.repetitions = 2;

  const ExperimentSetup setup = prepare_experiment(cfg);
  cfg.workers = 1;
  const std::string serial = normalize_results_csv(records_to_csv(run_experiment(cfg, setup)));
  cfg.workers = 4;
  const std::string parallel = normalize_results_csv(records_to_csv(run_experiment(cfg, setup)));
  c.expect(serial == parallel, "normalized results differ across worker counts");

  const MlpFixture& fx = mlp_fixture();
  ModelOracle oracle(fx.weights);
  std::vector<Oracle*> oracles{&oracle};
  const LabeledDataset eval = select_evaluation_set(fx.data, oracles, 5);
  int trials = 0;
  for (const AttackSpec& spec :
       {AttackSpec{SimbaConfig{}}, AttackSpec{HsjConfig{}}, AttackSpec{BoundaryConfig{}},
        AttackSpec{MgaConfig{}}}) {
    for (std::size_t i = 0; i < eval.images.size(); ++i) {
      CountingOracle counted(oracle);
      const AttackSpec seeded = with_seed(spec, derive_seed(77, i));
      const AttackOutcome out = run_attack(counted, eval.images[i], eval.labels[i], seeded);
      c.expect(counted.queries_used() == out.queries_used,
               fmt("%s trial %zu: counted %ld, reported %lld", attack_name(spec).c_str(), i,
                   counted.queries_used(), out.queries_used));
      ++trials;
    }
  }

  double worst_grad = 0.0;
  RngStream xr(31);
  int arch_index = 0;
  for (const Architecture& arch :
       {Architecture::linear(5, 5, 1, 3), Architecture::mlp(5, 5, 1, 3, {7, 5}),
        Architecture::cnn(6, 6, 3, 4, 3)}) {
    RngStream wr(derive_seed(13, ++arch_index));
    const ModelWeights w = init_weights(arch, wr);
    Image x(arch.input_height, arch.input_width, arch.input_channels);
    for (double& v : x.data) v = xr.uniform();
    RngStream gr(17);
    const double err = gradient_check(w, x, 1, gr);
    c.expect(err <= kGradTol, fmt("gradient mismatch %.2e", err));
    worst_grad = std::max(worst_grad, err);
  }
  return fmt("csv byte-identical across 1/4 workers; %d trials counted exactly; grad err %.1e",
             trials, worst_grad);
}

// 11. Weight files and PPM images survive round trips bit for bit, the
// CIFAR-10 binary layout decodes to exact pixels, and malformed inputs raise
// the documented format errors.
std::string check_formats(Checker& c) {
  const fs::path dir = fs::temp_directory_path() / "bbx_acceptance";
  fs::create_directories(dir);

  RngStream rng(3);
  const ModelWeights w = init_weights(Architecture::mlp(3, 4, 1, 2, {5}), rng);
  const std::string wpath = (dir / "weights.bbw").string();
  save_weights(w, wpath);
  c.expect(load_weights(wpath) == w, "weight file round trip changed the model");

  Image img(4, 5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<double>((i * 13) % 256) / 255.0;
  c.expect(decode_ppm(encode_ppm(img)) == img, "ppm codec round trip");
  const std::string ppath = (dir / "img.ppm").string();
  write_ppm(img, ppath);
  c.expect(read_ppm(ppath) == img, "ppm file round trip");

  std::string buf(2 * 3073, '\0');
  buf[0] = 7;
  buf[1] = static_cast<char>(255);
  buf[1 + 1024 + 2 * 32 + 3] = 51;
  buf[1 + 2048 + 31 * 32 + 31] = 102;
  buf[3073] = 3;
  const LabeledDataset cifar = decode_cifar10_binary(buf, "fixture");
  c.expect(cifar.images.size() == 2 && cifar.labels[0] == 7 && cifar.labels[1] == 3,
           "cifar fixture labels");
  const Image& first = cifar.images[0];
  c.expect(first.height == 32 && first.width == 32 && first.channels == 3, "cifar fixture shape");
  c.expect(first.at(0, 0, 0) == 1.0, "cifar red pixel");
  c.expect(first.at(2, 3, 1) == 51 / 255.0, "cifar green pixel");
  c.expect(first.at(31, 31, 2) == 102 / 255.0, "cifar blue pixel");
  c.expect(first.at(0, 1, 0) == 0.0, "cifar zero pixel");

  c.expect(throws<FormatError>([] { decode_ppm("P5\n2 2\n255\n" + std::string(12, '\0')); }),
           "wrong ppm magic must throw");
  const std::string good = encode_ppm(img);
  c.expect(throws<FormatError>([&] { decode_ppm(good.substr(0, good.size() - 1)); }),
           "truncated ppm must throw");
  c.expect(throws<FormatError>([&] { decode_cifar10_binary(buf.substr(0, 3000), "short"); }),
           "truncated cifar must throw");
  std::string bad_label(3073, '\0');
  bad_label[0] = 10;
  c.expect(throws<FormatError>([&] { decode_cifar10_binary(bad_label, "label"); }),
           "out-of-range cifar label must throw");
  c.expect(throws<FormatError>([&] { load_weights((dir / "missing.bbw").string()); }),
           "missing weight file must throw");
  c.expect(throws<FormatError>([] { decode_weights("not a weight file"); }),
           "garbage weight bytes must throw");

  fs::remove_all(dir);
  return "weights/ppm round trips bit-exact; cifar exact; malformed inputs rejected";
}

struct Criterion {
  int id;
  const char* name;
  std::string (*run)(Checker&);
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "simba-greedy-equivalence", check_simba_reference},
      {2, "geometry-distance-accuracy", check_geometry_distance},
      {3, "step-contract-monotonicity", check_step_contracts},
      {4, "mga-mutation-and-ball", check_mga},
      {5, "attack-success-floor", check_success_floor},
      {6, "defense-properties", check_defense_properties},
      {7, "median-smoothing-recovery", check_median_recovery},
      {8, "adversarial-training-trend", check_adversarial_training},
      {9, "metric-closed-forms", check_metric_forms},
      {10, "reproducibility-accounting", check_reproducibility},
      {11, "format-round-trips", check_formats},
  };

  int failures = 0;
  for (const Criterion& cr : criteria) {
    Checker c;
    std::string note;
    try {
      note = cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("unhandled exception: ") + e.what());
    }
    std::printf("%s %2d %-28s %s\n", c.ok ? "PASS" : "FAIL", cr.id, cr.name,
                c.ok ? note.c_str() : c.first.c_str());
    if (!c.ok) ++failures;
  }
  if (failures == 0)
    std::printf("all 11 criteria passed\n");
  else
    std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
