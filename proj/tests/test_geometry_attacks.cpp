#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bbx/attacks/boundary.hpp"
#include "bbx/attacks/dispatch.hpp"
#include "bbx/attacks/hopskipjump.hpp"
#include "bbx/model.hpp"
#include "bbx/oracle.hpp"

namespace {

using namespace bbx;

// Label-only oracle that calls an image adversarial iff its first pixel
// exceeds a threshold. Labels: 0 below, 1 above.
class PixelThresholdOracle final : public Oracle {
 public:
  explicit PixelThresholdOracle(double threshold) : threshold_(threshold) {}
  ProbabilityVector predict_proba(const Image&) override {
    throw ProbabilityAccessError("label only");
  }
  int predict_label(const Image& x) override { return x.data[0] > threshold_ ? 1 : 0; }
  bool has_probabilities() const override { return false; }
  int num_classes() const override { return 2; }

 private:
  double threshold_;
};

void set_array(ModelWeights& w, const std::string& name, std::vector<double> values) {
  auto& arr = w.array(name);
  ASSERT_EQ(arr.values.size(), values.size()) << name;
  arr.values = std::move(values);
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

double point_to_hyperplane(const std::vector<double>& g, double c, const Image& x) {
  double dot = c, norm2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dot += g[i] * x.data[i];
    norm2 += g[i] * g[i];
  }
  return std::abs(dot) / std::sqrt(norm2);
}

// Plane at distance 0.1 from the all-0.5 image, interior nearest point.
struct PlaneCase {
  std::vector<double> g;
  double c = 0.0;
  Image x{4, 4, 1, 0.5};
};

PlaneCase make_plane_case() {
  PlaneCase pc;
  pc.g.resize(16);
  double dot = 0.0, norm2 = 0.0;
  for (int i = 0; i < 16; ++i) {
    pc.g[i] = 0.5 + 0.03 * i;
    dot += pc.g[i] * 0.5;
    norm2 += pc.g[i] * pc.g[i];
  }
  pc.c = -dot - 0.1 * std::sqrt(norm2);
  return pc;
}

TEST(BoundaryBinarySearch, HalvesTheBracketExactly) {
  PixelThresholdOracle oracle(0.5);
  CountingOracle counted(oracle);
  const Image x(1, 1, 1, 0.0);
  const Image x_adv(1, 1, 1, 1.0);
  const double theta = std::ldexp(1.0, -10);

  const Image hit = boundary_binary_search(counted, x, x_adv, 0, AttackMode::Untargeted,
                                           std::nullopt, theta);
  EXPECT_EQ(counted.queries_used(), 10);  // ceil(log2(1/theta))
  EXPECT_DOUBLE_EQ(hit.data[0], 0.5 + theta);
  EXPECT_EQ(oracle.predict_label(hit), 1);
}

TEST(BoundaryBinarySearch, ShortSegmentCostsOneProbe) {
  const Image x(1, 1, 1, 0.0);
  const Image x_adv(1, 1, 1, 0.05);

  PixelThresholdOracle far(0.5);  // midpoint not adversarial: keep the endpoint
  CountingOracle counted_far(far);
  EXPECT_EQ(boundary_binary_search(counted_far, x, x_adv, 0, AttackMode::Untargeted, std::nullopt,
                                   0.1),
            x_adv);
  EXPECT_EQ(counted_far.queries_used(), 1);

  PixelThresholdOracle near(0.02);  // midpoint adversarial: tighten to it
  const Image mid = boundary_binary_search(near, x, x_adv, 0, AttackMode::Untargeted,
                                           std::nullopt, 0.1);
  EXPECT_DOUBLE_EQ(mid.data[0], 0.025);
}

TEST(BoundaryBinarySearch, RejectsBadArguments) {
  PixelThresholdOracle oracle(0.5);
  const Image x(1, 1, 1, 0.0);
  const Image x_adv(1, 1, 1, 1.0);
  EXPECT_THROW(boundary_binary_search(oracle, x, x_adv, 0, AttackMode::Untargeted, std::nullopt,
                                      0.0),
               ParamError);
  EXPECT_THROW(boundary_binary_search(oracle, x, x_adv, 0, AttackMode::Untargeted, std::nullopt,
                                      1.0),
               ParamError);
  EXPECT_THROW(boundary_binary_search(oracle, x, Image(1, 2, 1, 1.0), 0, AttackMode::Untargeted,
                                      std::nullopt, 0.5),
               ShapeError);
}

TEST(HsjInitialize, ProducesAdversarialPointOrFails) {
  PixelThresholdOracle oracle(0.4);
  const Image x(4, 4, 1, 0.1);
  HsjConfig cfg;
  RngStream rng(7);
  const Image start = hsj_initialize(oracle, x, 0, cfg, rng);
  EXPECT_EQ(oracle.predict_label(start), 1);

  PixelThresholdOracle hopeless(2.0);  // uniform noise can never clear this
  HsjConfig few;
  few.init_trials = 5;
  RngStream rng2(8);
  EXPECT_THROW(hsj_initialize(hopeless, x, 0, few, rng2), InitFailure);
}

TEST(Hsj, ConvergesToHyperplaneDistance) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle model(w);
  LabelOnlyOracle oracle(model);  // decision access only
  ASSERT_EQ(oracle.predict_label(pc.x), 0);
  const double closed = point_to_hyperplane(pc.g, pc.c, pc.x);
  ASSERT_NEAR(closed, 0.1, 1e-12);

  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    HsjConfig cfg;  // defaults: batch 64, 20 iterations
    cfg.seed = seed;
    const AttackOutcome out = hopskipjump_attack(oracle, pc.x, 0, cfg);
    ASSERT_TRUE(out.success);
    EXPECT_EQ(oracle.predict_label(out.adversarial), 1);
    EXPECT_GE(out.l2_distance, closed - 1e-9);  // adversarial side of the plane
    EXPECT_LE(out.l2_distance, closed + 0.01) << "seed " << seed;
  }
}

TEST(Hsj, DistanceTraceIsMonotoneNonIncreasing) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    HsjConfig cfg;
    cfg.seed = seed;
    cfg.max_iters = 12;
    std::vector<double> trace;
    RngStream rng(cfg.seed);
    const AttackOutcome out = hopskipjump_attack(oracle, pc.x, 0, cfg, rng, &trace);
    ASSERT_EQ(static_cast<long long>(trace.size()), out.iterations);
    for (std::size_t i = 1; i < trace.size(); ++i)
      EXPECT_LE(trace[i], trace[i - 1] + 1e-12) << "seed " << seed << " step " << i;
    EXPECT_DOUBLE_EQ(trace.back(), out.l2_distance);
  }
}

TEST(Hsj, AccountsEveryQueryAndHandlesInitFailure) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle model(w);
  CountingOracle counted(model);
  HsjConfig cfg;
  cfg.max_iters = 4;
  cfg.seed = 3;
  const AttackOutcome out = hopskipjump_attack(counted, pc.x, 0, cfg);
  EXPECT_EQ(out.queries_used, counted.queries_used());

  PixelThresholdOracle hopeless(2.0);
  CountingOracle counted2(hopeless);
  HsjConfig few;
  few.init_trials = 50;
  const Image x(4, 4, 1, 0.1);
  const AttackOutcome fail = hopskipjump_attack(counted2, x, 0, few);
  EXPECT_FALSE(fail.success);
  EXPECT_EQ(fail.adversarial, x);
  EXPECT_EQ(fail.queries_used, 1 + 50);  // precondition plus one probe per trial
  EXPECT_EQ(fail.queries_used, counted2.queries_used());
}

TEST(Hsj, RejectsBadInputs) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  HsjConfig cfg;
  EXPECT_THROW(hopskipjump_attack(oracle, pc.x, 1, cfg), PreconditionError);
  HsjConfig bad = cfg;
  bad.mode = AttackMode::Targeted;
  EXPECT_THROW(hopskipjump_attack(oracle, pc.x, 0, bad), ParamError);
  bad.target_class = 0;
  EXPECT_THROW(hopskipjump_attack(oracle, pc.x, 0, bad), PreconditionError);
  bad = cfg;
  bad.batch_size = 0;
  EXPECT_THROW(hopskipjump_attack(oracle, pc.x, 0, bad), ParamError);
  bad = cfg;
  bad.binsearch_threshold = 1.0;
  EXPECT_THROW(hopskipjump_attack(oracle, pc.x, 0, bad), ParamError);
}

TEST(Boundary, StepContractionIsExactPreAdaptation) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  BoundaryConfig cfg;
  cfg.max_iters = 200;
  cfg.seed = 21;
  BoundaryTrace trace;
  RngStream rng(cfg.seed);
  const AttackOutcome out = boundary_attack(oracle, pc.x, 0, cfg, rng, &trace);
  ASSERT_TRUE(out.success);
  ASSERT_EQ(static_cast<long long>(trace.size()), out.iterations);

  int queried = 0;
  for (const auto& rec : trace) {
    if (rec.accepted) {
      EXPECT_TRUE(rec.queried);
    }
    if (!rec.queried) continue;
    ++queried;
    // Orthogonal step stays on the sphere through the current point.
    EXPECT_NEAR(rec.orth_distance, rec.old_distance, 1e-6 * rec.old_distance);
    // Source step contracts by exactly (1 - eta).
    EXPECT_NEAR(rec.cand_distance / rec.old_distance, 1.0 - rec.eta_before, 1e-6);
  }
  ASSERT_GT(queried, 0);

  for (std::size_t i = 1; i < trace.size(); ++i)
    EXPECT_LE(trace[i].old_distance, trace[i - 1].old_distance + 1e-12);
}

TEST(Boundary, ConvergesToHyperplaneDistance) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle model(w);
  LabelOnlyOracle oracle(model);
  const double closed = point_to_hyperplane(pc.g, pc.c, pc.x);

  for (std::uint64_t seed : {31ull, 32ull, 33ull, 34ull, 35ull}) {
    BoundaryConfig cfg;  // defaults: eta 0.01, 1000 iterations
    cfg.seed = seed;
    const AttackOutcome out = boundary_attack(oracle, pc.x, 0, cfg);
    ASSERT_TRUE(out.success);
    EXPECT_EQ(oracle.predict_label(out.adversarial), 1);
    EXPECT_GE(out.l2_distance, closed - 1e-9);
    EXPECT_LE(out.l2_distance, closed * 1.05) << "seed " << seed;
  }
}

TEST(Boundary, TraceDoesNotPerturbTheRun) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  BoundaryConfig cfg;
  cfg.max_iters = 60;
  cfg.seed = 41;
  const AttackOutcome plain = boundary_attack(oracle, pc.x, 0, cfg);
  BoundaryTrace trace;
  RngStream rng(cfg.seed);
  const AttackOutcome traced = boundary_attack(oracle, pc.x, 0, cfg, rng, &trace);
  EXPECT_EQ(plain.adversarial, traced.adversarial);
  EXPECT_EQ(plain.queries_used, traced.queries_used);
  EXPECT_EQ(plain.l2_distance, traced.l2_distance);
}

TEST(Boundary, InitFailureReportsCleanly) {
  PixelThresholdOracle hopeless(2.0);
  CountingOracle counted(hopeless);
  const Image x(4, 4, 1, 0.1);
  BoundaryConfig cfg;
  const AttackOutcome out = boundary_attack(counted, x, 0, cfg);
  EXPECT_FALSE(out.success);
  EXPECT_EQ(out.adversarial, x);
  EXPECT_EQ(out.queries_used, 1 + 50);
  EXPECT_EQ(out.adversarial_label, 0);
}

TEST(Boundary, RejectsBadInputs) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  BoundaryConfig bad;
  bad.epsilon = 1.0;
  EXPECT_THROW(boundary_attack(oracle, pc.x, 0, bad), ParamError);
  bad = BoundaryConfig{};
  bad.delta = 0.0;
  EXPECT_THROW(boundary_attack(oracle, pc.x, 0, bad), ParamError);
  bad = BoundaryConfig{};
  bad.window = 0;
  EXPECT_THROW(boundary_attack(oracle, pc.x, 0, bad), ParamError);
  EXPECT_THROW(boundary_attack(oracle, pc.x, 1, BoundaryConfig{}), PreconditionError);
}

TEST(Dispatch, GeometryAttacksRouteWithMatchingSeeds) {
  const PlaneCase pc = make_plane_case();
  const ModelWeights w = hyperplane_model(pc.g, pc.c, 4);
  ModelOracle oracle(w);

  HsjConfig hsj;
  hsj.max_iters = 3;
  hsj.seed = 55;
  const AttackOutcome direct = hopskipjump_attack(oracle, pc.x, 0, hsj);
  const AttackOutcome routed = run_attack(oracle, pc.x, 0, AttackSpec{hsj});
  EXPECT_EQ(direct.adversarial, routed.adversarial);
  EXPECT_EQ(direct.queries_used, routed.queries_used);

  BoundaryConfig bd;
  bd.max_iters = 40;
  bd.seed = 56;
  const AttackOutcome bdirect = boundary_attack(oracle, pc.x, 0, bd);
  const AttackOutcome brouted = run_attack(oracle, pc.x, 0, AttackSpec{bd});
  EXPECT_EQ(bdirect.adversarial, brouted.adversarial);
  EXPECT_EQ(bdirect.queries_used, brouted.queries_used);
}

}  // namespace
