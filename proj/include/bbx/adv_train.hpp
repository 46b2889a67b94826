#pragma once

#include <cstdint>
#include <cstdio>

#include "bbx/attacks/dispatch.hpp"
#include "bbx/dataset.hpp"
#include "bbx/errors.hpp"
#include "bbx/model.hpp"
#include "bbx/rng.hpp"
#include "bbx/train.hpp"

namespace bbx {

struct AdvTrainReport {
  int attempted = 0;
  int generated = 0;
  bool all_failed = false;  // n_adv > 0 yet no attack succeeded
};

// Hardening recipe: pretrain, craft adversarial examples against the interim
// model, append the successes with their true labels, and keep training on
// the augmented set. Attack randomness comes from seeds derived per example,
// never from the training stream, so n_adv = 0 reproduces plain training
// (pretrain followed by continuation) bit for bit.
inline ModelWeights adversarial_train(const Architecture& arch, const LabeledDataset& data,
                                      const AttackSpec& attack, int n_adv,
                                      const TrainConfig& pretrain, const TrainConfig& continuation,
                                      std::uint64_t seed, AdvTrainReport* report = nullptr) {
  if (n_adv < 0) throw ParamError("adversarial_train: n_adv must be non-negative");
  if (n_adv > static_cast<int>(data.images.size()))
    throw ParamError("adversarial_train: n_adv exceeds the dataset size");
  validate_attack(attack);

  AdvTrainReport local;
  AdvTrainReport& rep = report ? *report : local;

  RngStream rng(seed);
  ModelWeights w = init_weights(arch, rng);
  train_more(w, data, pretrain, rng);

  LabeledDataset augmented = data;
  if (n_adv > 0) {
    ModelOracle oracle(w);
    for (std::size_t i = 0; i < data.images.size() && rep.generated < n_adv; ++i) {
      const Image& img = data.images[i];
      const int label = data.labels[i];
      if (oracle.predict_label(img) != label) continue;  // attack precondition
      ++rep.attempted;
      RngStream attack_rng(derive_seed(seed, 0x61747461ULL + i));
      const AttackOutcome outcome = run_attack(oracle, img, label, attack, attack_rng);
      if (!outcome.success) continue;
      augmented.images.push_back(outcome.adversarial);
      augmented.labels.push_back(label);
      ++rep.generated;
    }
    if (rep.generated == 0) {
      rep.all_failed = true;
      std::fprintf(stderr,
                   "adversarial_train: warning: no adversarial examples generated "
                   "(%d attempts); continuing on the clean set\n",
                   rep.attempted);
    }
  }

  train_more(w, augmented, continuation, rng);
  snap_to_f32(w);
  return w;
}

}  // namespace bbx
