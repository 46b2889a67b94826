// Command-line front end: dataset generation, training, single attacks,
// defenses, experiment runs, and report regeneration.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bbx/bbx.hpp"

namespace {

std::string format_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

void print_outcome(const bbx::AttackOutcome& o, const bbx::Image& original) {
  std::printf("success:     %s\n", o.success ? "yes" : "no");
  std::printf("label:       %d\n", o.adversarial_label);
  std::printf("queries:     %lld\n", o.queries_used);
  std::printf("iterations:  %lld\n", o.iterations);
  std::printf("noise_rate:  %.6f\n", bbx::noise_rate(original, o.adversarial));
  std::printf("l2:          %.6f\n", o.l2_distance);
  std::printf("linf:        %.6f\n", o.linf_distance);
  std::printf("mc:          %s\n", format_opt(o.misclassification_confidence).c_str());
  std::printf("seconds:     %.3f\n", o.elapsed_seconds);
}

int run_gen_data(const std::string& out_dir, int classes, int per_class, int height, int width,
                 double noise_sigma, std::uint64_t seed) {
  const auto data = bbx::generate_synthetic(classes, per_class, height, width, 3, noise_sigma,
                                            seed);
  namespace fs = std::filesystem;
  std::vector<int> counter(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const int label = data.labels[i];
    const fs::path dir = fs::path(out_dir) / std::to_string(label);
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof(name), "%05d.ppm", counter[static_cast<std::size_t>(label)]++);
    bbx::write_ppm(data.images[i], (dir / name).string());
  }
  std::printf("wrote %zu images (%d classes) under %s\n", data.images.size(), classes,
              out_dir.c_str());
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_path, int adversarial) {
  const auto cfg = bbx::load_experiment_config(config_path);
  if (cfg.model.kind == "external")
    throw bbx::ParamError("train: external models have no trainable weights");
  const auto data = bbx::build_dataset(cfg.dataset, cfg.seed);
  const auto arch = bbx::build_architecture(cfg.model, data);

  bbx::ModelWeights w;
  if (adversarial > 0) {
    bbx::AdvTrainReport report;
    w = bbx::adversarial_train(arch, data, cfg.attack, adversarial, cfg.model.train,
                               cfg.model.train, cfg.seed, &report);
    std::printf("adversarial examples: %d/%d generated\n", report.generated, report.attempted);
  } else {
    bbx::RngStream rng(bbx::derive_seed(cfg.seed, 0x747261696EULL));
    w = bbx::train_sgd(arch, data, cfg.model.train, rng);
  }
  std::printf("train accuracy: %.4f\n", bbx::accuracy(w, data));
  bbx::save_weights(w, out_path);
  std::printf("weights: %s\n", out_path.c_str());
  return 0;
}

int run_attack_cmd(const std::string& config_path, int index, const std::string& image_path,
                   int label, std::optional<std::uint64_t> seed, const std::string& out_path) {
  auto cfg = bbx::load_experiment_config(config_path);
  if (seed) cfg.attack = bbx::with_seed(cfg.attack, *seed);
  const auto setup = bbx::prepare_experiment(cfg);

  bbx::Image x;
  int y = 0;
  if (!image_path.empty()) {
    if (label < 0) throw bbx::ParamError("attack: --image needs --label");
    x = bbx::read_ppm(image_path);
    y = label;
  } else {
    if (index < 0 || index >= static_cast<int>(setup.eval.images.size()))
      throw bbx::ParamError("attack: --index out of range (evaluation set has " +
                            std::to_string(setup.eval.images.size()) + " images)");
    x = setup.eval.images[static_cast<std::size_t>(index)];
    y = setup.eval.labels[static_cast<std::size_t>(index)];
  }

  const auto oracle = setup.make_oracle();
  const auto outcome = bbx::run_attack(*oracle, x, y, cfg.attack);
  print_outcome(outcome, x);
  if (!out_path.empty()) {
    if (x.channels != 3)
      std::fprintf(stderr, "note: skipping --out, PPM needs 3 channels (image has %d)\n",
                   x.channels);
    else
      bbx::write_ppm(outcome.adversarial, out_path);
  }
  return outcome.success ? 0 : 2;
}

int run_defend(const std::string& image_path, const std::string& defense_name,
               const std::string& out_path, const std::string& config_path) {
  const auto spec = bbx::defense_from_name(defense_name);
  const auto x = bbx::read_ppm(image_path);
  const auto filtered = bbx::apply_defense(x, spec);
  if (!out_path.empty()) bbx::write_ppm(filtered, out_path);
  std::printf("defense: %s\n", bbx::defense_name(spec).c_str());
  if (!config_path.empty()) {
    const auto cfg = bbx::load_experiment_config(config_path);
    const auto setup = bbx::prepare_experiment(cfg);
    const auto oracle = setup.make_oracle();
    std::printf("label before: %d\n", oracle->predict_label(x));
    std::printf("label after:  %d\n", oracle->predict_label(filtered));
  }
  return 0;
}

int run_experiment_cmd(const std::string& config_path, std::optional<std::uint64_t> seed,
                       std::optional<int> workers, std::string out_dir, bool adaptive) {
  auto cfg = bbx::load_experiment_config(config_path);
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (adaptive) cfg.adaptive = true;

  const auto setup = bbx::prepare_experiment(cfg);
  const auto records = bbx::run_experiment(cfg, setup);
  bbx::write_results(records, cfg, cfg.out_dir);
  bbx::write_report(records, cfg.out_dir);
  std::printf("%s", bbx::render_report(records).c_str());
  std::printf("results: %s\n", cfg.out_dir.c_str());
  return 0;
}

int run_report(const std::string& results_path, std::string out_dir) {
  const auto [records, cfg] = bbx::load_results(results_path);
  if (out_dir.empty()) out_dir = cfg.out_dir;
  bbx::write_report(records, out_dir);
  std::printf("%s", bbx::render_report(records).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box adversarial attack and defense toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic PPM dataset on disk");
  std::string gen_out;
  int gen_classes = 4, gen_per_class = 50, gen_height = 8, gen_width = 8;
  double gen_sigma = 0.05;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--classes", gen_classes, "number of classes");
  gen->add_option("--per-class", gen_per_class, "images per class");
  gen->add_option("--height", gen_height, "image height");
  gen->add_option("--width", gen_width, "image width");
  gen->add_option("--noise-sigma", gen_sigma, "per-pixel noise sigma");
  gen->add_option("--seed", gen_seed, "generator seed");

  auto* train = app.add_subcommand("train", "train a model and save its weights");
  std::string train_config, train_out = "weights.bbfw";
  int train_adv = 0;
  train->add_option("--config", train_config, "experiment config")->required();
  train->add_option("--out", train_out, "weight file to write");
  train->add_option("--adversarial", train_adv,
                    "augment with this many adversarial examples before a second training pass");

  auto* attack = app.add_subcommand("attack", "run one attack against one image");
  std::string attack_config, attack_image, attack_out;
  int attack_index = 0, attack_label = -1;
  std::optional<std::uint64_t> attack_seed;
  attack->add_option("--config", attack_config, "experiment config")->required();
  attack->add_option("--index", attack_index, "evaluation-set image index");
  attack->add_option("--image", attack_image, "attack this PPM instead of an evaluation image");
  attack->add_option("--label", attack_label, "true label for --image");
  attack->add_option("--seed", attack_seed, "attack seed override");
  attack->add_option("--out", attack_out, "write the adversarial image here (PPM)");

  auto* defend = app.add_subcommand("defend", "apply a preprocessing defense to an image");
  std::string defend_image, defend_name, defend_out, defend_config;
  defend->add_option("--image", defend_image, "input PPM")->required();
  defend->add_option("--defense", defend_name, "defense, e.g. median:2, jpeg:75, bit_squeeze:4")
      ->required();
  defend->add_option("--out", defend_out, "write the filtered image here (PPM)");
  defend->add_option("--config", defend_config, "also report model labels before/after");

  auto* run = app.add_subcommand("run", "run a full experiment from a config");
  std::string run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_workers;
  bool run_adaptive = false;
  run->add_option("--config", run_config, "experiment config")->required();
  run->add_option("--seed", run_seed, "seed override");
  run->add_option("--workers", run_workers, "worker thread override");
  run->add_option("--out", run_out, "output directory override");
  run->add_flag("--adaptive", run_adaptive, "re-run attacks against each defended oracle");

  auto* report = app.add_subcommand("report", "regenerate reports from stored results");
  std::string report_results, report_out;
  report->add_option("--results", report_results, "results.json from a previous run")->required();
  report->add_option("--out", report_out, "output directory override");

  try {
    app.parse(argc, argv);
    if (gen->parsed())
      return run_gen_data(gen_out, gen_classes, gen_per_class, gen_height, gen_width, gen_sigma,
                          gen_seed);
    if (train->parsed()) return run_train(train_config, train_out, train_adv);
    if (attack->parsed())
      return run_attack_cmd(attack_config, attack_index, attack_image, attack_label, attack_seed,
                            attack_out);
    if (defend->parsed()) return run_defend(defend_image, defend_name, defend_out, defend_config);
    if (run->parsed())
      return run_experiment_cmd(run_config, run_seed, run_workers, run_out, run_adaptive);
    if (report->parsed()) return run_report(report_results, report_out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const bbx::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const bbx::ParamError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
