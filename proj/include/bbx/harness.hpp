#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bbx/adv_train.hpp"
#include "bbx/attacks/dispatch.hpp"
#include "bbx/cifar10.hpp"
#include "bbx/config.hpp"
#include "bbx/dataset.hpp"
#include "bbx/defenses.hpp"
#include "bbx/external_oracle.hpp"
#include "bbx/metrics.hpp"
#include "bbx/model.hpp"
#include "bbx/ppm.hpp"
#include "bbx/train.hpp"
#include "bbx/weights_io.hpp"

namespace bbx {

struct ResultRecord {
  long long image_id = 0;
  int label = 0;
  std::string attack;
  std::string defense = "none";
  bool success = false;
  long long queries = 0;
  long long iterations = 0;
  double noise_rate = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  std::optional<double> mc;
  std::optional<double> confidence;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  // Not part of the CSV schema; persisted in results.json.
  int adversarial_label = -1;
  std::uint64_t image_hash = 0;
  std::string error;

  bool operator==(const ResultRecord&) const = default;
};

inline constexpr const char* kResultsCsvHeader =
    "image_id,label,attack,defense,success,queries,iterations,noise_rate,l2,linf,mc,confidence,"
    "seconds,seed";

// Per-trial seed mix: global seed -> repetition stream -> image stream. The
// worker pool never touches RNG state, so worker count cannot alter results.
inline std::uint64_t trial_seed(std::uint64_t global_seed, int repetition, long long image_id) {
  return derive_seed(derive_seed(global_seed, static_cast<std::uint64_t>(repetition)),
                     static_cast<std::uint64_t>(image_id));
}

inline std::uint64_t fnv1a64(const unsigned char* p, std::size_t n,
                             std::uint64_t h = 1469598103934665603ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t image_hash(const Image& x) {
  std::uint64_t h = 1469598103934665603ULL;
  const int dims[3] = {x.height, x.width, x.channels};
  h = fnv1a64(reinterpret_cast<const unsigned char*>(dims), sizeof(dims), h);
  for (double v : x.data) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    h = fnv1a64(reinterpret_cast<const unsigned char*>(&bits), sizeof(bits), h);
  }
  return h;
}

namespace detail {

inline std::string csv_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string csv_opt(const std::optional<double>& v) {
  return v ? csv_real(*v) : std::string();
}

}  // namespace detail

inline std::string record_to_csv_row(const ResultRecord& r) {
  std::ostringstream out;
  out << r.image_id << ',' << r.label << ',' << r.attack << ',' << r.defense << ','
      << (r.success ? 1 : 0) << ',' << r.queries << ',' << r.iterations << ','
      << detail::csv_real(r.noise_rate) << ',' << detail::csv_real(r.l2) << ','
      << detail::csv_real(r.linf) << ',' << detail::csv_opt(r.mc) << ','
      << detail::csv_opt(r.confidence) << ',' << detail::csv_real(r.seconds) << ',' << r.seed;
  return out.str();
}

inline std::string records_to_csv(const std::vector<ResultRecord>& records) {
  std::string out = std::string(kResultsCsvHeader) + "\n";
  for (const auto& r : records) out += record_to_csv_row(r) + "\n";
  return out;
}

// Order normalization for byte comparisons: data rows sorted, wall-clock
// seconds column masked (it is the one legitimately nondeterministic field).
inline std::string normalize_results_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::string header;
  std::vector<std::string> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      header = line;
      first = false;
      continue;
    }
    if (line.empty()) continue;
    int commas = 0;
    std::size_t start = 0, end = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] != ',') continue;
      ++commas;
      if (commas == 12) start = i + 1;
      if (commas == 13) end = i;
    }
    rows.push_back(line.substr(0, start) + "-" + line.substr(end));
  }
  std::sort(rows.begin(), rows.end());
  std::string out = header + "\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

inline nlohmann::json record_to_json(const ResultRecord& r) {
  nlohmann::json j{{"image_id", r.image_id},
                   {"label", r.label},
                   {"attack", r.attack},
                   {"defense", r.defense},
                   {"success", r.success},
                   {"queries", r.queries},
                   {"iterations", r.iterations},
                   {"noise_rate", r.noise_rate},
                   {"l2", r.l2},
                   {"linf", r.linf},
                   {"seconds", r.seconds},
                   {"seed", r.seed},
                   {"adversarial_label", r.adversarial_label},
                   {"image_hash", r.image_hash},
                   {"error", r.error}};
  j["mc"] = r.mc ? nlohmann::json(*r.mc) : nlohmann::json(nullptr);
  j["confidence"] = r.confidence ? nlohmann::json(*r.confidence) : nlohmann::json(nullptr);
  return j;
}

inline ResultRecord record_from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.image_id = j.at("image_id").get<long long>();
  r.label = j.at("label").get<int>();
  r.attack = j.at("attack").get<std::string>();
  r.defense = j.at("defense").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.queries = j.at("queries").get<long long>();
  r.iterations = j.at("iterations").get<long long>();
  r.noise_rate = j.at("noise_rate").get<double>();
  r.l2 = j.at("l2").get<double>();
  r.linf = j.at("linf").get<double>();
  if (!j.at("mc").is_null()) r.mc = j.at("mc").get<double>();
  if (!j.at("confidence").is_null()) r.confidence = j.at("confidence").get<double>();
  r.seconds = j.at("seconds").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.adversarial_label = j.at("adversarial_label").get<int>();
  r.image_hash = j.at("image_hash").get<std::uint64_t>();
  r.error = j.at("error").get<std::string>();
  return r;
}

inline nlohmann::json dataset_spec_to_json(const DatasetSpec& d) {
  if (const auto* s = std::get_if<SyntheticSpec>(&d))
    return {{"kind", "synthetic"}, {"classes", s->classes},   {"per_class", s->per_class},
            {"height", s->height}, {"width", s->width},       {"channels", s->channels},
            {"noise_sigma", s->noise_sigma}};
  if (const auto* c = std::get_if<CifarSpec>(&d)) return {{"kind", "cifar10"}, {"path", c->path}};
  return {{"kind", "ppm"}, {"path", std::get<PpmDirSpec>(d).path}};
}

inline DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "synthetic") {
    SyntheticSpec s;
    s.classes = j.at("classes").get<int>();
    s.per_class = j.at("per_class").get<int>();
    s.height = j.at("height").get<int>();
    s.width = j.at("width").get<int>();
    s.channels = j.at("channels").get<int>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    return s;
  }
  if (kind == "cifar10") return CifarSpec{j.at("path").get<std::string>()};
  if (kind == "ppm") return PpmDirSpec{j.at("path").get<std::string>()};
  throw FormatError("results: unknown dataset kind '" + kind + "'");
}

inline nlohmann::json model_spec_to_json(const ModelSpec& m) {
  return {{"kind", m.kind},
          {"hidden", m.hidden},
          {"conv_filters", m.conv_filters},
          {"weights", m.weights_path},
          {"epochs", m.train.epochs},
          {"batch_size", m.train.batch_size},
          {"learning_rate", m.train.learning_rate},
          {"command", m.command},
          {"probabilities", m.external_probabilities},
          {"classes", m.external_classes}};
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec m;
  m.kind = j.at("kind").get<std::string>();
  m.hidden = j.at("hidden").get<std::vector<int>>();
  m.conv_filters = j.at("conv_filters").get<int>();
  m.weights_path = j.at("weights").get<std::string>();
  m.train.epochs = j.at("epochs").get<int>();
  m.train.batch_size = j.at("batch_size").get<int>();
  m.train.learning_rate = j.at("learning_rate").get<double>();
  m.command = j.at("command").get<std::vector<std::string>>();
  m.external_probabilities = j.at("probabilities").get<bool>();
  m.external_classes = j.at("classes").get<int>();
  return m;
}

inline nlohmann::json attack_spec_to_json(const AttackSpec& a) {
  if (const auto* c = std::get_if<SimbaConfig>(&a)) {
    nlohmann::json j{{"kind", "simba"},       {"epsilon", c->epsilon},
                     {"max_iters", c->max_iters}, {"targeted", c->targeted},
                     {"seed", c->seed}};
    j["omega"] = c->omega ? nlohmann::json(*c->omega) : nlohmann::json(nullptr);
    j["target_class"] =
        c->target_class ? nlohmann::json(*c->target_class) : nlohmann::json(nullptr);
    return j;
  }
  if (const auto* c = std::get_if<HsjConfig>(&a)) {
    nlohmann::json j{{"kind", "hopskipjump"},
                     {"batch_size", c->batch_size},
                     {"max_iters", c->max_iters},
                     {"targeted", c->mode == AttackMode::Targeted},
                     {"init_trials", c->init_trials},
                     {"binsearch_threshold", c->binsearch_threshold},
                     {"seed", c->seed}};
    j["target_class"] =
        c->target_class ? nlohmann::json(*c->target_class) : nlohmann::json(nullptr);
    return j;
  }
  if (const auto* c = std::get_if<BoundaryConfig>(&a))
    return {{"kind", "boundary"},   {"epsilon", c->epsilon}, {"delta", c->delta},
            {"max_iters", c->max_iters}, {"window", c->window},   {"seed", c->seed}};
  const auto& c = std::get<MgaConfig>(a);
  return {{"kind", "mga"},
          {"epsilon", c.epsilon},
          {"max_queries", c.max_queries},
          {"mutation_rate", c.mutation_rate},
          {"population_size", c.population_size},
          {"seed", c.seed}};
}

inline AttackSpec attack_spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "simba") {
    SimbaConfig c;
    c.epsilon = j.at("epsilon").get<double>();
    c.max_iters = j.at("max_iters").get<long long>();
    if (!j.at("omega").is_null()) c.omega = j.at("omega").get<double>();
    c.targeted = j.at("targeted").get<bool>();
    if (!j.at("target_class").is_null()) c.target_class = j.at("target_class").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
  if (kind == "hopskipjump") {
    HsjConfig c;
    c.batch_size = j.at("batch_size").get<int>();
    c.max_iters = j.at("max_iters").get<long long>();
    c.mode = j.at("targeted").get<bool>() ? AttackMode::Targeted : AttackMode::Untargeted;
    if (!j.at("target_class").is_null()) c.target_class = j.at("target_class").get<int>();
    c.init_trials = j.at("init_trials").get<int>();
    c.binsearch_threshold = j.at("binsearch_threshold").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
  if (kind == "boundary") {
    BoundaryConfig c;
    c.epsilon = j.at("epsilon").get<double>();
    c.delta = j.at("delta").get<double>();
    c.max_iters = j.at("max_iters").get<long long>();
    c.window = j.at("window").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
  if (kind == "mga") {
    MgaConfig c;
    c.epsilon = j.at("epsilon").get<double>();
    c.max_queries = j.at("max_queries").get<long long>();
    c.mutation_rate = j.at("mutation_rate").get<double>();
    c.population_size = j.at("population_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
  throw FormatError("results: unknown attack kind '" + kind + "'");
}

inline nlohmann::json defense_spec_to_json(const DefenseSpec& d) {
  if (const auto* b = std::get_if<BitSqueeze>(&d))
    return {{"kind", "bit_squeeze"}, {"depth", b->depth}};
  if (const auto* m = std::get_if<MedianSmooth>(&d))
    return {{"kind", "median"}, {"kernel", m->kernel}};
  return {{"kind", "jpeg"}, {"quality", std::get<Jpeg>(d).quality}};
}

inline DefenseSpec defense_spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "bit_squeeze") return BitSqueeze{j.at("depth").get<int>()};
  if (kind == "median") return MedianSmooth{j.at("kernel").get<int>()};
  if (kind == "jpeg") return Jpeg{j.at("quality").get<int>()};
  throw FormatError("results: unknown defense kind '" + kind + "'");
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json defenses = nlohmann::json::array();
  for (const auto& d : cfg.defenses) defenses.push_back(defense_spec_to_json(d));
  return {{"dataset", dataset_spec_to_json(cfg.dataset)},
          {"model", model_spec_to_json(cfg.model)},
          {"attack", attack_spec_to_json(cfg.attack)},
          {"defenses", defenses},
          {"run",
           {{"eval_per_class", cfg.eval_per_class},
            {"seed", cfg.seed},
            {"workers", cfg.workers},
            {"out", cfg.out_dir},
            {"repetitions", cfg.repetitions},
            {"adaptive", cfg.adaptive}}}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.dataset = dataset_spec_from_json(j.at("dataset"));
  cfg.model = model_spec_from_json(j.at("model"));
  cfg.attack = attack_spec_from_json(j.at("attack"));
  for (const auto& d : j.at("defenses")) cfg.defenses.push_back(defense_spec_from_json(d));
  const auto& run = j.at("run");
  cfg.eval_per_class = run.at("eval_per_class").get<int>();
  cfg.seed = run.at("seed").get<std::uint64_t>();
  cfg.workers = run.at("workers").get<int>();
  cfg.out_dir = run.at("out").get<std::string>();
  cfg.repetitions = run.at("repetitions").get<int>();
  cfg.adaptive = run.at("adaptive").get<bool>();
  return cfg;
}

// Everything run_experiment derives before any trial starts.
struct ExperimentSetup {
  LabeledDataset data;
  LabeledDataset eval;
  std::shared_ptr<const ModelWeights> weights;  // null for external models
  ModelSpec model;

  std::unique_ptr<Oracle> make_oracle() const {
    if (model.kind == "external")
      return std::make_unique<ExternalOracle>(model.command, model.external_classes,
                                              model.external_probabilities);
    return std::make_unique<ModelOracle>(*weights);
  }
};

inline LabeledDataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (const auto* s = std::get_if<SyntheticSpec>(&spec))
    return generate_synthetic(s->classes, s->per_class, s->height, s->width, s->channels,
                              s->noise_sigma, seed);
  if (const auto* c = std::get_if<CifarSpec>(&spec)) return load_cifar10_binary(c->path);
  return load_ppm_directory(std::get<PpmDirSpec>(spec).path);
}

inline Architecture build_architecture(const ModelSpec& m, const LabeledDataset& data) {
  const Image& probe = data.images.at(0);
  if (m.kind == "linear")
    return Architecture::linear(probe.height, probe.width, probe.channels, data.class_count);
  if (m.kind == "mlp")
    return Architecture::mlp(probe.height, probe.width, probe.channels, data.class_count,
                             m.hidden);
  if (m.kind == "cnn")
    return Architecture::cnn(probe.height, probe.width, probe.channels, data.class_count,
                             m.conv_filters);
  throw ParamError("build_architecture: no built-in architecture for kind '" + m.kind + "'");
}

inline ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  ExperimentSetup setup;
  setup.model = cfg.model;
  setup.data = build_dataset(cfg.dataset, cfg.seed);

  if (cfg.model.kind != "external") {
    if (!cfg.model.weights_path.empty()) {
      auto w = std::make_shared<ModelWeights>(load_weights(cfg.model.weights_path));
      const Image& probe = setup.data.images.at(0);
      if (w->arch.input_height != probe.height || w->arch.input_width != probe.width ||
          w->arch.input_channels != probe.channels)
        throw ParamError("prepare_experiment: weight file input shape does not match the dataset");
      setup.weights = std::move(w);
    } else {
      const Architecture arch = build_architecture(cfg.model, setup.data);
      RngStream train_rng(derive_seed(cfg.seed, 0x747261696EULL));
      setup.weights = std::make_shared<ModelWeights>(
          train_sgd(arch, setup.data, cfg.model.train, train_rng));
    }
  }

  const auto oracle = setup.make_oracle();
  std::vector<Oracle*> oracles{oracle.get()};
  setup.eval = select_evaluation_set(setup.data, oracles, cfg.eval_per_class);
  return setup;
}

namespace detail {

inline void fill_metrics_against(Oracle& oracle, const Image& original, const Image& adversarial,
                                 int y, ResultRecord& rec) {
  rec.noise_rate = bbx::noise_rate(original, adversarial);
  rec.l2 = l2_distance(original, adversarial);
  rec.linf = linf_distance(original, adversarial);
  rec.mc = misclassification_confidence(oracle, adversarial, y);
  rec.confidence = confidence_score(oracle, adversarial);
  rec.image_hash = image_hash(adversarial);
}

// One evaluation-set image under one repetition: the undefended attack run
// plus one row per defense. Defense rows either re-check the stored
// adversarial image against the defended oracle (default) or re-run the
// attack against it (adaptive mode), with their own derived seeds.
inline std::vector<ResultRecord> run_trial_unit(const ExperimentConfig& cfg,
                                                const ExperimentSetup& setup, Oracle& oracle,
                                                int repetition, long long image_id) {
  const Image& x = setup.eval.images[static_cast<std::size_t>(image_id)];
  const int y = setup.eval.labels[static_cast<std::size_t>(image_id)];
  const std::uint64_t seed = trial_seed(cfg.seed, repetition, image_id);
  const std::string name = attack_name(cfg.attack);

  std::vector<ResultRecord> records;
  ResultRecord base;
  base.image_id = image_id;
  base.label = y;
  base.attack = name;
  base.seed = seed;

  std::optional<AttackOutcome> outcome;
  try {
    CountingOracle counter(oracle);
    RngStream rng(seed);
    AttackOutcome got = run_attack(counter, x, y, cfg.attack, rng);
    ResultRecord rec = base;
    rec.success = got.success;
    rec.queries = got.queries_used;
    rec.iterations = got.iterations;
    rec.seconds = got.elapsed_seconds;
    rec.adversarial_label = got.adversarial_label;
    fill_metrics_against(oracle, x, got.adversarial, y, rec);
    if (counter.queries_used() != got.queries_used)
      rec.error = "query accounting mismatch: counter " +
                  std::to_string(counter.queries_used()) + " vs reported " +
                  std::to_string(got.queries_used);
    records.push_back(std::move(rec));
    outcome = std::move(got);
  } catch (const std::exception& e) {
    ResultRecord rec = base;
    rec.error = e.what();
    records.push_back(std::move(rec));
  }

  for (std::size_t k = 0; k < cfg.defenses.size(); ++k) {
    const DefenseSpec& d = cfg.defenses[k];
    ResultRecord rec = base;
    rec.defense = defense_name(d);
    try {
      DefendedOracle defended(oracle, d);
      if (cfg.adaptive) {
        rec.seed = derive_seed(seed, k + 1);
        CountingOracle counter(defended);
        RngStream rng(rec.seed);
        const AttackOutcome got = run_attack(counter, x, y, cfg.attack, rng);
        rec.success = got.success;
        rec.queries = got.queries_used;
        rec.iterations = got.iterations;
        rec.seconds = got.elapsed_seconds;
        rec.adversarial_label = got.adversarial_label;
        fill_metrics_against(defended, x, got.adversarial, y, rec);
      } else if (outcome) {
        const Image& adv = outcome->adversarial;
        rec.queries = outcome->queries_used;
        rec.iterations = outcome->iterations;
        rec.seconds = outcome->elapsed_seconds;
        rec.adversarial_label = defended.predict_label(adv);
        rec.success = rec.adversarial_label != y;
        fill_metrics_against(defended, x, adv, y, rec);
      } else {
        rec.error = records.front().error;  // attack itself failed to run
      }
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace detail

inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg,
                                                const ExperimentSetup& setup) {
  struct Unit {
    int repetition;
    long long image_id;
  };
  std::vector<Unit> units;
  for (int rep = 0; rep < cfg.repetitions; ++rep)
    for (long long i = 0; i < static_cast<long long>(setup.eval.images.size()); ++i)
      units.push_back({rep, i});

  std::vector<std::vector<ResultRecord>> slots(units.size());
  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(units.size())));

  if (workers == 1) {
    const auto oracle = setup.make_oracle();
    for (std::size_t u = 0; u < units.size(); ++u)
      slots[u] = detail::run_trial_unit(cfg, setup, *oracle, units[u].repetition,
                                        units[u].image_id);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        const auto oracle = setup.make_oracle();  // one oracle per worker
        for (std::size_t u = next.fetch_add(1); u < units.size(); u = next.fetch_add(1))
          slots[u] = detail::run_trial_unit(cfg, setup, *oracle, units[u].repetition,
                                            units[u].image_id);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<ResultRecord> records;
  for (auto& s : slots)
    for (auto& r : s) records.push_back(std::move(r));
  return records;
}

inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, prepare_experiment(cfg));
}

// Re-runs the attack a record came from, seeded from the record itself. For
// non-adaptive defense rows this is the undefended attack whose image the
// defense then re-checked (they share the stored hash).
inline AttackOutcome replay_trial(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                                  const ResultRecord& record) {
  if (record.image_id < 0 ||
      record.image_id >= static_cast<long long>(setup.eval.images.size()))
    throw ParamError("replay_trial: image_id out of range");
  const Image& x = setup.eval.images[static_cast<std::size_t>(record.image_id)];
  const int y = setup.eval.labels[static_cast<std::size_t>(record.image_id)];
  const auto oracle = setup.make_oracle();
  RngStream rng(record.seed);
  if (cfg.adaptive && record.defense != "none") {
    for (const auto& d : cfg.defenses)
      if (defense_name(d) == record.defense) {
        DefendedOracle defended(*oracle, d);
        return run_attack(defended, x, y, cfg.attack, rng);
      }
    throw ParamError("replay_trial: defense '" + record.defense + "' not in the config");
  }
  return run_attack(*oracle, x, y, cfg.attack, rng);
}

inline void write_results(const std::vector<ResultRecord>& records, const ExperimentConfig& cfg,
                          const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("write_results: cannot create directory: " + dir);

  const auto write_file = [&](const std::string& name, const std::string& body) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_results: cannot open for writing: " + path);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw FormatError("write_results: short write: " + path);
  };

  write_file("results.csv", records_to_csv(records));

  nlohmann::json j;
  j["config"] = experiment_config_to_json(cfg);
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) j["records"].push_back(record_to_json(r));
  write_file("results.json", j.dump(2) + "\n");
}

inline std::pair<std::vector<ResultRecord>, ExperimentConfig> load_results(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open results: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("results: invalid JSON in " + path + ": " + e.what());
  }
  std::vector<ResultRecord> records;
  for (const auto& rj : j.at("records")) records.push_back(record_from_json(rj));
  return {std::move(records), experiment_config_from_json(j.at("config"))};
}

struct GroupSummary {
  std::string attack;
  std::string defense;
  long long n = 0;
  double success_rate = 0.0;
  MeanStd noise;
  MeanStd queries;
  double seconds_mean = 0.0;
};

inline std::vector<GroupSummary> summarize_records(const std::vector<ResultRecord>& records) {
  if (records.empty()) throw EmptyInputError("report: no records");
  std::map<std::pair<std::string, std::string>, std::vector<const ResultRecord*>> groups;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.attack, r.defense);
    if (groups.find(key) == groups.end()) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<GroupSummary> out;
  for (const auto& key : order) {
    const auto& rows = groups[key];
    GroupSummary g;
    g.attack = key.first;
    g.defense = key.second;
    g.n = static_cast<long long>(rows.size());
    std::vector<double> noise, queries;
    long long wins = 0;
    double secs = 0.0;
    for (const auto* r : rows) {
      wins += r->success ? 1 : 0;
      noise.push_back(r->noise_rate);
      queries.push_back(static_cast<double>(r->queries));
      secs += r->seconds;
    }
    g.success_rate = static_cast<double>(wins) / static_cast<double>(rows.size());
    g.noise = summarize(noise);
    g.queries = summarize(queries);
    g.seconds_mean = secs / static_cast<double>(rows.size());
    out.push_back(std::move(g));
  }
  return out;
}

inline std::string render_report(const std::vector<ResultRecord>& records) {
  const auto groups = summarize_records(records);
  std::ostringstream out;
  out << "trials: " << records.size() << "\n";
  char buf[256];
  for (const auto& g : groups) {
    std::snprintf(buf, sizeof(buf),
                  "attack=%s defense=%s n=%lld success_rate=%.3f", g.attack.c_str(),
                  g.defense.c_str(), g.n, g.success_rate);
    out << buf;
    if (g.defense != "none") {
      std::snprintf(buf, sizeof(buf), " recovered=%.3f", 1.0 - g.success_rate);
      out << buf;
    }
    out << " noise_rate=" << format_mean_std(g.noise) << " queries=" << format_mean_std(g.queries);
    std::snprintf(buf, sizeof(buf), " seconds_mean=%.3f\n", g.seconds_mean);
    out << buf;
  }
  return out.str();
}

// summary.txt: the human-readable table. by_defense.csv: one row per group.
// trials.csv: per-trial series (queries, noise, time) for plotting.
inline void write_report(const std::vector<ResultRecord>& records, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("write_report: cannot create directory: " + dir);
  const auto groups = summarize_records(records);

  const auto write_file = [&](const std::string& name, const std::string& body) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("write_report: cannot open for writing: " + path);
    out << body;
    if (!out) throw FormatError("write_report: short write: " + path);
  };

  write_file("summary.txt", render_report(records));

  std::ostringstream by_defense;
  by_defense << "attack,defense,n,success_rate,recovered_fraction,noise_mean,noise_std,"
                "queries_mean,queries_std,seconds_mean\n";
  for (const auto& g : groups) {
    by_defense << g.attack << ',' << g.defense << ',' << g.n << ','
               << detail::csv_real(g.success_rate) << ','
               << (g.defense == "none" ? std::string()
                                       : detail::csv_real(1.0 - g.success_rate))
               << ',' << detail::csv_real(g.noise.mean) << ',' << detail::csv_real(g.noise.std)
               << ',' << detail::csv_real(g.queries.mean) << ','
               << detail::csv_real(g.queries.std) << ',' << detail::csv_real(g.seconds_mean)
               << "\n";
  }
  write_file("by_defense.csv", by_defense.str());

  std::ostringstream trials;
  trials << "image_id,attack,defense,success,queries,noise_rate,seconds\n";
  for (const auto& r : records)
    trials << r.image_id << ',' << r.attack << ',' << r.defense << ',' << (r.success ? 1 : 0)
           << ',' << r.queries << ',' << detail::csv_real(r.noise_rate) << ','
           << detail::csv_real(r.seconds) << "\n";
  write_file("trials.csv", trials.str());
}

}  // namespace bbx
