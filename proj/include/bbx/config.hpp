#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "bbx/attacks/dispatch.hpp"
#include "bbx/defenses.hpp"
#include "bbx/errors.hpp"
#include "bbx/train.hpp"

namespace bbx {

struct SyntheticSpec {
  int classes = 4;
  int per_class = 50;
  int height = 8;
  int width = 8;
  int channels = 1;
  double noise_sigma = 0.05;
};
struct CifarSpec {
  std::string path;
};
struct PpmDirSpec {
  std::string path;
};
using DatasetSpec = std::variant<SyntheticSpec, CifarSpec, PpmDirSpec>;

struct ModelSpec {
  std::string kind = "mlp";  // linear | mlp | cnn | external
  std::vector<int> hidden = {16};
  int conv_filters = 4;
  std::string weights_path;  // when set, loaded instead of trained
  TrainConfig train;
  std::vector<std::string> command;  // external oracle argv
  bool external_probabilities = true;
  int external_classes = 0;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelSpec model;
  AttackSpec attack = SimbaConfig{};
  std::vector<DefenseSpec> defenses;
  int eval_per_class = 25;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "results";
  int repetitions = 1;
  bool adaptive = false;  // attacks query the defended oracle directly
};

namespace detail {

struct ConfigEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::map<std::string, ConfigEntry> entries;
};

inline std::string config_trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline std::vector<ConfigSection> config_sections(const std::string& text) {
  std::vector<ConfigSection> sections;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::size_t hash = raw.find('#');
    std::string line = config_trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError("config line " + std::to_string(lineno) + ": unterminated section");
      sections.push_back({config_trim(line.substr(1, line.size() - 2)), lineno, {}});
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    if (sections.empty())
      throw FormatError("config line " + std::to_string(lineno) + ": entry before any section");
    const std::string key = config_trim(line.substr(0, eq));
    const std::string value = config_trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError("config line " + std::to_string(lineno) + ": empty key");
    auto [it, fresh] = sections.back().entries.insert({key, {value, lineno, false}});
    if (!fresh)
      throw FormatError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return sections;
}

inline long long config_int(const ConfigEntry& e, const std::string& key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument(e.value);
    return v;
  } catch (const std::exception&) {
    throw FormatError("config line " + std::to_string(e.line) + ": '" + key +
                      "' needs an integer, got '" + e.value + "'");
  }
}

inline double config_real(const ConfigEntry& e, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument(e.value);
    return v;
  } catch (const std::exception&) {
    throw FormatError("config line " + std::to_string(e.line) + ": '" + key +
                      "' needs a number, got '" + e.value + "'");
  }
}

inline bool config_bool(const ConfigEntry& e, const std::string& key) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw FormatError("config line " + std::to_string(e.line) + ": '" + key +
                    "' needs true or false, got '" + e.value + "'");
}

inline std::vector<int> config_int_list(const ConfigEntry& e, const std::string& key) {
  std::vector<int> out;
  std::istringstream in(e.value);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = config_trim(tok);
    if (tok.empty()) continue;
    ConfigEntry fake{tok, e.line, false};
    out.push_back(static_cast<int>(config_int(fake, key)));
  }
  if (out.empty())
    throw FormatError("config line " + std::to_string(e.line) + ": '" + key +
                      "' needs a comma-separated integer list");
  return out;
}

inline std::vector<std::string> config_words(const ConfigEntry& e) {
  std::vector<std::string> out;
  std::istringstream in(e.value);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Access helper that marks keys used so leftovers can be reported as typos.
class SectionReader {
 public:
  explicit SectionReader(ConfigSection& s) : s_(s) {}

  std::optional<std::string> str(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return std::nullopt;
    it->second.used = true;
    return it->second.value;
  }
  std::optional<long long> integer(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return std::nullopt;
    it->second.used = true;
    return config_int(it->second, key);
  }
  std::optional<double> real(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return std::nullopt;
    it->second.used = true;
    return config_real(it->second, key);
  }
  std::optional<bool> boolean(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return std::nullopt;
    it->second.used = true;
    return config_bool(it->second, key);
  }
  std::optional<std::vector<int>> int_list(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return std::nullopt;
    it->second.used = true;
    return config_int_list(it->second, key);
  }
  std::optional<std::vector<std::string>> words(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return std::nullopt;
    it->second.used = true;
    return config_words(it->second);
  }

  void finish(const std::string& section) const {
    for (const auto& [key, entry] : s_.entries)
      if (!entry.used)
        throw FormatError("config line " + std::to_string(entry.line) + ": unknown key '" + key +
                          "' in [" + section + "]");
  }

 private:
  ConfigSection& s_;
};

inline DatasetSpec parse_dataset(ConfigSection& s) {
  SectionReader r(s);
  const std::string kind = r.str("kind").value_or("synthetic");
  DatasetSpec spec;
  if (kind == "synthetic") {
    SyntheticSpec syn;
    if (auto v = r.integer("classes")) syn.classes = static_cast<int>(*v);
    if (auto v = r.integer("per_class")) syn.per_class = static_cast<int>(*v);
    if (auto v = r.integer("height")) syn.height = static_cast<int>(*v);
    if (auto v = r.integer("width")) syn.width = static_cast<int>(*v);
    if (auto v = r.integer("channels")) syn.channels = static_cast<int>(*v);
    if (auto v = r.real("noise_sigma")) syn.noise_sigma = *v;
    spec = syn;
  } else if (kind == "cifar10") {
    CifarSpec c;
    auto p = r.str("path");
    if (!p) throw FormatError("config: [dataset] kind=cifar10 needs path");
    c.path = *p;
    spec = c;
  } else if (kind == "ppm") {
    PpmDirSpec p;
    auto v = r.str("path");
    if (!v) throw FormatError("config: [dataset] kind=ppm needs path");
    p.path = *v;
    spec = p;
  } else {
    throw FormatError("config line " + std::to_string(s.line) + ": unknown dataset kind '" +
                      kind + "'");
  }
  r.finish("dataset");
  return spec;
}

inline ModelSpec parse_model(ConfigSection& s) {
  SectionReader r(s);
  ModelSpec m;
  m.kind = r.str("kind").value_or("mlp");
  if (m.kind != "linear" && m.kind != "mlp" && m.kind != "cnn" && m.kind != "external")
    throw FormatError("config line " + std::to_string(s.line) + ": unknown model kind '" +
                      m.kind + "'");
  if (auto v = r.int_list("hidden")) m.hidden = *v;
  if (auto v = r.integer("conv_filters")) m.conv_filters = static_cast<int>(*v);
  if (auto v = r.str("weights")) m.weights_path = *v;
  if (auto v = r.integer("epochs")) m.train.epochs = static_cast<int>(*v);
  if (auto v = r.integer("batch_size")) m.train.batch_size = static_cast<int>(*v);
  if (auto v = r.real("learning_rate")) m.train.learning_rate = *v;
  if (auto v = r.words("command")) m.command = *v;
  if (auto v = r.boolean("probabilities")) m.external_probabilities = *v;
  if (auto v = r.integer("classes")) m.external_classes = static_cast<int>(*v);
  if (m.kind == "external" && m.command.empty())
    throw FormatError("config: [model] kind=external needs command");
  if (m.kind == "external" && m.external_classes < 2)
    throw FormatError("config: [model] kind=external needs classes >= 2");
  r.finish("model");
  return m;
}

inline AttackSpec parse_attack(ConfigSection& s) {
  SectionReader r(s);
  const std::string kind = r.str("kind").value_or("simba");
  AttackSpec spec;
  if (kind == "simba") {
    SimbaConfig c;
    if (auto v = r.real("epsilon")) c.epsilon = *v;
    if (auto v = r.integer("max_iters")) c.max_iters = *v;
    if (auto v = r.real("omega")) c.omega = *v;
    if (auto v = r.boolean("targeted")) c.targeted = *v;
    if (auto v = r.integer("target_class")) c.target_class = static_cast<int>(*v);
    spec = c;
  } else if (kind == "hopskipjump") {
    HsjConfig c;
    if (auto v = r.integer("batch_size")) c.batch_size = static_cast<int>(*v);
    if (auto v = r.integer("max_iters")) c.max_iters = *v;
    if (auto v = r.boolean("targeted")) c.mode = *v ? AttackMode::Targeted : AttackMode::Untargeted;
    if (auto v = r.integer("target_class")) c.target_class = static_cast<int>(*v);
    if (auto v = r.integer("init_trials")) c.init_trials = static_cast<int>(*v);
    if (auto v = r.real("binsearch_threshold")) c.binsearch_threshold = *v;
    spec = c;
  } else if (kind == "boundary") {
    BoundaryConfig c;
    if (auto v = r.real("epsilon")) c.epsilon = *v;
    if (auto v = r.real("delta")) c.delta = *v;
    if (auto v = r.integer("max_iters")) c.max_iters = *v;
    if (auto v = r.integer("window")) c.window = static_cast<int>(*v);
    spec = c;
  } else if (kind == "mga") {
    MgaConfig c;
    if (auto v = r.real("epsilon")) c.epsilon = *v;
    if (auto v = r.integer("max_queries")) c.max_queries = *v;
    if (auto v = r.real("mutation_rate")) c.mutation_rate = *v;
    if (auto v = r.integer("population_size")) c.population_size = static_cast<int>(*v);
    spec = c;
  } else {
    throw FormatError("config line " + std::to_string(s.line) + ": unknown attack kind '" + kind +
                      "'");
  }
  r.finish("attack");
  validate_attack(spec);
  return spec;
}

inline DefenseSpec parse_defense(ConfigSection& s) {
  SectionReader r(s);
  const auto kind = r.str("kind");
  if (!kind) throw FormatError("config line " + std::to_string(s.line) + ": [defense] needs kind");
  DefenseSpec spec;
  if (*kind == "bit_squeeze") {
    BitSqueeze b;
    if (auto v = r.integer("depth")) b.depth = static_cast<int>(*v);
    spec = b;
  } else if (*kind == "median") {
    MedianSmooth m;
    if (auto v = r.integer("kernel")) m.kernel = static_cast<int>(*v);
    spec = m;
  } else if (*kind == "jpeg") {
    Jpeg j;
    if (auto v = r.integer("quality")) j.quality = static_cast<int>(*v);
    spec = j;
  } else {
    throw FormatError("config line " + std::to_string(s.line) + ": unknown defense kind '" +
                      *kind + "'");
  }
  r.finish("defense");
  return spec;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  auto sections = detail::config_sections(text);
  ExperimentConfig cfg;
  bool saw_dataset = false, saw_model = false, saw_attack = false, saw_run = false;
  for (auto& s : sections) {
    if (s.name == "dataset") {
      if (saw_dataset) throw FormatError("config: duplicate [dataset] section");
      saw_dataset = true;
      cfg.dataset = detail::parse_dataset(s);
    } else if (s.name == "model") {
      if (saw_model) throw FormatError("config: duplicate [model] section");
      saw_model = true;
      cfg.model = detail::parse_model(s);
    } else if (s.name == "attack") {
      if (saw_attack) throw FormatError("config: duplicate [attack] section");
      saw_attack = true;
      cfg.attack = detail::parse_attack(s);
    } else if (s.name == "defense") {
      cfg.defenses.push_back(detail::parse_defense(s));
    } else if (s.name == "run") {
      if (saw_run) throw FormatError("config: duplicate [run] section");
      saw_run = true;
      detail::SectionReader r(s);
      if (auto v = r.integer("eval_per_class")) cfg.eval_per_class = static_cast<int>(*v);
      if (auto v = r.integer("seed")) cfg.seed = static_cast<std::uint64_t>(*v);
      if (auto v = r.integer("workers")) cfg.workers = static_cast<int>(*v);
      if (auto v = r.str("out")) cfg.out_dir = *v;
      if (auto v = r.integer("repetitions")) cfg.repetitions = static_cast<int>(*v);
      if (auto v = r.boolean("adaptive")) cfg.adaptive = *v;
      r.finish("run");
    } else {
      throw FormatError("config line " + std::to_string(s.line) + ": unknown section [" + s.name +
                        "]");
    }
  }
  if (cfg.eval_per_class < 1) throw ParamError("config: eval_per_class must be at least 1");
  if (cfg.workers < 1) throw ParamError("config: workers must be at least 1");
  if (cfg.repetitions < 1) throw ParamError("config: repetitions must be at least 1");
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

}  // namespace bbx
