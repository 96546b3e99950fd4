// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ponv/automl.hpp"
#include "ponv/dataset.hpp"
#include "ponv/scores.hpp"
#include "ponv/splitter.hpp"

namespace ponv {

// Flat `[section]` / `key = value` configuration text. Keys may repeat
// (score factors do); lookup helpers return the last value unless the list
// form is requested.
class IniFile {
 public:
  static IniFile parse(std::istream& in) {
    IniFile ini;
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
        section = trim(t.substr(1, t.size() - 2));
        ini.sections_[section];
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      ini.sections_[section].push_back({trim(t.substr(0, eq)), trim(t.substr(eq + 1))});
    }
    return ini;
  }

  static IniFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in);
  }

  static IniFile parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }

  bool has(const std::string& s, const std::string& key) const {
    auto it = sections_.find(s);
    if (it == sections_.end()) return false;
    for (const auto& [k, v] : it->second)
      if (k == key) return true;
    return false;
  }

  std::string get(const std::string& s, const std::string& key, const std::string& fallback = "") const {
    auto it = sections_.find(s);
    if (it == sections_.end()) return fallback;
    std::string out = fallback;
    for (const auto& [k, v] : it->second)
      if (k == key) out = v;
    return out;
  }

  std::vector<std::string> get_list(const std::string& s, const std::string& key) const {
    std::vector<std::string> out;
    auto it = sections_.find(s);
    if (it == sections_.end()) return out;
    for (const auto& [k, v] : it->second)
      if (k == key) out.push_back(v);
    return out;
  }

  double get_double(const std::string& s, const std::string& key, double fallback) const {
    if (!has(s, key)) return fallback;
    bool ok = false;
    const double v = parse_double(get(s, key), ok);
    if (!ok) throw ConfigError("config [" + s + "] " + key + ": expected a number");
    return v;
  }

  long get_long(const std::string& s, const std::string& key, long fallback) const {
    if (!has(s, key)) return fallback;
    bool ok = false;
    const long v = parse_long(get(s, key), ok);
    if (!ok) throw ConfigError("config [" + s + "] " + key + ": expected an integer");
    return v;
  }

  bool get_bool(const std::string& s, const std::string& key, bool fallback) const {
    if (!has(s, key)) return fallback;
    const std::string v = lower(get(s, key));
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("config [" + s + "] " + key + ": expected a boolean");
  }

  std::vector<long> get_long_list(const std::string& s, const std::string& key,
                                  std::vector<long> fallback) const {
    if (!has(s, key)) return fallback;
    std::vector<long> out;
    for (const auto& item : split(get(s, key), ',')) {
      bool ok = false;
      out.push_back(parse_long(item, ok));
      if (!ok) throw ConfigError("config [" + s + "] " + key + ": expected integers");
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& s, const std::string& key,
                                      std::vector<double> fallback) const {
    if (!has(s, key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split(get(s, key), ',')) {
      bool ok = false;
      out.push_back(parse_double(item, ok));
      if (!ok) throw ConfigError("config [" + s + "] " + key + ": expected numbers");
    }
    return out;
  }

 private:
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
};

struct RunConfig {
  // [run]
  uint64_t seed = 7;
  std::string out_dir = "out";
  unsigned workers = 1;
  std::string task = "early";  // early | delayed | both

  // [data] / [synth]
  std::string dataset_path;
  std::string schema_path;
  bool use_synth = false;
  SynthConfig synth;

  // [split]
  std::string split_method = "dbc";  // dbc | random
  int k = 5;
  BeeColonyParams bee;

  // [search]
  bool evolve_per_fold = true;
  std::string fixed_genome;  // non-empty disables evolution
  EvolutionParams evolution;
  bool refine = true;
  Grammar grammar = Grammar::defaults();

  // [threshold]
  bool ml_fit_threshold = false;
  double ml_fixed_threshold = 0.5;
  ScoreThresholdPolicy score_policy;

  // [evaluate]
  std::vector<std::string> baselines{"apfel", "koivuranta", "guideline"};

  // [explain]
  size_t background_rows = 100;
  size_t shap_records = 200;
  size_t top_features = 10;

  // score factor overrides
  ScoreDefinition apfel = apfel_definition();
  ScoreDefinition koivuranta = koivuranta_definition();
  ScoreDefinition guideline = guideline_definition();

  std::string config_hash;  // fnv1a of the raw config text

  std::vector<std::string> targets() const {
    if (task == "early") return {"PONV_PACU"};
    if (task == "delayed") return {"PONV_24H"};
    return {"PONV_PACU", "PONV_24H"};
  }

  const ScoreDefinition& score_definition(const std::string& name) const {
    if (name == "apfel") return apfel;
    if (name == "koivuranta") return koivuranta;
    if (name == "guideline") return guideline;
    throw ConfigError("unknown baseline score: " + name);
  }

  void validate() const {
    if (k < 2) throw ConfigError("config [split] k: must be >= 2");
    if (task != "early" && task != "delayed" && task != "both")
      throw ConfigError("config [run] task: must be early, delayed or both");
    if (split_method != "dbc" && split_method != "random")
      throw ConfigError("config [split] method: must be dbc or random");
    if (!use_synth && dataset_path.empty())
      throw ConfigError("config [data]: either dataset+schema paths or [synth] must be given");
    if (!use_synth && schema_path.empty()) throw ConfigError("config [data] schema: path required");
    bee.validate();
    evolution.validate();
    if (!fixed_genome.empty()) {
      const PipelineGenome g = PipelineGenome::parse(fixed_genome);  // throws on malformed text
      (void)g;
    }
  }
};

namespace detail {

inline Grammar grammar_from_ini(const IniFile& ini) {
  Grammar g = Grammar::defaults();
  if (!ini.has_section("grammar")) return g;
  const auto sel = ini.get_long_list("grammar", "selector_m", {0, 4, 8, 16});
  g.selector_m.assign(sel.begin(), sel.end());

  std::vector<std::string> families{"tree", "forest", "boosted"};
  if (ini.has("grammar", "families")) {
    families.clear();
    for (auto& f : split(ini.get("grammar", "families"), ',')) families.push_back(trim(f));
  }
  auto wanted = [&](const char* f) {
    for (const auto& x : families)
      if (x == f) return true;
    return false;
  };

  g.models.clear();
  if (wanted("tree")) {
    for (long depth : ini.get_long_list("grammar", "tree_depths", {3, 5, 8, 12}))
      for (long leaf : ini.get_long_list("grammar", "tree_min_leaf", {1, 5, 20}))
        for (long prune : ini.get_long_list("grammar", "tree_prune", {0, 1})) {
          ModelSpec m;
          m.family = ModelFamily::tree;
          m.max_depth = static_cast<int>(depth);
          m.min_samples_leaf = static_cast<int>(leaf);
          m.n_trees = 1;
          m.prune = prune == 1;
          g.models.push_back(m);
        }
  }
  if (wanted("forest")) {
    for (long trees : ini.get_long_list("grammar", "forest_trees", {25, 50, 100}))
      for (long depth : ini.get_long_list("grammar", "forest_depths", {4, 8, 12})) {
        ModelSpec m;
        m.family = ModelFamily::forest;
        m.max_depth = static_cast<int>(depth);
        m.min_samples_leaf = 1;
        m.n_trees = static_cast<int>(trees);
        g.models.push_back(m);
      }
  }
  if (wanted("boosted")) {
    for (long rounds : ini.get_long_list("grammar", "boost_rounds", {50, 100, 200}))
      for (long depth : ini.get_long_list("grammar", "boost_depths", {2, 3}))
        for (double lr : ini.get_double_list("grammar", "boost_lr", {0.05, 0.1, 0.3})) {
          ModelSpec m;
          m.family = ModelFamily::boosted;
          m.max_depth = static_cast<int>(depth);
          m.min_samples_leaf = 1;
          m.n_trees = static_cast<int>(rounds);
          m.learning_rate = lr;
          g.models.push_back(m);
        }
  }
  if (g.models.empty()) throw ConfigError("config [grammar]: model grid is empty");
  return g;
}

inline ScoreDefinition score_from_ini(const IniFile& ini, const std::string& section,
                                      ScoreDefinition fallback) {
  if (!ini.has_section(section)) return fallback;
  ScoreDefinition d;
  d.name = fallback.name;
  d.max_score = static_cast<int>(ini.get_long(section, "max", fallback.max_score));
  const auto factors = ini.get_list(section, "factor");
  if (factors.empty()) throw ConfigError("config [" + section + "]: needs at least one factor");
  for (const auto& f : factors) d.factors.push_back(parse_factor(f));
  return d;
}

}  // namespace detail

inline RunConfig run_config_from_ini(const IniFile& ini, const std::string& raw_text) {
  RunConfig c;
  c.config_hash = hex64(fnv1a64(raw_text));
  c.seed = static_cast<uint64_t>(ini.get_long("run", "seed", 7));
  c.out_dir = ini.get("run", "out", "out");
  c.workers = static_cast<unsigned>(ini.get_long("run", "workers", 1));
  c.task = lower(ini.get("run", "task", "early"));

  c.dataset_path = ini.get("data", "dataset", "");
  c.schema_path = ini.get("data", "schema", "");
  c.use_synth = ini.get_bool("data", "synth", c.dataset_path.empty() && ini.has_section("synth"));
  c.synth.n = static_cast<size_t>(ini.get_long("synth", "n", 2000));
  c.synth.informative = static_cast<size_t>(ini.get_long("synth", "informative", 5));
  c.synth.noise = static_cast<size_t>(ini.get_long("synth", "noise", 20));
  c.synth.prevalence_early = ini.get_double("synth", "prevalence_early", 0.15);
  c.synth.prevalence_delayed = ini.get_double("synth", "prevalence_delayed", 0.15);
  c.synth.missing_rate = ini.get_double("synth", "missing_rate", 0.0);
  c.synth.demographics = ini.get_bool("synth", "demographics", true);
  c.synth.weights = ini.get_double_list("synth", "weights", {});

  c.split_method = lower(ini.get("split", "method", "dbc"));
  c.k = static_cast<int>(ini.get_long("split", "k", 5));
  c.bee.colony = static_cast<int>(ini.get_long("split", "colony", 20));
  c.bee.scouts = static_cast<int>(ini.get_long("split", "scouts", 4));
  c.bee.neighborhood = static_cast<int>(ini.get_long("split", "neighborhood", 10));
  c.bee.onlooker_exponent = ini.get_double("split", "onlooker_exponent", 2.0);
  c.bee.abandonment = static_cast<int>(ini.get_long("split", "abandonment", 15));
  c.bee.max_iterations = static_cast<int>(ini.get_long("split", "iterations", 500));
  c.bee.time_budget_ms = ini.get_long("split", "time_budget_ms", 0);

  c.evolve_per_fold = ini.get_bool("search", "per_fold", true);
  c.fixed_genome = ini.get("search", "genome", "");
  c.evolution.population = static_cast<int>(ini.get_long("search", "population", 16));
  c.evolution.generations = static_cast<int>(ini.get_long("search", "generations", 8));
  c.evolution.tournament = static_cast<int>(ini.get_long("search", "tournament", 3));
  c.evolution.crossover_rate = ini.get_double("search", "crossover_rate", 0.9);
  c.evolution.mutation_rate = ini.get_double("search", "mutation_rate", 0.3);
  c.evolution.elitism = static_cast<int>(ini.get_long("search", "elitism", 2));
  c.evolution.inner_k = static_cast<int>(ini.get_long("search", "inner_k", 3));
  c.refine = ini.get_bool("search", "refine", true);
  c.grammar = detail::grammar_from_ini(ini);

  const std::string ml_thr = ini.get("threshold", "ml", "fixed:0.5");
  if (ml_thr == "fit") {
    c.ml_fit_threshold = true;
  } else if (ml_thr.rfind("fixed:", 0) == 0) {
    bool ok = false;
    c.ml_fixed_threshold = parse_double(ml_thr.substr(6), ok);
    if (!ok) throw ConfigError("config [threshold] ml: malformed fixed:VALUE");
  } else {
    throw ConfigError("config [threshold] ml: expected fit or fixed:VALUE");
  }
  const std::string sc_thr = ini.get("threshold", "scores", "fit");
  if (sc_thr == "fit") {
    c.score_policy.kind = ScoreThresholdPolicy::Kind::fit;
  } else if (sc_thr.rfind("fixed:", 0) == 0) {
    c.score_policy.kind = ScoreThresholdPolicy::Kind::fixed;
    bool ok = false;
    c.score_policy.fixed_value = static_cast<int>(parse_long(sc_thr.substr(6), ok));
    if (!ok) throw ConfigError("config [threshold] scores: malformed fixed:VALUE");
  } else {
    throw ConfigError("config [threshold] scores: expected fit or fixed:VALUE");
  }

  if (ini.has("evaluate", "baselines")) {
    c.baselines.clear();
    const std::string v = lower(ini.get("evaluate", "baselines"));
    if (v != "none")
      for (auto& b : split(v, ',')) c.baselines.push_back(trim(b));
  }

  c.background_rows = static_cast<size_t>(ini.get_long("explain", "background", 100));
  c.shap_records = static_cast<size_t>(ini.get_long("explain", "shap_records", 200));
  c.top_features = static_cast<size_t>(ini.get_long("explain", "top_features", 10));

  c.apfel = detail::score_from_ini(ini, "scores.apfel", apfel_definition());
  c.koivuranta = detail::score_from_ini(ini, "scores.koivuranta", koivuranta_definition());
  c.guideline = detail::score_from_ini(ini, "scores.guideline", guideline_definition());

  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream raw;
  raw << in.rdbuf();
  return run_config_from_ini(IniFile::parse_string(raw.str()), raw.str());
}

}  // namespace ponv
