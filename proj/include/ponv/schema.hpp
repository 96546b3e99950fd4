// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ponv/common.hpp"
#include "ponv/csv.hpp"

namespace ponv {

enum class FeatureKind { continuous, binary, categorical, ordinal };

inline const char* kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::binary: return "binary";
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::ordinal: return "ordinal";
  }
  return "?";
}

inline FeatureKind kind_from_name(const std::string& s) {
  if (s == "continuous") return FeatureKind::continuous;
  if (s == "binary") return FeatureKind::binary;
  if (s == "categorical") return FeatureKind::categorical;
  if (s == "ordinal") return FeatureKind::ordinal;
  throw ConfigError("unknown feature kind: " + s);
}

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  std::string unit;                      // may be empty
  double min = 0.0, max = 0.0;           // continuous and ordinal validation range
  std::vector<std::string> categories;   // categorical set; binary may carry two value labels

  bool is_numeric() const { return kind == FeatureKind::continuous || kind == FeatureKind::ordinal; }

  // index of a category label, or -1
  int category_index(const std::string& label) const {
    for (size_t i = 0; i < categories.size(); ++i)
      if (categories[i] == label) return static_cast<int>(i);
    return -1;
  }
};

// Ordered feature declaration plus the two binary target names. Serialized as
// a versioned line-based text file: one `name|kind|unit|domain` row per
// feature, domain being `lo:hi` or a comma list of categories.
class FeatureSchema {
 public:
  int version = 1;
  std::vector<FeatureSpec> features;   // includes the targets
  std::vector<std::string> targets;    // exactly two names in `features`, binary

  size_t size() const { return features.size(); }

  const FeatureSpec& at(size_t i) const { return features[i]; }

  std::optional<size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  size_t index_of(const std::string& name) const {
    auto idx = find(name);
    if (!idx) throw DataError("schema has no feature named " + name);
    return *idx;
  }

  bool is_target(size_t i) const {
    for (const auto& t : targets)
      if (features[i].name == t) return true;
    return false;
  }

  std::vector<size_t> target_indices() const {
    std::vector<size_t> out;
    for (const auto& t : targets) out.push_back(index_of(t));
    return out;
  }

  // Non-target feature indices in declaration order.
  std::vector<size_t> predictor_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < features.size(); ++i)
      if (!is_target(i)) out.push_back(i);
    return out;
  }

  void rebuild_index() {
    index_.clear();
    for (size_t i = 0; i < features.size(); ++i) index_[features[i].name] = i;
  }

  void validate() const {
    std::map<std::string, int> seen;
    for (const auto& f : features) {
      if (f.name.empty()) throw ConfigError("schema: empty feature name");
      if (++seen[f.name] > 1) throw ConfigError("schema: duplicate feature name " + f.name);
      if (f.kind == FeatureKind::continuous) {
        if (!std::isfinite(f.min) || !std::isfinite(f.max) || f.min > f.max)
          throw ConfigError("schema: continuous feature " + f.name + " needs a finite [min,max] range");
      }
      if (f.kind == FeatureKind::ordinal && f.min > f.max)
        throw ConfigError("schema: ordinal feature " + f.name + " has an empty range");
      if (f.kind == FeatureKind::categorical && f.categories.empty())
        throw ConfigError("schema: categorical feature " + f.name + " has no categories");
    }
    if (targets.size() != 2) throw ConfigError("schema: expected exactly two targets");
    for (const auto& t : targets) {
      auto idx = find(t);
      if (!idx) throw ConfigError("schema: target " + t + " is not declared as a feature");
      if (features[*idx].kind != FeatureKind::binary)
        throw ConfigError("schema: target " + t + " must be binary");
    }
  }

  std::string serialize() const {
    std::ostringstream out;
    out << "# " << kArtifactName << " feature schema\n";
    out << "version=" << version << "\n";
    out << "targets=" << targets[0] << "," << targets[1] << "\n";
    for (const auto& f : features) {
      out << f.name << "|" << kind_name(f.kind) << "|" << f.unit << "|";
      if (f.kind == FeatureKind::continuous || f.kind == FeatureKind::ordinal) {
        out << format_double(f.min) << ":" << format_double(f.max);
      } else {
        for (size_t i = 0; i < f.categories.size(); ++i) {
          if (i) out << ",";
          out << f.categories[i];
        }
      }
      out << "\n";
    }
    return out.str();
  }

  static FeatureSchema parse(std::istream& in) {
    FeatureSchema s;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.rfind("version=", 0) == 0) {
        bool ok = false;
        s.version = static_cast<int>(parse_long(t.substr(8), ok));
        if (!ok) throw ConfigError("schema: bad version line " + std::to_string(lineno));
        continue;
      }
      if (t.rfind("targets=", 0) == 0) {
        for (auto& name : split(t.substr(8), ',')) s.targets.push_back(trim(name));
        continue;
      }
      auto parts = split(t, '|');
      if (parts.size() != 4)
        throw ConfigError("schema: line " + std::to_string(lineno) + " needs name|kind|unit|domain");
      FeatureSpec f;
      f.name = trim(parts[0]);
      f.kind = kind_from_name(trim(parts[1]));
      f.unit = trim(parts[2]);
      const std::string domain = trim(parts[3]);
      if (f.kind == FeatureKind::continuous || f.kind == FeatureKind::ordinal) {
        auto lh = split(domain, ':');
        if (lh.size() != 2) throw ConfigError("schema: feature " + f.name + " needs lo:hi range");
        bool ok1 = false, ok2 = false;
        f.min = parse_double(lh[0], ok1);
        f.max = parse_double(lh[1], ok2);
        if (!ok1 || !ok2) throw ConfigError("schema: feature " + f.name + " has a non-numeric range");
      } else if (!domain.empty()) {
        for (auto& c : split(domain, ',')) f.categories.push_back(trim(c));
      }
      s.features.push_back(std::move(f));
    }
    s.rebuild_index();
    s.validate();
    return s;
  }

  static FeatureSchema parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file: " + path);
    return parse(in);
  }

  static FeatureSchema parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

 private:
  std::map<std::string, size_t> index_;
};

}  // namespace ponv
