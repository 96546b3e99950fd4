// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ponv/dataset.hpp"
#include "ponv/model.hpp"

namespace ponv::testing {

// Minimal schema with the demographic columns the score definitions need plus
// arbitrary continuous extras.
inline FeatureSchema tiny_schema(const std::vector<std::string>& extra_continuous = {}) {
  FeatureSchema s;
  auto bin = [](const std::string& name) {
    FeatureSpec f;
    f.name = name;
    f.kind = FeatureKind::binary;
    return f;
  };
  FeatureSpec age;
  age.name = "AGE";
  age.kind = FeatureKind::continuous;
  age.unit = "years";
  age.min = 18;
  age.max = 120;
  s.features.push_back(age);
  s.features.push_back(bin("GENDER"));
  s.features.push_back(bin("SMOKE_STAT"));
  s.features.push_back(bin("HX_PONV"));
  s.features.push_back(bin("MIGRAINE"));
  FeatureSpec dur;
  dur.name = "ANES_DUR";
  dur.kind = FeatureKind::continuous;
  dur.unit = "min";
  dur.min = 0;
  dur.max = 1440;
  s.features.push_back(dur);
  s.features.push_back(bin("POSTOPI_PACU"));
  s.features.push_back(bin("INHALE_ANES"));
  s.features.push_back(bin("NITROUS"));
  for (const auto& name : extra_continuous) {
    FeatureSpec f;
    f.name = name;
    f.kind = FeatureKind::continuous;
    f.min = -1000;
    f.max = 1000;
    s.features.push_back(f);
  }
  s.features.push_back(bin("PONV_PACU"));
  s.features.push_back(bin("PONV_24H"));
  s.targets = {"PONV_PACU", "PONV_24H"};
  s.rebuild_index();
  s.validate();
  return s;
}

// Row-major construction helper; NaN cells become missing.
inline Dataset make_dataset(const FeatureSchema& schema,
                            const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> cols(schema.size());
  std::vector<std::vector<uint8_t>> miss(schema.size());
  for (const auto& row : rows) {
    for (size_t c = 0; c < schema.size(); ++c) {
      const bool m = std::isnan(row[c]);
      cols[c].push_back(m ? 0.0 : row[c]);
      miss[c].push_back(m ? 1 : 0);
    }
  }
  return Dataset::from_parts(schema, std::move(cols), std::move(miss));
}

// Single-branch matrix builder for model tests.
inline FeatureMatrix matrix_of(const std::vector<std::vector<double>>& cols,
                               const std::vector<int>& categorical_arity = {}) {
  FeatureMatrix m;
  for (size_t c = 0; c < cols.size(); ++c) {
    MatrixColumnInfo info;
    info.name = "f" + std::to_string(c);
    if (c < categorical_arity.size() && categorical_arity[c] > 0) {
      info.categories = categorical_arity[c];
      info.discrete = true;
    }
    m.info.push_back(info);
    m.cols.push_back(cols[c]);
  }
  return m;
}

}  // namespace ponv::testing
