// Copyright (c) 2026 The pngbert-ja Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PNGBERT_METRICS_REPORT_H_
#define PNGBERT_METRICS_REPORT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pngbert::metrics {

struct Rate {
  double value = 0.0;
  std::size_t count = 0;
};

struct MetricsReport {
  std::string preset;
  std::string config_hash;
  std::map<std::string, std::uint64_t> seeds;
  std::optional<Rate> mlm_acc, g2p_acc, p2g_acc, aer, cer, ta, pa, aa;
  // Supplementary rates, e.g. homograph-restricted G2P.
  std::map<std::string, Rate> extra;

  // Throws DataError when a rate leaves [0,1] (cer may exceed 1) or a
  // present rate has no samples.
  void validate() const;
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);

  static std::vector<std::string> csv_columns();
  static std::string csv_header();
  // Empty cells for absent rates.
  std::string csv_row() const;
};

void write_report(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report(const std::filesystem::path& path);

}  // namespace pngbert::metrics

#endif  // PNGBERT_METRICS_REPORT_H_
