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

#include "pngbert/metrics/report.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pngbert/common/errors.h"

namespace pngbert::metrics {

using nlohmann::json;

namespace {

struct Field {
  const char* name;
  std::optional<Rate> MetricsReport::*member;
};

constexpr Field kFields[] = {
    {"mlm_acc", &MetricsReport::mlm_acc}, {"g2p_acc", &MetricsReport::g2p_acc},
    {"p2g_acc", &MetricsReport::p2g_acc}, {"aer", &MetricsReport::aer},
    {"cer", &MetricsReport::cer},         {"ta", &MetricsReport::ta},
    {"pa", &MetricsReport::pa},           {"aa", &MetricsReport::aa},
};

std::string format_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void check_rate(const std::string& name, const Rate& r, bool bounded) {
  if (r.count == 0) throw DataError("report: rate '" + name + "' has no samples");
  if (!(r.value >= 0.0) || (bounded && r.value > 1.0)) {
    throw DataError("report: rate '" + name + "' out of range");
  }
}

}  // namespace

void MetricsReport::validate() const {
  for (const auto& f : kFields) {
    if (const auto& r = this->*f.member) check_rate(f.name, *r, std::string(f.name) != "cer");
  }
  for (const auto& [name, r] : extra) check_rate(name, r, true);
}

std::string MetricsReport::to_json() const {
  validate();
  json metrics = json::object();
  for (const auto& f : kFields) {
    if (const auto& r = this->*f.member) metrics[f.name] = {{"value", r->value}, {"count", r->count}};
  }
  json extras = json::object();
  for (const auto& [name, r] : extra) extras[name] = {{"value", r.value}, {"count", r.count}};
  json j = {{"preset", preset}, {"config_hash", config_hash}, {"seeds", seeds}, {"metrics", metrics}};
  if (!extra.empty()) j["extra"] = extras;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.preset = j.at("preset").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    const json& m = j.at("metrics");
    for (const auto& f : kFields) {
      if (m.contains(f.name)) {
        r.*f.member = Rate{m[f.name].at("value").get<double>(), m[f.name].at("count").get<std::size_t>()};
      }
    }
    if (j.contains("extra")) {
      for (const auto& [name, v] : j["extra"].items()) {
        r.extra[name] = Rate{v.at("value").get<double>(), v.at("count").get<std::size_t>()};
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  r.validate();
  return r;
}

std::vector<std::string> MetricsReport::csv_columns() {
  std::vector<std::string> cols = {"preset"};
  for (const auto& f : kFields) cols.push_back(f.name);
  return cols;
}

std::string MetricsReport::csv_header() {
  std::string out;
  for (const auto& c : csv_columns()) out += (out.empty() ? "" : ",") + c;
  return out;
}

std::string MetricsReport::csv_row() const {
  std::string out = preset;
  for (const auto& f : kFields) {
    out += ',';
    if (const auto& r = this->*f.member) out += format_rate(r->value);
  }
  return out;
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  const std::string text = report.to_json();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report " + path.string());
  out << text;
  if (!out) throw DataError("cannot write report " + path.string());
}

MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return MetricsReport::from_json(ss.str());
}

}  // namespace pngbert::metrics
