#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ojasde/errors.hpp"

namespace ojasde {

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Structured experiment results: labeled numeric rows, an optional
/// least-squares fit, and ordered metadata. Every stochastic estimate row
/// carries its stderr in a dedicated column.
struct ExperimentReport {
  std::vector<std::string> columns;
  std::vector<std::string> row_labels;  // empty, or one label per row
  std::vector<std::vector<double>> rows;
  std::optional<FitResult> fit;
  std::vector<std::pair<std::string, std::string>> metadata;

  void add_row(const std::string& label, std::vector<double> values) {
    if (values.size() != columns.size())
      throw ValidationError("report row width does not match columns");
    row_labels.push_back(label);
    rows.push_back(std::move(values));
  }
  void add_meta(const std::string& key, const std::string& value) {
    metadata.emplace_back(key, value);
  }
};

/// FNV-1a hash of the canonical (sorted-key) config dump; embedded in every
/// report so a run can be reproduced from its output alone.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["columns"] = r.columns;
  j["row_labels"] = r.row_labels;
  j["rows"] = r.rows;
  if (r.fit) {
    j["fit"] = {{"slope", r.fit->slope},
                {"intercept", r.fit->intercept},
                {"r_squared", r.fit->r_squared}};
  }
  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : r.metadata) meta[k] = v;
  j["metadata"] = meta;
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.columns = j.at("columns").get<std::vector<std::string>>();
  r.row_labels = j.at("row_labels").get<std::vector<std::string>>();
  r.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  if (j.contains("fit")) {
    FitResult f;
    f.slope = j["fit"].at("slope").get<double>();
    f.intercept = j["fit"].at("intercept").get<double>();
    f.r_squared = j["fit"].at("r_squared").get<double>();
    r.fit = f;
  }
  for (const auto& [k, v] : j.at("metadata").items())
    r.metadata.emplace_back(k, v.get<std::string>());
  return r;
}

inline std::string report_to_csv(const ExperimentReport& r) {
  std::string out;
  for (const auto& [k, v] : r.metadata) out += "# " + k + "=" + v + "\n";
  if (r.fit) {
    out += "# fit_slope=" + format_double(r.fit->slope) + "\n";
    out += "# fit_intercept=" + format_double(r.fit->intercept) + "\n";
    out += "# fit_r_squared=" + format_double(r.fit->r_squared) + "\n";
  }
  out += "label";
  for (const auto& c : r.columns) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    out += r.row_labels.empty() ? std::to_string(i) : r.row_labels[i];
    for (double v : r.rows[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

/// Write the report as CSV or JSON. Metadata keys are emitted in insertion
/// order for CSV and sorted order for JSON; both are deterministic.
inline void emit_report(const ExperimentReport& r, const std::string& format,
                        const std::string& path) {
  std::string payload;
  if (format == "csv") {
    payload = report_to_csv(r);
  } else if (format == "json") {
    payload = report_to_json(r).dump(2);
    payload += "\n";
  } else {
    throw ValidationError("emit_report: format must be csv or json");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_report: cannot open '" + path + "'");
  out << payload;
  if (!out) throw IoError("emit_report: write failed for '" + path + "'");
}

}  // namespace ojasde
