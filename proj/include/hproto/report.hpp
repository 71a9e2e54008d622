// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hproto/exit.hpp"
#include "hproto/experiments.hpp"
#include "hproto/metrics.hpp"
#include "json.hpp"

namespace hproto {

inline constexpr int kReportFormatVersion = 1;

struct EvaluationReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, 2> per_class_f1{};
  ConfusionCounts confusion;
  std::optional<double> avg_exit_layer;
  std::optional<double> speedup;
  std::optional<std::vector<double>> exit_histogram;
  std::optional<std::map<std::string, double>> per_group_accuracy;
  std::vector<std::uint64_t> seeds_used;
  std::vector<double> per_seed_accuracy;  // aligned with seeds_used
  std::vector<double> per_seed_macro_f1;
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const EvaluationReport&) const = default;
};

// Metrics of a single prediction run; seeds and config are left to the caller.
EvaluationReport make_report(std::span<const std::uint8_t> labels,
                             std::span<const std::uint8_t> predictions);

enum class ReportFormat { kJson, kCsv };
ReportFormat parse_report_format(const std::string& s);

// "12.34" for 0.1234.
std::string format_percent(double fraction);

// CSV columns, fixed:
//   accuracy,macro_f1,f1_non_hate,f1_hate,tp,fp,tn,fn,avg_exit_layer,speedup
// Metrics are percentages with two decimals; absent optionals are empty.
inline constexpr const char* kReportCsvHeader =
    "accuracy,macro_f1,f1_non_hate,f1_hate,tp,fp,tn,fn,avg_exit_layer,speedup";

std::string emit_report(const EvaluationReport& report, ReportFormat format);
nlohmann::json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

std::string sweep_csv(std::span<const SweepPoint> points);
std::string histogram_csv(std::span<const double> proportions);
std::string transfer_csv(std::span<const TransferCell> cells);
std::string selection_csv(std::span<const SelectionResult> results);
nlohmann::json to_json(std::span<const SweepPoint> points);
nlohmann::json to_json(std::span<const TransferCell> cells);
nlohmann::json to_json(std::span<const SelectionResult> results);

}  // namespace hproto
