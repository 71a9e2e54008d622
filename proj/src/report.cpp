// SPDX-License-Identifier: Apache-2.0
#include "hproto/report.hpp"

#include <cstdio>
#include <sstream>

#include "hproto/error.hpp"

namespace hproto {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

EvaluationReport make_report(std::span<const std::uint8_t> labels,
                             std::span<const std::uint8_t> predictions) {
  EvaluationReport r;
  r.confusion = confusion(labels, predictions);
  r.accuracy = accuracy(r.confusion);
  r.per_class_f1 = per_class_f1(r.confusion);
  r.macro_f1 = macro_f1(r.confusion);
  return r;
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  throw ValidationError("unknown format '" + s + "' (expected json or csv)");
}

std::string format_percent(double fraction) { return fixed(100.0 * fraction, 2); }

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["version"] = kReportFormatVersion;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["per_class_f1"] = r.per_class_f1;
  j["confusion"] = {{"tp", r.confusion.tp},
                    {"fp", r.confusion.fp},
                    {"tn", r.confusion.tn},
                    {"fn", r.confusion.fn}};
  if (r.avg_exit_layer) j["avg_exit_layer"] = *r.avg_exit_layer;
  if (r.speedup) j["speedup"] = *r.speedup;
  if (r.exit_histogram) j["exit_histogram"] = *r.exit_histogram;
  if (r.per_group_accuracy) j["per_group_accuracy"] = *r.per_group_accuracy;
  j["seeds_used"] = r.seeds_used;
  j["per_seed_accuracy"] = r.per_seed_accuracy;
  j["per_seed_macro_f1"] = r.per_seed_macro_f1;
  j["config"] = r.config;
  return j;
}

EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kReportFormatVersion)
      throw FormatError("unsupported report version");
    EvaluationReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.per_class_f1 = j.at("per_class_f1").get<std::array<double, 2>>();
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                   c.at("tn").get<std::uint64_t>(), c.at("fn").get<std::uint64_t>()};
    if (j.contains("avg_exit_layer")) r.avg_exit_layer = j["avg_exit_layer"].get<double>();
    if (j.contains("speedup")) r.speedup = j["speedup"].get<double>();
    if (j.contains("exit_histogram"))
      r.exit_histogram = j["exit_histogram"].get<std::vector<double>>();
    if (j.contains("per_group_accuracy"))
      r.per_group_accuracy = j["per_group_accuracy"].get<std::map<std::string, double>>();
    r.seeds_used = j.value("seeds_used", std::vector<std::uint64_t>{});
    r.per_seed_accuracy = j.value("per_seed_accuracy", std::vector<double>{});
    r.per_seed_macro_f1 = j.value("per_seed_macro_f1", std::vector<double>{});
    r.config = j.value("config", nlohmann::json::object());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report document: ") + e.what());
  }
}

std::string emit_report(const EvaluationReport& r, ReportFormat format) {
  if (format == ReportFormat::kJson) return to_json(r).dump(2) + "\n";
  std::ostringstream os;
  os << kReportCsvHeader << '\n'
     << format_percent(r.accuracy) << ',' << format_percent(r.macro_f1) << ','
     << format_percent(r.per_class_f1[0]) << ',' << format_percent(r.per_class_f1[1]) << ','
     << r.confusion.tp << ',' << r.confusion.fp << ',' << r.confusion.tn << ','
     << r.confusion.fn << ',' << (r.avg_exit_layer ? fixed(*r.avg_exit_layer, 2) : "") << ','
     << (r.speedup ? fixed(*r.speedup, 4) : "") << '\n';
  return os.str();
}

std::string sweep_csv(std::span<const SweepPoint> points) {
  std::ostringstream os;
  os << "delta,macro_f1,avg_exit\n";
  for (const auto& p : points)
    os << fixed(p.delta, 4) << ',' << format_percent(p.macro_f1) << ',' << fixed(p.avg_exit, 4)
       << '\n';
  return os.str();
}

std::string histogram_csv(std::span<const double> proportions) {
  std::ostringstream os;
  os << "layer,proportion\n";
  for (std::size_t i = 0; i < proportions.size(); ++i)
    os << (i + 1) << ',' << fixed(proportions[i], 6) << '\n';
  return os.str();
}

std::string transfer_csv(std::span<const TransferCell> cells) {
  std::ostringstream os;
  os << "source,target,accuracy,macro_f1,relative_f1\n";
  for (const auto& c : cells)
    os << c.proto_source << ',' << c.eval_target << ',' << format_percent(c.accuracy) << ','
       << format_percent(c.macro_f1) << ',' << (c.relative_f1 ? fixed(*c.relative_f1, 4) : "")
       << '\n';
  return os.str();
}

std::string selection_csv(std::span<const SelectionResult> results) {
  std::ostringstream os;
  os << "size,repeats,mean_f1,std_f1,min_f1,max_f1\n";
  for (const auto& r : results)
    os << r.size << ',' << r.f1.size() << ',' << format_percent(r.mean) << ','
       << format_percent(r.std) << ',' << format_percent(r.min) << ',' << format_percent(r.max)
       << '\n';
  return os.str();
}

nlohmann::json to_json(std::span<const SweepPoint> points) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : points)
    j.push_back({{"delta", p.delta}, {"macro_f1", p.macro_f1}, {"avg_exit", p.avg_exit}});
  return j;
}

nlohmann::json to_json(std::span<const TransferCell> cells) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cell = {{"source", c.proto_source},
                           {"target", c.eval_target},
                           {"accuracy", c.accuracy},
                           {"macro_f1", c.macro_f1}};
    cell["relative_f1"] = c.relative_f1 ? nlohmann::json(*c.relative_f1) : nlohmann::json();
    j.push_back(std::move(cell));
  }
  return j;
}

nlohmann::json to_json(std::span<const SelectionResult> results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results)
    j.push_back({{"size", r.size},
                 {"f1", r.f1},
                 {"mean", r.mean},
                 {"std", r.std},
                 {"min", r.min},
                 {"max", r.max},
                 {"clamped", r.clamped}});
  return j;
}

}  // namespace hproto
