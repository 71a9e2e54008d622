// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include "doctest.h"
#include "hproto/error.hpp"
#include "hproto/report.hpp"

using namespace hproto;

TEST_CASE("percent formatting") {
  CHECK(format_percent(0.7770) == "77.70");
  CHECK(format_percent(1.0 / 3.0) == "33.33");
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(0.0) == "0.00");
}

TEST_CASE("report JSON round trip") {
  const std::vector<std::uint8_t> y{0, 0, 1, 1, 1}, p{0, 1, 1, 1, 0};
  auto r = make_report(y, p);
  CHECK(r.confusion == ConfusionCounts{2, 1, 1, 1});
  CHECK(r.macro_f1 == (r.per_class_f1[0] + r.per_class_f1[1]) / 2.0);
  r.avg_exit_layer = 9.75;
  r.speedup = 12.0 / 9.75;
  r.exit_histogram = std::vector<double>{0.1, 0.2, 0.7};
  r.per_group_accuracy = std::map<std::string, double>{{"irony", 0.5}, {"other", 1.0 / 3.0}};
  r.seeds_used = {0, 1, 2};
  r.per_seed_accuracy = {0.6, 0.6, 0.6};
  r.per_seed_macro_f1 = {0.1 + 0.2, 0.58, 1.0 / 7.0};
  r.config = {{"subcommand", "classify"}, {"per_class", 500}};

  const auto text = emit_report(r, ReportFormat::kJson);
  CHECK(report_from_json(nlohmann::json::parse(text)) == r);

  const auto bare = make_report(y, p);
  CHECK(report_from_json(to_json(bare)) == bare);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"version", 1}}), FormatError);
}

TEST_CASE("report CSV") {
  auto r = make_report(std::vector<std::uint8_t>{0, 0, 1, 1}, std::vector<std::uint8_t>{0, 0, 0, 0});
  auto csv = emit_report(r, ReportFormat::kCsv);
  CHECK(csv == std::string(kReportCsvHeader) + "\n50.00,33.33,66.67,0.00,0,0,2,2,,\n");
  r.avg_exit_layer = 9.75;
  r.speedup = 12.0 / 9.75;
  csv = emit_report(r, ReportFormat::kCsv);
  CHECK(csv.find(",9.75,1.2308\n") != std::string::npos);
  CHECK(parse_report_format("csv") == ReportFormat::kCsv);
  CHECK_THROWS_AS(parse_report_format("xml"), ValidationError);
}

TEST_CASE("plot CSVs") {
  const SweepPoint pts[] = {{0.0, 0.5, 1.0}, {0.025, 0.75, 2.5}};
  CHECK(sweep_csv(pts) == "delta,macro_f1,avg_exit\n0.0000,50.00,1.0000\n0.0250,75.00,2.5000\n");
  const double props[] = {0.25, 0.75};
  CHECK(histogram_csv(props) == "layer,proportion\n1,0.250000\n2,0.750000\n");
  const TransferCell cells[] = {{"a", "a", 0.8, 0.9, 1.0}, {"a", "b", 0.6, 0.7, std::nullopt}};
  CHECK(transfer_csv(cells) ==
        "source,target,accuracy,macro_f1,relative_f1\na,a,90.00,80.00,1.0000\na,b,70.00,60.00,\n");
  CHECK(to_json(std::span<const TransferCell>(cells))[1]["relative_f1"].is_null());
}
