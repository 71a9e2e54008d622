// SPDX-License-Identifier: Apache-2.0
#include "hproto/metrics.hpp"

#include <cmath>
#include <limits>

#include "hproto/error.hpp"
#include "hproto/stats.hpp"

namespace hproto {
namespace {

double f1(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  const std::uint64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

ConfusionCounts confusion(std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> predictions) {
  if (labels.size() != predictions.size())
    throw ValidationError("labels and predictions differ in length (" +
                          std::to_string(labels.size()) + " vs " +
                          std::to_string(predictions.size()) + ")");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1 || predictions[i] > 1) throw ValidationError("class value not in {0,1}");
    if (labels[i] == 1)
      predictions[i] == 1 ? ++c.tp : ++c.fn;
    else
      predictions[i] == 1 ? ++c.fp : ++c.tn;
  }
  return c;
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw ValidationError("accuracy of zero samples");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

std::array<double, 2> per_class_f1(const ConfusionCounts& c) {
  // Class 0 as positive swaps the roles of tp/tn and fp/fn.
  return {f1(c.tn, c.fn, c.fp), f1(c.tp, c.fp, c.fn)};
}

double macro_f1(const ConfusionCounts& c) {
  const auto f = per_class_f1(c);
  return (f[0] + f[1]) / 2.0;
}

double relative_f1(double f1_cross, double f1_in_domain) {
  if (!(f1_in_domain > 0.0)) throw ValidationError("relative F1 with a zero in-domain F1");
  return f1_cross / f1_in_domain;
}

std::map<std::string, double> grouped_accuracy(
    std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predictions,
    std::span<const std::optional<std::string>> categories) {
  if (labels.size() != predictions.size() || labels.size() != categories.size())
    throw ValidationError("grouped accuracy inputs differ in length");
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> tally;  // correct, total
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& t = tally[categories[i].value_or(kUncategorized)];
    t.first += labels[i] == predictions[i];
    ++t.second;
  }
  std::map<std::string, double> out;
  for (const auto& [cat, t] : tally)
    out[cat] = static_cast<double>(t.first) / static_cast<double>(t.second);
  return out;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired t-test needs equal-length samples");
  const std::size_t n = a.size();
  if (n < 2) throw ValidationError("paired t-test needs at least 2 pairs");

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = (a[i] - b[i]) - mean;
    ss += dev * dev;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.n = n;
  if (sd == 0.0) {
    if (mean == 0.0) return r;  // t = 0, p = 1
    r.t = mean > 0 ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_sided_p(r.t, static_cast<double>(n - 1));
  return r;
}

}  // namespace hproto
