// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace hproto {

// Class 1 (hate) is the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> predictions);

double accuracy(const ConfusionCounts& c);
// F1 per class, 0 for a class that is neither predicted nor present.
std::array<double, 2> per_class_f1(const ConfusionCounts& c);
double macro_f1(const ConfusionCounts& c);

// F1(X | proto(Y)) / F1(X | proto(X)). Throws ValidationError on a zero
// denominator.
double relative_f1(double f1_cross, double f1_in_domain);

inline constexpr const char* kUncategorized = "other";

// Accuracy per category; samples without one are grouped under "other".
std::map<std::string, double> grouped_accuracy(
    std::span<const std::uint8_t> labels, std::span<const std::uint8_t> predictions,
    std::span<const std::optional<std::string>> categories);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

// Two-sided paired t-test on a - b with n - 1 degrees of freedom.
// All-zero differences give t = 0, p = 1; zero variance with a nonzero mean
// gives t = +-inf, p = 0. Throws ValidationError for n < 2 or unequal lengths.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace hproto
