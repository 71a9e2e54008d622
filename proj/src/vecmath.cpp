// SPDX-License-Identifier: Apache-2.0
#include "hproto/vecmath.hpp"

#include <cmath>
#include <string>

#include "hproto/error.hpp"

namespace hproto {
namespace {

template <typename T>
double sum_squares(std::span<const T> v) {
  double acc = 0.0;
  for (T x : v) acc += double(x) * double(x);
  return acc;
}

template <typename T>
std::vector<double> normalize(std::span<const T> v) {
  const double n = std::sqrt(sum_squares(v));
  if (!(n >= kDegenerateNorm))
    throw DegenerateVectorError("degenerate vector: norm " + std::to_string(n) + " below 1e-12");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = double(v[i]) / n;
  return out;
}

}  // namespace

double dot(std::span<const float> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * b[i];
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const float> v) { return std::sqrt(sum_squares(v)); }
double l2_norm(std::span<const double> v) { return std::sqrt(sum_squares(v)); }

std::vector<double> l2_normalize(std::span<const float> v) { return normalize(v); }
std::vector<double> l2_normalize(std::span<const double> v) { return normalize(v); }

}  // namespace hproto
