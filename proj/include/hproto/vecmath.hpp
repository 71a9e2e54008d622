// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

namespace hproto {

inline constexpr double kDegenerateNorm = 1e-12;

// Float64 accumulation throughout.
double dot(std::span<const float> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const float> v);
double l2_norm(std::span<const double> v);

// Throws DegenerateVectorError when the norm is below kDegenerateNorm.
std::vector<double> l2_normalize(std::span<const float> v);
std::vector<double> l2_normalize(std::span<const double> v);

}  // namespace hproto
