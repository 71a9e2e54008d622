// SPDX-License-Identifier: Apache-2.0
//
// Synthetic banks for tests, demos and benchmarks.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hproto/bank.hpp"

namespace hproto::synth {

// Two isotropic Gaussian classes per layer, centred at -/+ (sep/2) * sigma * u_l
// (plus a shared offset) for a random unit direction u_l per layer. The
// separation ramps linearly from sep/L at layer 1 to `separation` at layer L
// unless `layer_separation` is given.
struct GaussianSpec {
  std::uint32_t num_layers = 4;
  std::uint32_t dim = 32;
  std::uint64_t train_per_class = 500;
  std::uint64_t test_per_class = 500;
  double sigma = 1.0;
  double separation = 6.0;  // in units of sigma, at the last layer
  std::vector<double> layer_separation;
  double offset_norm = 0.0;
  bool swap_classes = false;
  std::vector<std::string> categories;  // assigned round-robin when non-empty
  std::string source;
  std::uint64_t seed = 0;
  std::uint64_t first_id = 0;
};

EmbeddingBank gaussian_bank(const GaussianSpec& spec);

// Small bank with random per-class centres, both classes present in the
// train split, and a sidecar with a train/test split.
struct RandomSpec {
  std::uint64_t max_samples = 200;
  std::uint32_t max_dim = 16;
  std::uint32_t max_layers = 4;
  std::uint64_t seed = 0;
};

EmbeddingBank random_bank(const RandomSpec& spec);

}  // namespace hproto::synth
