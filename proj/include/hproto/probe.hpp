// SPDX-License-Identifier: Apache-2.0
//
// Per-layer linear classifier heads trained on frozen bank embeddings. These
// back the entropy and patience exit baselines.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "hproto/bank.hpp"
#include "json.hpp"

namespace hproto {

inline constexpr int kProbeFormatVersion = 1;

struct ProbeHyperparams {
  std::uint32_t epochs = 200;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const ProbeHyperparams&) const = default;
};

struct LinearProbe {
  std::uint32_t layer = 0;
  std::array<std::vector<double>, 2> weights;  // one row of length d per class
  std::array<double, 2> bias{};
  std::array<double, 2> class_weights{1.0, 1.0};
  ProbeHyperparams hyper;
  double final_loss = 0.0;

  std::uint32_t dim() const { return static_cast<std::uint32_t>(weights[0].size()); }
  bool operator==(const LinearProbe&) const = default;
};

struct ProbeSet {
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  ProbeHyperparams hyper;
  std::map<std::uint32_t, LinearProbe> probes;

  // Throws ValidationError when no probe exists for `layer`.
  const LinearProbe& at(std::uint32_t layer) const;
  bool operator==(const ProbeSet&) const = default;
};

// w_c = N / (2 N_c), so both classes carry equal total weight and the
// weights average to 1. Throws ValidationError if a class is missing.
std::array<double, 2> class_ratio_weights(std::span<const std::uint8_t> labels);

// Class-weighted cross-entropy, normalised by the total weight.
double weighted_ce_loss(const EmbeddingBank& train, const LinearProbe& probe);

// Full-batch gradient descent from zero initialisation. When `loss_trace` is
// given it receives the loss before each epoch plus the final loss.
LinearProbe train_probe(const EmbeddingBank& train, std::uint32_t layer,
                        const ProbeHyperparams& hyper,
                        std::vector<double>* loss_trace = nullptr);

// One probe per layer (all layers when `layers` is empty), trained in parallel.
ProbeSet train_probes(const EmbeddingBank& train, std::span<const std::uint32_t> layers,
                      const ProbeHyperparams& hyper);

std::array<double, 2> probe_logits(const LinearProbe& probe, std::span<const float> h);
int probe_predict(const LinearProbe& probe, std::span<const float> h);

// Entropy of softmax(logits) in nats.
double softmax_entropy(std::span<const double> logits);

nlohmann::json to_json(const ProbeSet& probes);
ProbeSet probes_from_json(const nlohmann::json& j);
void save_probes(const ProbeSet& probes, const std::filesystem::path& path);
ProbeSet load_probes(const std::filesystem::path& path);

}  // namespace hproto
