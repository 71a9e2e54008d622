// SPDX-License-Identifier: Apache-2.0
//
// Layer-by-layer exit simulation. A sample walks layers min_layer..L and stops
// at the first layer whose exit test fires; if none does it runs to L and
// takes the final layer's prediction.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hproto/bank.hpp"
#include "hproto/probe.hpp"
#include "hproto/prototypes.hpp"

namespace hproto {

inline constexpr double kDefaultTau = 0.3;
inline constexpr std::uint32_t kDefaultPatience = 2;

// Exit when the prototype similarity gap reaches delta (>=).
struct MarginRule {
  double delta = 0.0;
};
// Exit when probe predictive entropy drops strictly below tau.
struct EntropyRule {
  double tau = kDefaultTau;
};
// Exit once `patience` consecutive probe predictions agree.
struct PatienceRule {
  std::uint32_t patience = kDefaultPatience;
};
// Always classify with prototypes at one layer.
struct FixedLayerRule {
  std::uint32_t layer = 1;
};

struct ExitPolicy {
  std::variant<MarginRule, EntropyRule, PatienceRule, FixedLayerRule> rule;
  std::uint32_t min_layer = 1;

  static ExitPolicy margin(double delta) { return {MarginRule{delta}}; }
  static ExitPolicy entropy(double tau) { return {EntropyRule{tau}}; }
  static ExitPolicy patience(std::uint32_t t) { return {PatienceRule{t}}; }
  static ExitPolicy fixed_layer(std::uint32_t layer) { return {FixedLayerRule{layer}}; }

  bool uses_probes() const {
    return std::holds_alternative<EntropyRule>(rule) || std::holds_alternative<PatienceRule>(rule);
  }
  std::string name() const;
};

struct ExitOutcome {
  std::uint64_t sample_id = 0;
  std::uint8_t label = 0;
  std::uint32_t exit_layer = 0;
  bool exited_early = false;           // exit_layer < L
  std::vector<double> per_layer_margins;  // only with keep_margins

  bool operator==(const ExitOutcome&) const = default;
};

struct PolicyResources {
  const PrototypeBank* protos = nullptr;
  const ProbeSet* probes = nullptr;
};

struct RunOptions {
  bool keep_margins = false;
};

ExitOutcome margin_exit(const SampleRecord& sample, const PrototypeBank& protos, double delta,
                        std::uint32_t min_layer = 1, bool keep_margins = false);
ExitOutcome entropy_exit(const SampleRecord& sample, const ProbeSet& probes, double tau,
                         std::uint32_t min_layer = 1);
ExitOutcome patience_exit(const SampleRecord& sample, const ProbeSet& probes,
                          std::uint32_t patience, std::uint32_t min_layer = 1);
ExitOutcome fixed_layer_exit(const SampleRecord& sample, const PrototypeBank& protos,
                             std::uint32_t layer);

// Applies one policy to one sample. Throws ValidationError if the policy's
// resources are missing or its parameters are out of range.
ExitOutcome apply_policy(const SampleRecord& sample, const PolicyResources& res,
                         const ExitPolicy& policy, const RunOptions& opts = {});
void check_policy(const PolicyResources& res, const ExitPolicy& policy, std::uint32_t num_layers,
                  std::uint32_t dim);

// One outcome per sample, in bank order.
std::vector<ExitOutcome> run_policy(const EmbeddingBank& bank, const PolicyResources& res,
                                    const ExitPolicy& policy, const RunOptions& opts = {});

std::vector<std::uint8_t> predicted_labels(std::span<const ExitOutcome> outcomes);
double average_exit_layer(std::span<const ExitOutcome> outcomes);
double speedup(std::uint32_t num_layers, double avg_exit_layer);
// Proportion of samples exiting at each layer; index 0 is layer 1.
std::vector<double> exit_histogram(std::span<const ExitOutcome> outcomes, std::uint32_t num_layers);

struct SweepPoint {
  double delta = 0.0;
  double macro_f1 = 0.0;
  double avg_exit = 0.0;
};

// Margin policy evaluated at every delta of an ascending grid.
std::vector<SweepPoint> delta_sweep(const EmbeddingBank& bank, const PrototypeBank& protos,
                                    std::span<const double> deltas, std::uint32_t min_layer = 1);

// "start:stop:step", stop inclusive. A single number is a one-point grid.
std::vector<double> parse_grid(const std::string& spec);
std::vector<double> default_delta_grid();

}  // namespace hproto
