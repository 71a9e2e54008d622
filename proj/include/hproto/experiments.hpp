// SPDX-License-Identifier: Apache-2.0
//
// Experiment protocols over embedding banks: in-domain and cross-domain
// prototype evaluation, prototype sample-size selection, and seed ladders.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hproto/bank.hpp"
#include "hproto/metrics.hpp"
#include "hproto/prototypes.hpp"

namespace hproto {

inline constexpr std::uint32_t kDefaultRepeats = 100;
inline constexpr std::uint32_t kDefaultSeedCount = 10;

std::vector<std::uint64_t> default_selection_sizes();
// base, base + 1, ..., base + n - 1
std::vector<std::uint64_t> seed_ladder(std::uint64_t base_seed, std::uint32_t n);

struct PrototypeEval {
  std::vector<std::uint8_t> predictions;
  ConfusionCounts confusion;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Classifies every sample of `eval` at `layer` (default: L).
PrototypeEval evaluate_prototypes(const EmbeddingBank& eval, const PrototypeBank& protos,
                                  std::optional<std::uint32_t> layer = std::nullopt);

struct NamedBank {
  std::string name;
  const EmbeddingBank* bank = nullptr;
};

struct TransferCell {
  std::string proto_source;
  std::string eval_target;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::optional<double> relative_f1;
};

struct TransferOptions {
  std::optional<std::uint64_t> per_class = kDefaultPerClass;
  std::uint64_t seed = 0;
  std::optional<std::uint32_t> layer;  // default: L
};

// Prototypes from every source's train split evaluated on every target's
// test split. Row-major over (source, target); relative F1 uses the target's
// in-domain cell as denominator.
std::vector<TransferCell> transfer_matrix(std::span<const NamedBank> banks,
                                          const TransferOptions& opts = {});

struct SelectionResult {
  std::uint64_t size = 0;
  std::vector<double> f1;  // one per repeat
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single repeat
  double min = 0.0;
  double max = 0.0;
  bool clamped = false;  // size exceeded a class population
};

struct SelectionOptions {
  std::uint32_t repeats = kDefaultRepeats;
  std::uint64_t base_seed = 0;
  std::optional<std::uint32_t> layer;
};

// For each size, `repeats` prototype draws from the train split, each scored
// by macro-F1 on the test split. Repeat r uses the same derived seed for all
// sizes, so a larger size extends a smaller one.
std::vector<SelectionResult> selection_experiment(const EmbeddingBank& bank,
                                                  std::span<const std::uint64_t> sizes,
                                                  const SelectionOptions& opts = {});

}  // namespace hproto
