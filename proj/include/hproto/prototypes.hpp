// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hproto/bank.hpp"
#include "json.hpp"

namespace hproto {

inline constexpr int kNumClasses = 2;
inline constexpr std::uint64_t kDefaultPerClass = 500;
inline constexpr int kPrototypeFormatVersion = 1;

struct PrototypeInfo {
  std::uint32_t num_layers = 0;
  std::uint32_t dim = 0;
  std::optional<std::uint64_t> per_class;  // nullopt: every train sample
  std::array<std::uint64_t, kNumClasses> effective_counts{};
  std::uint64_t seed = 0;
  std::string source;

  bool operator==(const PrototypeInfo&) const = default;
};

// Per-class, per-layer raw mean vectors, with their unit-norm counterparts
// cached for scoring. Immutable after construction.
class PrototypeBank {
 public:
  using LayerMeans = std::vector<std::vector<double>>;  // indexed like layers()

  PrototypeBank(PrototypeInfo info, std::vector<std::uint32_t> layers,
                std::array<LayerMeans, kNumClasses> means);

  const PrototypeInfo& info() const { return info_; }
  std::uint32_t num_layers() const { return info_.num_layers; }
  std::uint32_t dim() const { return info_.dim; }
  const std::vector<std::uint32_t>& layers() const { return layers_; }
  bool has_layer(std::uint32_t layer) const;

  std::span<const double> mean(int cls, std::uint32_t layer) const;
  // Throws DegenerateVectorError if the mean has (near) zero norm.
  std::span<const double> unit(int cls, std::uint32_t layer) const;

  bool operator==(const PrototypeBank& o) const {
    return info_ == o.info_ && layers_ == o.layers_ && means_ == o.means_;
  }

 private:
  std::size_t slot(std::uint32_t layer) const;

  PrototypeInfo info_;
  std::vector<std::uint32_t> layers_;
  std::array<LayerMeans, kNumClasses> means_;
  std::array<LayerMeans, kNumClasses> units_;  // empty entry = degenerate mean
};

struct SimilarityScores {
  std::array<double, kNumClasses> s{};
  std::uint32_t layer = 0;
};

// Indices (into bank.records) of the first min(k, |class|) samples of a
// seeded permutation of the class. Each class has its own stream, and a
// larger k extends the selection of a smaller one.
std::vector<std::size_t> sample_class_indices(const EmbeddingBank& bank, int cls,
                                              std::optional<std::uint64_t> k,
                                              std::uint64_t seed);

// Builds prototypes from the bank's train split. `layers` empty means 1..L.
// Throws ValidationError if a class has no train samples.
PrototypeBank build_prototypes(const EmbeddingBank& bank, std::span<const std::uint32_t> layers,
                               std::optional<std::uint64_t> per_class, std::uint64_t seed,
                               std::string source = {});

SimilarityScores similarity_scores(std::span<const float> h, const PrototypeBank& protos,
                                   std::uint32_t layer);

// Highest score wins; exact ties go to class 0.
int argmax(const SimilarityScores& scores);
int classify_at_layer(std::span<const float> h, const PrototypeBank& protos, std::uint32_t layer);

// Gap between the largest and second-largest score.
double margin(const SimilarityScores& scores);

nlohmann::json to_json(const PrototypeBank& protos);
PrototypeBank prototypes_from_json(const nlohmann::json& j);
void save_prototypes(const PrototypeBank& protos, const std::filesystem::path& path);
PrototypeBank load_prototypes(const std::filesystem::path& path);

}  // namespace hproto
