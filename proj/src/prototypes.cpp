// SPDX-License-Identifier: Apache-2.0
#include "hproto/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "hproto/error.hpp"
#include "hproto/kernels.hpp"
#include "hproto/rng.hpp"
#include "hproto/vecmath.hpp"
#include "prototypes_impl.hpp"

namespace hproto {

PrototypeBank::PrototypeBank(PrototypeInfo info, std::vector<std::uint32_t> layers,
                             std::array<LayerMeans, kNumClasses> means)
    : info_(std::move(info)), layers_(std::move(layers)), means_(std::move(means)) {
  if (info_.num_layers < 1 || info_.dim < 1)
    throw ValidationError("prototype bank needs at least one layer and one dimension");
  if (layers_.empty()) throw ValidationError("prototype bank has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i] < 1 || layers_[i] > info_.num_layers)
      throw ValidationError("prototype layer " + std::to_string(layers_[i]) + " outside 1.." +
                            std::to_string(info_.num_layers));
    if (i > 0 && layers_[i] <= layers_[i - 1])
      throw ValidationError("prototype layers must be strictly ascending");
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (means_[c].size() != layers_.size())
      throw ValidationError("class " + std::to_string(c) + " is missing layers");
    units_[c].resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& m = means_[c][i];
      if (m.size() != info_.dim)
        throw ValidationError("prototype of class " + std::to_string(c) + " at layer " +
                              std::to_string(layers_[i]) + " has wrong dimension");
      for (double x : m)
        if (!std::isfinite(x)) throw ValidationError("non-finite prototype value");
      if (l2_norm(std::span<const double>(m)) >= kDegenerateNorm)
        units_[c][i] = l2_normalize(std::span<const double>(m));
    }
  }
}

bool PrototypeBank::has_layer(std::uint32_t layer) const {
  return std::binary_search(layers_.begin(), layers_.end(), layer);
}

std::size_t PrototypeBank::slot(std::uint32_t layer) const {
  auto it = std::lower_bound(layers_.begin(), layers_.end(), layer);
  if (it == layers_.end() || *it != layer)
    throw ValidationError("no prototypes for layer " + std::to_string(layer));
  return static_cast<std::size_t>(it - layers_.begin());
}

std::span<const double> PrototypeBank::mean(int cls, std::uint32_t layer) const {
  return means_.at(cls)[slot(layer)];
}

std::span<const double> PrototypeBank::unit(int cls, std::uint32_t layer) const {
  const auto& u = units_.at(cls)[slot(layer)];
  if (u.empty())
    throw DegenerateVectorError("degenerate prototype for class " + std::to_string(cls) +
                                " at layer " + std::to_string(layer));
  return u;
}

std::vector<std::size_t> sample_class_indices(const EmbeddingBank& bank, int cls,
                                              std::optional<std::uint64_t> k,
                                              std::uint64_t seed) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < bank.records.size(); ++i)
    if (bank.records[i].label == cls) members.push_back(i);
  if (k && *k == 0) throw ValidationError("per-class sample count must be at least 1");
  if (!k || *k >= members.size()) return members;

  // Partial Fisher-Yates: the first k positions of a full seeded shuffle.
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
  for (std::size_t i = 0; i < *k; ++i) {
    const std::size_t j = i + uniform_below(rng, members.size() - i);
    std::swap(members[i], members[j]);
  }
  members.resize(*k);
  return members;
}

namespace detail {

PrototypeBank build_prototypes_on(const EmbeddingBank& train, std::span<const std::uint32_t> layers,
                                  std::optional<std::uint64_t> per_class, std::uint64_t seed,
                                  std::string source) {
  const std::uint32_t L = train.num_layers();

  std::vector<std::uint32_t> use(layers.begin(), layers.end());
  if (use.empty()) {
    use.resize(L);
    std::iota(use.begin(), use.end(), 1u);
  }
  std::sort(use.begin(), use.end());
  use.erase(std::unique(use.begin(), use.end()), use.end());

  PrototypeInfo info;
  info.num_layers = L;
  info.dim = train.dim();
  info.per_class = per_class;
  info.seed = seed;
  info.source = std::move(source);

  std::array<PrototypeBank::LayerMeans, kNumClasses> means;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto idx = sample_class_indices(train, c, per_class, seed);
    if (idx.empty())
      throw ValidationError("class " + std::to_string(c) + " has no train samples");
    info.effective_counts[c] = idx.size();
    for (std::uint32_t layer : use) {
      if (layer < 1 || layer > L)
        throw ValidationError("layer " + std::to_string(layer) + " outside 1.." +
                              std::to_string(L));
      means[c].push_back(kernels::omp::mean_vector(train, idx, layer));
    }
  }
  return PrototypeBank(std::move(info), std::move(use), std::move(means));
}

}  // namespace detail

PrototypeBank build_prototypes(const EmbeddingBank& bank, std::span<const std::uint32_t> layers,
                               std::optional<std::uint64_t> per_class, std::uint64_t seed,
                               std::string source) {
  return detail::build_prototypes_on(split_subset(bank, Split::kTrain), layers, per_class, seed,
                                     std::move(source));
}

SimilarityScores similarity_scores(std::span<const float> h, const PrototypeBank& protos,
                                   std::uint32_t layer) {
  if (h.size() != protos.dim())
    throw ValidationError("vector has dimension " + std::to_string(h.size()) + ", prototypes " +
                          std::to_string(protos.dim()));
  const double n = l2_norm(h);
  if (!(n >= kDegenerateNorm))
    throw DegenerateVectorError("degenerate hidden state at layer " + std::to_string(layer));
  SimilarityScores out;
  out.layer = layer;
  for (int c = 0; c < kNumClasses; ++c) out.s[c] = dot(h, protos.unit(c, layer)) / n;
  return out;
}

int argmax(const SimilarityScores& scores) { return scores.s[1] > scores.s[0] ? 1 : 0; }

int classify_at_layer(std::span<const float> h, const PrototypeBank& protos, std::uint32_t layer) {
  return argmax(similarity_scores(h, protos, layer));
}

double margin(const SimilarityScores& scores) {
  const auto [lo, hi] = std::minmax(scores.s[0], scores.s[1]);
  return hi - lo;
}

nlohmann::json to_json(const PrototypeBank& protos) {
  const auto& info = protos.info();
  nlohmann::json j;
  j["version"] = kPrototypeFormatVersion;
  j["L"] = info.num_layers;
  j["d"] = info.dim;
  j["per_class"] = info.per_class ? nlohmann::json(*info.per_class) : nlohmann::json("all");
  j["effective_counts"] = {{"0", info.effective_counts[0]}, {"1", info.effective_counts[1]}};
  j["seed"] = info.seed;
  j["source"] = info.source;
  j["layers"] = protos.layers();
  nlohmann::json means = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::uint32_t layer : protos.layers()) {
      auto m = protos.mean(c, layer);
      rows.push_back(std::vector<double>(m.begin(), m.end()));
    }
    means[std::to_string(c)] = std::move(rows);
  }
  j["means"] = std::move(means);
  return j;
}

PrototypeBank prototypes_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kPrototypeFormatVersion)
      throw FormatError("unsupported prototype format version");
    PrototypeInfo info;
    info.num_layers = j.at("L").get<std::uint32_t>();
    info.dim = j.at("d").get<std::uint32_t>();
    const auto& pc = j.at("per_class");
    if (pc.is_string()) {
      if (pc.get<std::string>() != "all") throw FormatError("per_class must be a count or \"all\"");
    } else {
      info.per_class = pc.get<std::uint64_t>();
    }
    info.effective_counts[0] = j.at("effective_counts").at("0").get<std::uint64_t>();
    info.effective_counts[1] = j.at("effective_counts").at("1").get<std::uint64_t>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.source = j.at("source").get<std::string>();

    std::vector<std::uint32_t> layers;
    if (j.contains("layers")) {
      layers = j["layers"].get<std::vector<std::uint32_t>>();
    } else {
      layers.resize(info.num_layers);
      std::iota(layers.begin(), layers.end(), 1u);
    }
    std::array<PrototypeBank::LayerMeans, kNumClasses> means;
    for (int c = 0; c < kNumClasses; ++c)
      means[c] = j.at("means").at(std::to_string(c)).get<PrototypeBank::LayerMeans>();
    return PrototypeBank(std::move(info), std::move(layers), std::move(means));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad prototype document: ") + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(std::string("bad prototype document: ") + e.what());
  }
}

void save_prototypes(const PrototypeBank& protos, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << to_json(protos).dump() << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

PrototypeBank load_prototypes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open prototypes " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse " + path.string() + ": " + e.what());
  }
  return prototypes_from_json(j);
}

}  // namespace hproto
