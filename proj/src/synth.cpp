// SPDX-License-Identifier: Apache-2.0
#include "hproto/synth.hpp"

#include <cmath>
#include <random>

#include "hproto/error.hpp"
#include "hproto/rng.hpp"

namespace hproto::synth {
namespace {

std::vector<double> random_unit(std::mt19937_64& rng, std::uint32_t dim) {
  std::normal_distribution<double> normal;
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      n2 += x * x;
    }
  } while (n2 < 1e-12);
  for (auto& x : v) x /= std::sqrt(n2);
  return v;
}

}  // namespace

EmbeddingBank gaussian_bank(const GaussianSpec& spec) {
  if (spec.num_layers < 1 || spec.dim < 1)
    throw ValidationError("synthetic bank needs at least one layer and one dimension");
  if (!spec.layer_separation.empty() && spec.layer_separation.size() != spec.num_layers)
    throw ValidationError("layer_separation must have one entry per layer");

  const std::uint32_t L = spec.num_layers, d = spec.dim;
  std::mt19937_64 dir_rng(derive_seed(spec.seed, 0));
  std::vector<std::vector<double>> dirs, offsets;
  std::vector<double> seps;
  for (std::uint32_t l = 1; l <= L; ++l) {
    dirs.push_back(random_unit(dir_rng, d));
    offsets.push_back(random_unit(dir_rng, d));
    for (auto& x : offsets.back()) x *= spec.offset_norm;
    seps.push_back(spec.layer_separation.empty() ? spec.separation * l / L
                                                 : spec.layer_separation[l - 1]);
  }

  EmbeddingBank bank;
  bank.header.num_layers = L;
  bank.header.hidden_dim = d;
  std::mt19937_64 rng(derive_seed(spec.seed, 1));
  std::normal_distribution<double> normal;
  std::uint64_t id = spec.first_id;
  std::size_t cat = 0;

  auto emit = [&](Split split, std::uint64_t per_class) {
    for (std::uint64_t i = 0; i < per_class; ++i) {
      for (std::uint8_t label = 0; label < 2; ++label) {
        SampleRecord r;
        r.sample_id = id++;
        r.label = label;
        r.vectors.resize(std::size_t(L) * d);
        double sign = label == 1 ? 1.0 : -1.0;
        if (spec.swap_classes) sign = -sign;
        for (std::uint32_t l = 0; l < L; ++l) {
          const double shift = sign * 0.5 * seps[l] * spec.sigma;
          for (std::uint32_t j = 0; j < d; ++j)
            r.vectors[std::size_t(l) * d + j] = static_cast<float>(
                offsets[l][j] + shift * dirs[l][j] + spec.sigma * normal(rng));
        }
        SampleMeta m;
        m.sample_id = r.sample_id;
        m.split = split;
        if (!spec.categories.empty()) m.category = spec.categories[cat++ % spec.categories.size()];
        if (!spec.source.empty()) m.source = spec.source;
        bank.meta.emplace(r.sample_id, std::move(m));
        bank.records.push_back(std::move(r));
      }
    }
  };
  emit(Split::kTrain, spec.train_per_class);
  emit(Split::kTest, spec.test_per_class);
  bank.header.num_samples = bank.records.size();
  return bank;
}

EmbeddingBank random_bank(const RandomSpec& spec) {
  std::mt19937_64 rng(derive_seed(spec.seed, 2));
  std::normal_distribution<double> normal;
  const auto L = static_cast<std::uint32_t>(1 + uniform_below(rng, spec.max_layers));
  const auto d = static_cast<std::uint32_t>(1 + uniform_below(rng, spec.max_dim));
  const std::uint64_t n = 4 + uniform_below(rng, spec.max_samples - 3);

  std::vector<std::vector<double>> centres(2 * L);
  for (auto& c : centres) {
    c.resize(d);
    for (auto& x : c) x = 2.0 * normal(rng);
  }

  EmbeddingBank bank;
  bank.header.num_layers = L;
  bank.header.hidden_dim = d;
  for (std::uint64_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.sample_id = 1000 + 7 * i;
    // First two samples pin one train example per class.
    r.label = i < 2 ? static_cast<std::uint8_t>(i) : static_cast<std::uint8_t>(rng() & 1);
    r.vectors.resize(std::size_t(L) * d);
    for (std::uint32_t l = 0; l < L; ++l) {
      const auto& c = centres[2 * l + r.label];
      for (std::uint32_t j = 0; j < d; ++j)
        r.vectors[std::size_t(l) * d + j] = static_cast<float>(c[j] + normal(rng));
    }
    SampleMeta m;
    m.sample_id = r.sample_id;
    m.split = (i < 2 || uniform_below(rng, 10) < 7) ? Split::kTrain : Split::kTest;
    bank.meta.emplace(r.sample_id, m);
    bank.records.push_back(std::move(r));
  }
  bank.header.num_samples = bank.records.size();
  return bank;
}

}  // namespace hproto::synth
