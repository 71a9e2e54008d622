// SPDX-License-Identifier: Apache-2.0
#include <omp.h>

#include <algorithm>

#include "hproto/error.hpp"
#include "hproto/kernels.hpp"
#include "omp_util.hpp"
#include "probe_impl.hpp"

namespace hproto::kernels::omp {

// Threads own disjoint dimension blocks and each walks the samples in order,
// so every coordinate is summed exactly as in the serial kernel.
std::vector<double> mean_vector(const EmbeddingBank& bank, std::span<const std::size_t> indices,
                                std::uint32_t layer) {
  if (indices.empty()) throw ValidationError("mean of zero vectors");
  const std::uint32_t d = bank.dim();
  const std::size_t offset = std::size_t(layer - 1) * d;
  std::vector<double> sum(d, 0.0);
  constexpr std::int64_t kBlock = 64;
  const std::int64_t blocks = (d + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min<std::size_t>(d, lo + kBlock);
    for (std::size_t idx : indices) {
      const float* h = bank.records[idx].vectors.data() + offset;
      for (std::size_t j = lo; j < hi; ++j) sum[j] += h[j];
    }
  }
  for (auto& v : sum) v /= static_cast<double>(indices.size());
  return sum;
}

std::vector<std::uint8_t> predict_layer(const EmbeddingBank& bank, const PrototypeBank& protos,
                                        std::uint32_t layer) {
  std::vector<std::uint8_t> out(bank.size());
  detail::parallel_for(bank.size(), [&](std::size_t i) {
    out[i] = static_cast<std::uint8_t>(
        classify_at_layer(bank.records[i].layer(layer, bank.dim()), protos, layer));
  });
  return out;
}

PrototypeTrace prototype_trace(const EmbeddingBank& bank, const PrototypeBank& protos,
                               std::uint32_t min_layer) {
  PrototypeTrace t;
  t.first_layer = min_layer;
  t.num_layers = bank.num_layers() - min_layer + 1;
  t.num_samples = bank.size();
  t.labels.resize(t.num_samples * t.num_layers);
  t.margins.resize(t.num_samples * t.num_layers);
  detail::parallel_for(bank.size(), [&](std::size_t i) {
    for (std::uint32_t layer = min_layer; layer <= bank.num_layers(); ++layer) {
      const auto s = similarity_scores(bank.records[i].layer(layer, bank.dim()), protos, layer);
      t.labels[t.at(i, layer)] = static_cast<std::uint8_t>(argmax(s));
      t.margins[t.at(i, layer)] = margin(s);
    }
  });
  return t;
}

std::vector<ExitOutcome> run_policy(const EmbeddingBank& bank, const PolicyResources& res,
                                    const ExitPolicy& policy, const RunOptions& opts) {
  check_policy(res, policy, bank.num_layers(), bank.dim());
  std::vector<ExitOutcome> out(bank.size());
  detail::parallel_for(bank.size(), [&](std::size_t i) {
    out[i] = apply_policy(bank.records[i], res, policy, opts);
  });
  return out;
}

std::vector<LinearProbe> train_probes(const EmbeddingBank& train,
                                      std::span<const std::uint32_t> layers,
                                      const ProbeHyperparams& hyper) {
  std::vector<LinearProbe> out(layers.size());
  detail::parallel_for(layers.size(), [&](std::size_t i) {
    out[i] = detail::train_probe_on(train, layers[i], hyper, nullptr);
  });
  return out;
}

}  // namespace hproto::kernels::omp
