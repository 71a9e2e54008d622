// SPDX-License-Identifier: Apache-2.0
#include "hproto/error.hpp"
#include "hproto/kernels.hpp"
#include "probe_impl.hpp"

namespace hproto::kernels::serial {

std::vector<double> mean_vector(const EmbeddingBank& bank, std::span<const std::size_t> indices,
                                std::uint32_t layer) {
  if (indices.empty()) throw ValidationError("mean of zero vectors");
  const std::uint32_t d = bank.dim();
  std::vector<double> sum(d, 0.0);
  for (std::size_t idx : indices) {
    const auto h = bank.records[idx].layer(layer, d);
    for (std::uint32_t j = 0; j < d; ++j) sum[j] += h[j];
  }
  for (auto& v : sum) v /= static_cast<double>(indices.size());
  return sum;
}

std::vector<std::uint8_t> predict_layer(const EmbeddingBank& bank, const PrototypeBank& protos,
                                        std::uint32_t layer) {
  std::vector<std::uint8_t> out(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i)
    out[i] = static_cast<std::uint8_t>(
        classify_at_layer(bank.records[i].layer(layer, bank.dim()), protos, layer));
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
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::uint32_t layer = min_layer; layer <= bank.num_layers(); ++layer) {
      const auto s = similarity_scores(bank.records[i].layer(layer, bank.dim()), protos, layer);
      t.labels[t.at(i, layer)] = static_cast<std::uint8_t>(argmax(s));
      t.margins[t.at(i, layer)] = margin(s);
    }
  }
  return t;
}

std::vector<ExitOutcome> run_policy(const EmbeddingBank& bank, const PolicyResources& res,
                                    const ExitPolicy& policy, const RunOptions& opts) {
  check_policy(res, policy, bank.num_layers(), bank.dim());
  std::vector<ExitOutcome> out(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i)
    out[i] = apply_policy(bank.records[i], res, policy, opts);
  return out;
}

std::vector<LinearProbe> train_probes(const EmbeddingBank& train,
                                      std::span<const std::uint32_t> layers,
                                      const ProbeHyperparams& hyper) {
  std::vector<LinearProbe> out;
  for (std::uint32_t layer : layers)
    out.push_back(detail::train_probe_on(train, layer, hyper, nullptr));
  return out;
}

}  // namespace hproto::kernels::serial
