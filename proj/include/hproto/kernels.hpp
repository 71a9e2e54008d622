// SPDX-License-Identifier: Apache-2.0
//
// Batch kernels. `serial` is the reference; `omp` is what the library uses.
// Both produce bit-identical results: parallel loops only split independent
// work (samples, layers, dimensions), and every reduction runs in input order.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hproto/bank.hpp"
#include "hproto/exit.hpp"
#include "hproto/probe.hpp"
#include "hproto/prototypes.hpp"

namespace hproto::kernels {

// Per-sample prototype labels and margins at layers min_layer..L.
struct PrototypeTrace {
  std::uint32_t first_layer = 1;
  std::uint32_t num_layers = 0;  // layers covered
  std::size_t num_samples = 0;
  std::vector<std::uint8_t> labels;  // sample-major
  std::vector<double> margins;

  std::size_t at(std::size_t sample, std::uint32_t layer) const {
    return sample * num_layers + (layer - first_layer);
  }
};

namespace serial {

std::vector<double> mean_vector(const EmbeddingBank& bank, std::span<const std::size_t> indices,
                                std::uint32_t layer);
std::vector<std::uint8_t> predict_layer(const EmbeddingBank& bank, const PrototypeBank& protos,
                                        std::uint32_t layer);
PrototypeTrace prototype_trace(const EmbeddingBank& bank, const PrototypeBank& protos,
                               std::uint32_t min_layer);
std::vector<ExitOutcome> run_policy(const EmbeddingBank& bank, const PolicyResources& res,
                                    const ExitPolicy& policy, const RunOptions& opts);
std::vector<LinearProbe> train_probes(const EmbeddingBank& train,
                                      std::span<const std::uint32_t> layers,
                                      const ProbeHyperparams& hyper);

}  // namespace serial

namespace omp {

std::vector<double> mean_vector(const EmbeddingBank& bank, std::span<const std::size_t> indices,
                                std::uint32_t layer);
std::vector<std::uint8_t> predict_layer(const EmbeddingBank& bank, const PrototypeBank& protos,
                                        std::uint32_t layer);
PrototypeTrace prototype_trace(const EmbeddingBank& bank, const PrototypeBank& protos,
                               std::uint32_t min_layer);
std::vector<ExitOutcome> run_policy(const EmbeddingBank& bank, const PolicyResources& res,
                                    const ExitPolicy& policy, const RunOptions& opts);
std::vector<LinearProbe> train_probes(const EmbeddingBank& train,
                                      std::span<const std::uint32_t> layers,
                                      const ProbeHyperparams& hyper);

}  // namespace omp

}  // namespace hproto::kernels
