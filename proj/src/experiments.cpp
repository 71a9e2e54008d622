// SPDX-License-Identifier: Apache-2.0
#include "hproto/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hproto/error.hpp"
#include "hproto/kernels.hpp"
#include "hproto/rng.hpp"
#include "omp_util.hpp"
#include "prototypes_impl.hpp"

namespace hproto {
namespace {

std::vector<std::uint8_t> labels_of(const EmbeddingBank& bank) {
  std::vector<std::uint8_t> out;
  out.reserve(bank.size());
  for (const auto& r : bank.records) out.push_back(r.label);
  return out;
}

PrototypeEval score(const EmbeddingBank& eval, std::vector<std::uint8_t> preds) {
  PrototypeEval out;
  out.predictions = std::move(preds);
  out.confusion = confusion(labels_of(eval), out.predictions);
  out.accuracy = accuracy(out.confusion);
  out.macro_f1 = macro_f1(out.confusion);
  return out;
}

}  // namespace

std::vector<std::uint64_t> default_selection_sizes() { return {5, 10, 20, 50, 100, 200, 500}; }

std::vector<std::uint64_t> seed_ladder(std::uint64_t base_seed, std::uint32_t n) {
  std::vector<std::uint64_t> out(n);
  for (std::uint32_t i = 0; i < n; ++i) out[i] = base_seed + i;
  return out;
}

PrototypeEval evaluate_prototypes(const EmbeddingBank& eval, const PrototypeBank& protos,
                                  std::optional<std::uint32_t> layer) {
  if (eval.size() == 0) throw ValidationError("no samples to evaluate");
  const std::uint32_t l = layer.value_or(protos.num_layers());
  if (eval.num_layers() != protos.num_layers() || eval.dim() != protos.dim())
    throw ValidationError("bank and prototypes differ in layer count or dimension");
  return score(eval, kernels::omp::predict_layer(eval, protos, l));
}

std::vector<TransferCell> transfer_matrix(std::span<const NamedBank> banks,
                                          const TransferOptions& opts) {
  if (banks.empty()) throw ValidationError("transfer matrix needs at least one bank");
  const std::uint32_t L = banks[0].bank->num_layers();
  const std::uint32_t d = banks[0].bank->dim();
  for (const auto& nb : banks) {
    if (nb.bank->num_layers() != L || nb.bank->dim() != d)
      throw ValidationError("bank '" + nb.name + "' differs in layer count or dimension");
  }
  const std::uint32_t layer = opts.layer.value_or(L);
  const std::uint32_t layers[] = {layer};

  std::vector<PrototypeBank> protos;
  std::vector<EmbeddingBank> tests;
  for (const auto& nb : banks) {
    protos.push_back(build_prototypes(*nb.bank, layers, opts.per_class, opts.seed, nb.name));
    tests.push_back(split_subset(*nb.bank, Split::kTest));
  }

  std::vector<TransferCell> cells;
  for (std::size_t s = 0; s < banks.size(); ++s) {
    for (std::size_t t = 0; t < banks.size(); ++t) {
      const auto ev = evaluate_prototypes(tests[t], protos[s], layer);
      cells.push_back({banks[s].name, banks[t].name, ev.macro_f1, ev.accuracy, std::nullopt});
    }
  }
  const std::size_t n = banks.size();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      const double denom = cells[t * n + t].macro_f1;
      if (denom > 0.0) cells[s * n + t].relative_f1 = relative_f1(cells[s * n + t].macro_f1, denom);
    }
  }
  return cells;
}

std::vector<SelectionResult> selection_experiment(const EmbeddingBank& bank,
                                                  std::span<const std::uint64_t> sizes,
                                                  const SelectionOptions& opts) {
  if (sizes.empty()) throw ValidationError("no selection sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw ValidationError("selection sizes must be positive");
    if (i > 0 && sizes[i] <= sizes[i - 1])
      throw ValidationError("selection sizes must be ascending");
  }
  if (opts.repeats < 1) throw ValidationError("selection needs at least one repeat");

  const EmbeddingBank train = split_subset(bank, Split::kTrain);
  const EmbeddingBank test = split_subset(bank, Split::kTest);
  if (test.size() == 0) throw ValidationError("no test samples for selection");
  const std::uint32_t layer = opts.layer.value_or(bank.num_layers());
  const std::uint32_t layers[] = {layer};

  std::array<std::uint64_t, 2> pop{};
  for (const auto& r : train.records) ++pop[r.label];
  const auto labels = labels_of(test);

  std::vector<SelectionResult> out;
  for (std::uint64_t size : sizes) {
    SelectionResult res;
    res.size = size;
    res.clamped = size > std::min(pop[0], pop[1]);
    res.f1.resize(opts.repeats);
    detail::parallel_for(opts.repeats, [&](std::size_t r) {
      const auto protos = detail::build_prototypes_on(
          train, layers, size, derive_seed(opts.base_seed, r), std::string());
      const auto preds = kernels::serial::predict_layer(test, protos, layer);
      res.f1[r] = macro_f1(confusion(labels, preds));
    });
    double sum = 0.0;
    for (double f : res.f1) sum += f;
    res.mean = sum / res.f1.size();
    double ss = 0.0;
    for (double f : res.f1) ss += (f - res.mean) * (f - res.mean);
    res.std = res.f1.size() > 1 ? std::sqrt(ss / (res.f1.size() - 1)) : 0.0;
    res.min = *std::min_element(res.f1.begin(), res.f1.end());
    res.max = *std::max_element(res.f1.begin(), res.f1.end());
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace hproto
