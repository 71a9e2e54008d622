// SPDX-License-Identifier: Apache-2.0
#include "hproto/exit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "hproto/error.hpp"
#include "hproto/kernels.hpp"
#include "hproto/metrics.hpp"

namespace hproto {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_sample(const SampleRecord& s, std::uint32_t num_layers, std::uint32_t dim) {
  if (s.vectors.size() != std::size_t(num_layers) * dim)
    throw ValidationError("sample " + std::to_string(s.sample_id) +
                          " does not match the model's layer count and dimension");
}

void check_min_layer(std::uint32_t min_layer, std::uint32_t num_layers) {
  if (min_layer < 1 || min_layer > num_layers)
    throw ValidationError("min layer " + std::to_string(min_layer) + " outside 1.." +
                          std::to_string(num_layers));
}

ExitOutcome make_outcome(const SampleRecord& s, int label, std::uint32_t layer,
                         std::uint32_t num_layers) {
  ExitOutcome o;
  o.sample_id = s.sample_id;
  o.label = static_cast<std::uint8_t>(label);
  o.exit_layer = layer;
  o.exited_early = layer < num_layers;
  return o;
}

}  // namespace

std::string ExitPolicy::name() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const MarginRule& r) { os << "margin(delta=" << r.delta << ")"; },
                 [&](const EntropyRule& r) { os << "entropy(tau=" << r.tau << ")"; },
                 [&](const PatienceRule& r) { os << "patience(t=" << r.patience << ")"; },
                 [&](const FixedLayerRule& r) { os << "fixed_layer(" << r.layer << ")"; },
             },
             rule);
  return os.str();
}

ExitOutcome margin_exit(const SampleRecord& sample, const PrototypeBank& protos, double delta,
                        std::uint32_t min_layer, bool keep_margins) {
  const std::uint32_t L = protos.num_layers();
  const std::uint32_t d = protos.dim();
  check_sample(sample, L, d);
  check_min_layer(min_layer, L);

  std::vector<double> margins;
  std::optional<ExitOutcome> fired;
  for (std::uint32_t layer = min_layer; layer <= L; ++layer) {
    const auto s = similarity_scores(sample.layer(layer, d), protos, layer);
    const double m = margin(s);
    if (keep_margins) margins.push_back(m);
    if (!fired && (m >= delta || layer == L)) {
      fired = make_outcome(sample, argmax(s), layer, L);
      if (!keep_margins) break;
    }
  }
  fired->per_layer_margins = std::move(margins);
  return *fired;
}

ExitOutcome entropy_exit(const SampleRecord& sample, const ProbeSet& probes, double tau,
                         std::uint32_t min_layer) {
  const std::uint32_t L = probes.num_layers;
  const std::uint32_t d = probes.dim;
  check_sample(sample, L, d);
  check_min_layer(min_layer, L);
  for (std::uint32_t layer = min_layer; layer <= L; ++layer) {
    const auto logits = probe_logits(probes.at(layer), sample.layer(layer, d));
    if (softmax_entropy(logits) < tau || layer == L)
      return make_outcome(sample, logits[1] > logits[0] ? 1 : 0, layer, L);
  }
  return {};  // unreachable: the loop always returns at L
}

ExitOutcome patience_exit(const SampleRecord& sample, const ProbeSet& probes,
                          std::uint32_t patience, std::uint32_t min_layer) {
  if (patience < 1) throw ValidationError("patience must be at least 1");
  const std::uint32_t L = probes.num_layers;
  const std::uint32_t d = probes.dim;
  check_sample(sample, L, d);
  check_min_layer(min_layer, L);
  int prev = -1;
  std::uint32_t run = 0;
  for (std::uint32_t layer = min_layer; layer <= L; ++layer) {
    const int pred = probe_predict(probes.at(layer), sample.layer(layer, d));
    run = pred == prev ? run + 1 : 1;
    prev = pred;
    if (run >= patience || layer == L) return make_outcome(sample, pred, layer, L);
  }
  return {};
}

ExitOutcome fixed_layer_exit(const SampleRecord& sample, const PrototypeBank& protos,
                             std::uint32_t layer) {
  const std::uint32_t L = protos.num_layers();
  check_sample(sample, L, protos.dim());
  check_min_layer(layer, L);
  return make_outcome(sample, classify_at_layer(sample.layer(layer, protos.dim()), protos, layer),
                      layer, L);
}

void check_policy(const PolicyResources& res, const ExitPolicy& policy, std::uint32_t num_layers,
                  std::uint32_t dim) {
  auto need_protos = [&](std::uint32_t from, std::uint32_t to) {
    if (!res.protos) throw ValidationError(policy.name() + " needs prototypes");
    if (res.protos->num_layers() != num_layers || res.protos->dim() != dim)
      throw ValidationError("prototypes do not match the bank's layer count and dimension");
    for (std::uint32_t l = from; l <= to; ++l)
      if (!res.protos->has_layer(l))
        throw ValidationError("no prototypes for layer " + std::to_string(l));
  };
  auto need_probes = [&](std::uint32_t from) {
    if (!res.probes) throw ValidationError(policy.name() + " needs probes");
    if (res.probes->num_layers != num_layers || res.probes->dim != dim)
      throw ValidationError("probes do not match the bank's layer count and dimension");
    for (std::uint32_t l = from; l <= num_layers; ++l) res.probes->at(l);
  };
  check_min_layer(policy.min_layer, num_layers);
  std::visit(overloaded{
                 [&](const MarginRule& r) {
                   if (!(r.delta >= 0.0)) throw ValidationError("delta must be >= 0");
                   need_protos(policy.min_layer, num_layers);
                 },
                 [&](const EntropyRule& r) {
                   if (!(r.tau > 0.0)) throw ValidationError("tau must be > 0");
                   need_probes(policy.min_layer);
                 },
                 [&](const PatienceRule& r) {
                   if (r.patience < 1) throw ValidationError("patience must be at least 1");
                   need_probes(policy.min_layer);
                 },
                 [&](const FixedLayerRule& r) {
                   check_min_layer(r.layer, num_layers);
                   need_protos(r.layer, r.layer);
                 },
             },
             policy.rule);
}

ExitOutcome apply_policy(const SampleRecord& sample, const PolicyResources& res,
                         const ExitPolicy& policy, const RunOptions& opts) {
  return std::visit(
      overloaded{
          [&](const MarginRule& r) {
            return margin_exit(sample, *res.protos, r.delta, policy.min_layer, opts.keep_margins);
          },
          [&](const EntropyRule& r) {
            return entropy_exit(sample, *res.probes, r.tau, policy.min_layer);
          },
          [&](const PatienceRule& r) {
            return patience_exit(sample, *res.probes, r.patience, policy.min_layer);
          },
          [&](const FixedLayerRule& r) { return fixed_layer_exit(sample, *res.protos, r.layer); },
      },
      policy.rule);
}

std::vector<ExitOutcome> run_policy(const EmbeddingBank& bank, const PolicyResources& res,
                                    const ExitPolicy& policy, const RunOptions& opts) {
  return kernels::omp::run_policy(bank, res, policy, opts);
}

std::vector<std::uint8_t> predicted_labels(std::span<const ExitOutcome> outcomes) {
  std::vector<std::uint8_t> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) out.push_back(o.label);
  return out;
}

double average_exit_layer(std::span<const ExitOutcome> outcomes) {
  if (outcomes.empty()) throw ValidationError("average exit layer of zero outcomes");
  double sum = 0.0;
  for (const auto& o : outcomes) sum += o.exit_layer;
  return sum / static_cast<double>(outcomes.size());
}

double speedup(std::uint32_t num_layers, double avg_exit_layer) {
  if (!(avg_exit_layer >= 1.0 && avg_exit_layer <= num_layers))
    throw ValidationError("average exit layer " + std::to_string(avg_exit_layer) +
                          " outside [1, " + std::to_string(num_layers) + "]");
  return static_cast<double>(num_layers) / avg_exit_layer;
}

std::vector<double> exit_histogram(std::span<const ExitOutcome> outcomes,
                                   std::uint32_t num_layers) {
  if (outcomes.empty()) throw ValidationError("exit histogram of zero outcomes");
  std::vector<std::uint64_t> counts(num_layers, 0);
  for (const auto& o : outcomes) {
    if (o.exit_layer < 1 || o.exit_layer > num_layers)
      throw ValidationError("exit layer " + std::to_string(o.exit_layer) + " out of range");
    ++counts[o.exit_layer - 1];
  }
  std::vector<double> out(num_layers);
  for (std::uint32_t i = 0; i < num_layers; ++i)
    out[i] = static_cast<double>(counts[i]) / static_cast<double>(outcomes.size());
  return out;
}

std::vector<SweepPoint> delta_sweep(const EmbeddingBank& bank, const PrototypeBank& protos,
                                    std::span<const double> deltas, std::uint32_t min_layer) {
  if (deltas.empty()) throw ValidationError("empty delta grid");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] >= 0.0)) throw ValidationError("delta must be >= 0");
    if (i > 0 && deltas[i] < deltas[i - 1]) throw ValidationError("delta grid must be ascending");
  }
  if (bank.size() == 0) throw ValidationError("delta sweep over an empty bank");
  check_policy({&protos, nullptr}, ExitPolicy{MarginRule{deltas[0]}, min_layer}, bank.num_layers(),
               bank.dim());

  const auto trace = kernels::omp::prototype_trace(bank, protos, min_layer);
  const std::uint32_t L = bank.num_layers();
  std::vector<std::uint8_t> labels(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) labels[i] = bank.records[i].label;

  std::vector<SweepPoint> out;
  std::vector<std::uint8_t> preds(bank.size());
  for (double delta : deltas) {
    double exit_sum = 0.0;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      std::uint32_t layer = min_layer;
      while (layer < L && !(trace.margins[trace.at(i, layer)] >= delta)) ++layer;
      preds[i] = trace.labels[trace.at(i, layer)];
      exit_sum += layer;
    }
    out.push_back({delta, macro_f1(confusion(labels, preds)),
                   exit_sum / static_cast<double>(bank.size())});
  }
  return out;
}

std::vector<double> parse_grid(const std::string& spec) {
  auto number = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
      throw ValidationError("bad number '" + s + "' in grid '" + spec + "'");
    return v;
  };
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError("grid must be start:stop:step, got '" + spec + "'");
    const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || stop < start)
      throw ValidationError("grid '" + spec + "' needs step > 0 and stop >= start");
    const double tol = 1e-9 * step;
    for (std::size_t i = 0;; ++i) {
      const double v = start + static_cast<double>(i) * step;
      if (v > stop + tol) break;
      out.push_back(v);
    }
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
    if (out.empty()) throw ValidationError("empty grid");
  }
  return out;
}

std::vector<double> default_delta_grid() { return parse_grid("0:0.5:0.025"); }

}  // namespace hproto
