// SPDX-License-Identifier: Apache-2.0
#include "hproto/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hproto/error.hpp"
#include "hproto/kernels.hpp"
#include "probe_impl.hpp"

namespace hproto {
namespace {

// Log-probabilities of a two-way softmax.
std::array<double, 2> log_softmax(double z0, double z1) {
  const double hi = std::max(z0, z1);
  const double lse = hi + std::log(std::exp(z0 - hi) + std::exp(z1 - hi));
  return {z0 - lse, z1 - lse};
}

std::vector<std::uint8_t> labels_of(const EmbeddingBank& bank) {
  std::vector<std::uint8_t> out;
  out.reserve(bank.size());
  for (const auto& r : bank.records) out.push_back(r.label);
  return out;
}

}  // namespace

const LinearProbe& ProbeSet::at(std::uint32_t layer) const {
  auto it = probes.find(layer);
  if (it == probes.end()) throw ValidationError("no probe for layer " + std::to_string(layer));
  return it->second;
}

std::array<double, 2> class_ratio_weights(std::span<const std::uint8_t> labels) {
  std::array<std::uint64_t, 2> n{};
  for (auto y : labels) {
    if (y > 1) throw ValidationError("label " + std::to_string(y) + " not in {0,1}");
    ++n[y];
  }
  if (n[0] == 0 || n[1] == 0) throw ValidationError("class weights need both classes present");
  const double total = static_cast<double>(labels.size());
  return {total / (2.0 * n[0]), total / (2.0 * n[1])};
}

std::array<double, 2> probe_logits(const LinearProbe& probe, std::span<const float> h) {
  if (h.size() != probe.dim())
    throw ValidationError("vector has dimension " + std::to_string(h.size()) + ", probe " +
                          std::to_string(probe.dim()));
  std::array<double, 2> z = probe.bias;
  for (int k = 0; k < 2; ++k) {
    const auto& w = probe.weights[k];
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += w[i] * double(h[i]);
    z[k] += acc;
  }
  return z;
}

int probe_predict(const LinearProbe& probe, std::span<const float> h) {
  const auto z = probe_logits(probe, h);
  return z[1] > z[0] ? 1 : 0;
}

double softmax_entropy(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("entropy of empty logits");
  const double hi = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - hi);
  const double lse = hi + std::log(sum);
  double h = 0.0;
  for (double z : logits) {
    const double lp = z - lse;
    h -= std::exp(lp) * lp;
  }
  return std::max(h, 0.0);
}

double weighted_ce_loss(const EmbeddingBank& train, const LinearProbe& probe) {
  if (train.size() == 0) throw ValidationError("loss over an empty bank");
  double total = 0.0;
  for (const auto& r : train.records) {
    const auto z = probe_logits(probe, r.layer(probe.layer, train.dim()));
    total -= probe.class_weights[r.label] * log_softmax(z[0], z[1])[r.label];
  }
  return total / static_cast<double>(train.size());
}

namespace detail {

LinearProbe train_probe_on(const EmbeddingBank& train, std::uint32_t layer,
                           const ProbeHyperparams& hyper, std::vector<double>* loss_trace) {
  const std::uint32_t d = train.dim();
  if (layer < 1 || layer > train.num_layers())
    throw ValidationError("layer " + std::to_string(layer) + " outside 1.." +
                          std::to_string(train.num_layers()));
  const auto labels = labels_of(train);
  std::array<std::size_t, 2> per_class{};
  for (auto y : labels) ++per_class[y];
  if (per_class[0] < 2 || per_class[1] < 2)
    throw ValidationError("probe training needs at least 2 train samples per class");
  if (!(hyper.learning_rate > 0.0) || !std::isfinite(hyper.learning_rate))
    throw ValidationError("learning rate must be positive");

  const std::size_t n = train.size();
  std::vector<double> x(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = train.records[i].layer(layer, d);
    std::copy(h.begin(), h.end(), x.begin() + i * d);
  }

  LinearProbe probe;
  probe.layer = layer;
  probe.weights = {std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  probe.bias = {0.0, 0.0};
  probe.class_weights = class_ratio_weights(labels);
  probe.hyper = hyper;

  const double inv_n = 1.0 / static_cast<double>(n);
  std::array<std::vector<double>, 2> grad_w = {std::vector<double>(d), std::vector<double>(d)};

  // Loss and gradient at the current parameters.
  auto step = [&](bool apply) {
    std::fill(grad_w[0].begin(), grad_w[0].end(), 0.0);
    std::fill(grad_w[1].begin(), grad_w[1].end(), 0.0);
    std::array<double, 2> grad_b{0.0, 0.0};
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = &x[i * d];
      std::array<double, 2> z = probe.bias;
      for (int k = 0; k < 2; ++k) {
        const double* w = probe.weights[k].data();
        double acc = 0.0;
        for (std::uint32_t j = 0; j < d; ++j) acc += w[j] * xi[j];
        z[k] += acc;
      }
      const auto lp = log_softmax(z[0], z[1]);
      const int y = labels[i];
      const double cw = probe.class_weights[y];
      loss -= cw * lp[y];
      if (!apply) continue;
      for (int k = 0; k < 2; ++k) {
        const double g = cw * (std::exp(lp[k]) - (k == y ? 1.0 : 0.0)) * inv_n;
        grad_b[k] += g;
        double* gw = grad_w[k].data();
        for (std::uint32_t j = 0; j < d; ++j) gw[j] += g * xi[j];
      }
    }
    loss *= inv_n;
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "probe training diverged at layer " << layer << " with learning rate "
         << hyper.learning_rate;
      throw ValidationError(os.str());
    }
    if (apply) {
      for (int k = 0; k < 2; ++k) {
        probe.bias[k] -= hyper.learning_rate * grad_b[k];
        for (std::uint32_t j = 0; j < d; ++j)
          probe.weights[k][j] -= hyper.learning_rate * grad_w[k][j];
      }
    }
    return loss;
  };

  for (std::uint32_t e = 0; e < hyper.epochs; ++e) {
    const double loss = step(true);
    if (loss_trace) loss_trace->push_back(loss);
  }
  probe.final_loss = step(false);
  if (loss_trace) loss_trace->push_back(probe.final_loss);
  return probe;
}

}  // namespace detail

LinearProbe train_probe(const EmbeddingBank& train, std::uint32_t layer,
                        const ProbeHyperparams& hyper, std::vector<double>* loss_trace) {
  return detail::train_probe_on(split_subset(train, Split::kTrain), layer, hyper, loss_trace);
}

ProbeSet train_probes(const EmbeddingBank& train, std::span<const std::uint32_t> layers,
                      const ProbeHyperparams& hyper) {
  std::vector<std::uint32_t> use(layers.begin(), layers.end());
  if (use.empty()) {
    use.resize(train.num_layers());
    std::iota(use.begin(), use.end(), 1u);
  }
  const EmbeddingBank split = split_subset(train, Split::kTrain);
  ProbeSet set;
  set.num_layers = train.num_layers();
  set.dim = train.dim();
  set.hyper = hyper;
  for (auto& p : kernels::omp::train_probes(split, use, hyper)) set.probes[p.layer] = std::move(p);
  return set;
}

nlohmann::json to_json(const ProbeSet& set) {
  nlohmann::json j;
  j["version"] = kProbeFormatVersion;
  j["L"] = set.num_layers;
  j["d"] = set.dim;
  j["hyperparams"] = {{"epochs", set.hyper.epochs},
                      {"learning_rate", set.hyper.learning_rate},
                      {"seed", set.hyper.seed}};
  nlohmann::json probes = nlohmann::json::object();
  for (const auto& [layer, p] : set.probes) {
    probes[std::to_string(layer)] = {{"weights", p.weights},
                                     {"bias", p.bias},
                                     {"class_weights", p.class_weights},
                                     {"final_loss", p.final_loss}};
  }
  j["probes"] = std::move(probes);
  return j;
}

ProbeSet probes_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kProbeFormatVersion)
      throw FormatError("unsupported probe format version");
    ProbeSet set;
    set.num_layers = j.at("L").get<std::uint32_t>();
    set.dim = j.at("d").get<std::uint32_t>();
    const auto& hp = j.at("hyperparams");
    set.hyper.epochs = hp.at("epochs").get<std::uint32_t>();
    set.hyper.learning_rate = hp.at("learning_rate").get<double>();
    set.hyper.seed = hp.at("seed").get<std::uint64_t>();
    for (const auto& [key, pj] : j.at("probes").items()) {
      LinearProbe p;
      p.layer = static_cast<std::uint32_t>(std::stoul(key));
      if (p.layer < 1 || p.layer > set.num_layers)
        throw FormatError("probe layer " + key + " out of range");
      p.weights = pj.at("weights").get<std::array<std::vector<double>, 2>>();
      p.bias = pj.at("bias").get<std::array<double, 2>>();
      p.class_weights = pj.at("class_weights").get<std::array<double, 2>>();
      p.final_loss = pj.at("final_loss").get<double>();
      p.hyper = set.hyper;
      for (const auto& w : p.weights)
        if (w.size() != set.dim) throw FormatError("probe " + key + " has wrong dimension");
      set.probes[p.layer] = std::move(p);
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad probe document: ") + e.what());
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("bad probe document: ") + e.what());
  }
}

void save_probes(const ProbeSet& probes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << to_json(probes).dump() << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

ProbeSet load_probes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open probes " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("cannot parse " + path.string() + ": " + e.what());
  }
  return probes_from_json(j);
}

}  // namespace hproto
