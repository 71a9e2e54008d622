// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernels on a synthetic bank.
//
//   bench_kernels [--samples N] [--layers L] [--dim D] [--reps R] [--threads T]
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hproto/exit.hpp"
#include "hproto/kernels.hpp"
#include "hproto/parallel.hpp"
#include "hproto/synth.hpp"

using namespace hproto;

namespace {

double best_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count());
  }
  return best;
}

void row(const char* name, double serial_ms, double omp_ms, bool same) {
  std::printf("%-18s %10.2f %10.2f %8.2fx  %s\n", name, serial_ms, omp_ms, serial_ms / omp_ms,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark serial and OpenMP kernels", "bench_kernels"};
  std::uint64_t per_class = 2000;
  std::uint32_t layers = 12, dim = 256, probe_epochs = 50;
  int reps = 3, threads = 0;
  app.add_option("--per-class", per_class, "Train (and test) samples per class");
  app.add_option("--layers", layers, "Layer count");
  app.add_option("--dim", dim, "Hidden dimension");
  app.add_option("--reps", reps, "Repetitions; the best time is reported");
  app.add_option("--epochs", probe_epochs, "Probe training epochs");
  app.add_option("--threads", threads, "Thread cap (default: all cores)");
  CLI11_PARSE(app, argc, argv);
  set_threads(threads);

  synth::GaussianSpec spec;
  spec.num_layers = layers;
  spec.dim = dim;
  spec.train_per_class = per_class;
  spec.test_per_class = per_class;
  spec.seed = 1;
  const auto bank = synth::gaussian_bank(spec);
  const auto train = split_subset(bank, Split::kTrain);
  const auto test = split_subset(bank, Split::kTest);
  const auto protos = build_prototypes(bank, {}, std::nullopt, 0, "bench");
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  std::printf("bank: %zu samples, L=%u, d=%u, threads=%d\n", bank.size(), layers, dim,
              max_threads());
  std::printf("%-18s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  {
    std::vector<double> a, b;
    const double s = best_ms(reps, [&] { a = kernels::serial::mean_vector(train, all, layers); });
    const double o = best_ms(reps, [&] { b = kernels::omp::mean_vector(train, all, layers); });
    row("mean_vector", s, o, a == b);
  }
  {
    std::vector<std::uint8_t> a, b;
    const double s = best_ms(reps, [&] { a = kernels::serial::predict_layer(test, protos, layers); });
    const double o = best_ms(reps, [&] { b = kernels::omp::predict_layer(test, protos, layers); });
    row("predict_layer", s, o, a == b);
  }
  {
    kernels::PrototypeTrace a, b;
    const double s = best_ms(reps, [&] { a = kernels::serial::prototype_trace(test, protos, 1); });
    const double o = best_ms(reps, [&] { b = kernels::omp::prototype_trace(test, protos, 1); });
    row("prototype_trace", s, o, a.labels == b.labels && a.margins == b.margins);
  }
  {
    const PolicyResources res{&protos, nullptr};
    const auto policy = ExitPolicy::margin(0.1);
    std::vector<ExitOutcome> a, b;
    const double s = best_ms(reps, [&] { a = kernels::serial::run_policy(test, res, policy, {}); });
    const double o = best_ms(reps, [&] { b = kernels::omp::run_policy(test, res, policy, {}); });
    row("run_policy", s, o, a == b);
  }
  {
    ProbeHyperparams hyper;
    hyper.epochs = probe_epochs;
    std::vector<std::uint32_t> all_layers(layers);
    std::iota(all_layers.begin(), all_layers.end(), 1u);
    std::vector<LinearProbe> a, b;
    const double s = best_ms(1, [&] { a = kernels::serial::train_probes(train, all_layers, hyper); });
    const double o = best_ms(1, [&] { b = kernels::omp::train_probes(train, all_layers, hyper); });
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i)
      same = a[i].weights == b[i].weights && a[i].bias == b[i].bias;
    row("train_probes", s, o, same);
  }
  return 0;
}
