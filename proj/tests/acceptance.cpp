// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "hproto/bank.hpp"
#include "hproto/error.hpp"
#include "hproto/exit.hpp"
#include "hproto/experiments.hpp"
#include "hproto/metrics.hpp"
#include "hproto/probe.hpp"
#include "hproto/prototypes.hpp"
#include "hproto/synth.hpp"
#include "test_support.hpp"

using namespace hproto;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class F>
void criterion(const char* name, F&& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  report(name, ok, detail);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

EmbeddingBank random_bank(std::uint64_t seed) {
  synth::RandomSpec spec;
  spec.seed = seed;
  return synth::random_bank(spec);
}

EmbeddingBank separable_bank() {
  synth::GaussianSpec spec;
  spec.num_layers = 4;
  spec.dim = 32;
  spec.train_per_class = 500;
  spec.test_per_class = 500;
  spec.separation = 6.0;
  spec.sigma = 1.0;
  spec.seed = 2024;
  return synth::gaussian_bank(spec);
}

bool same_outcomes(const std::vector<ExitOutcome>& a, const std::vector<ExitOutcome>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].label != b[i].label || a[i].exit_layer != b[i].exit_layer ||
        a[i].sample_id != b[i].sample_id)
      return false;
  return true;
}

// Student t density for df=2 integrated by composite Simpson on [0, t];
// two-sided p = 1 - 2 * integral.
double simpson_p_df2(double t) {
  auto pdf = [](double x) { return std::pow(2.0 + x * x, -1.5); };
  const int n = 20000;
  const double h = t / n;
  double s = pdf(0) + pdf(t);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

bool throws_format(const std::filesystem::path& p, const std::string& needle, std::string& what) {
  try {
    read_bank(p, false);
  } catch (const FormatError& e) {
    what = e.what();
    return what.find(needle) != std::string::npos;
  }
  what = "no error";
  return false;
}

}  // namespace

int main() {
  criterion("oracle-equivalence", [](std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t checked = 0, agree = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto bank = random_bank(seed);
      const auto protos = build_prototypes(bank, {}, std::nullopt, 0, "acceptance");
      for (std::uint32_t l = 1; l <= bank.num_layers(); ++l) {
        const auto want = testing::oracle_classify(bank, l);
        for (std::size_t i = 0; i < bank.size(); ++i) {
          const auto got = classify_at_layer(bank.records[i].layer(l, bank.dim()), protos, l);
          ++checked;
          agree += got == want[i];
        }
      }
    }
    const double secs = seconds_since(t0);
    detail = std::to_string(agree) + "/" + std::to_string(checked) + " agree, " +
             fmt("%.3f s (limit 5 s)", secs);
    return checked > 0 && agree == checked && secs < 5.0;
  });

  std::vector<EmbeddingBank> banks;
  for (std::uint64_t seed = 0; seed < 50; ++seed) banks.push_back(random_bank(seed));
  banks.push_back(separable_bank());

  criterion("exit-rule-collapse", [&](std::string& detail) {
    int ok = 0;
    for (const auto& bank : banks) {
      const auto protos = build_prototypes(bank, {}, kDefaultPerClass, 0, "acceptance");
      const auto eval = split_subset(bank, Split::kTest);
      const PolicyResources res{&protos, nullptr};
      const auto L = bank.num_layers();
      const bool low = same_outcomes(run_policy(eval, res, ExitPolicy::margin(0.0)),
                                     run_policy(eval, res, ExitPolicy::fixed_layer(1)));
      const bool high = same_outcomes(run_policy(eval, res, ExitPolicy::margin(2.5)),
                                      run_policy(eval, res, ExitPolicy::fixed_layer(L)));
      ok += low && high;
    }
    detail = std::to_string(ok) + "/" + std::to_string(banks.size()) +
             " banks: delta=0 == fixed(1), delta=2.5 == fixed(L)";
    return ok == static_cast<int>(banks.size());
  });

  criterion("monotonicity", [&](std::string& detail) {
    const auto grid = default_delta_grid();
    int ok = 0;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
      const auto bank = random_bank(seed);
      const auto protos = build_prototypes(bank, {}, kDefaultPerClass, seed, "acceptance");
      const auto eval = split_subset(bank, Split::kTest);
      const PolicyResources res{&protos, nullptr};
      std::vector<ExitOutcome> prev;
      double prev_avg = 0.0;
      bool mono = true;
      for (double delta : grid) {
        const auto cur = run_policy(eval, res, ExitPolicy::margin(delta));
        const double avg = average_exit_layer(cur);
        if (!prev.empty()) {
          mono = mono && avg >= prev_avg;
          for (std::size_t i = 0; i < cur.size(); ++i)
            mono = mono && cur[i].exit_layer >= prev[i].exit_layer;
        }
        prev = cur;
        prev_avg = avg;
      }
      ok += mono;
    }
    detail = std::to_string(ok) + "/20 banks non-decreasing over " +
             std::to_string(grid.size()) + " grid points";
    return ok == 20;
  });

  criterion("separable-recovery", [](std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto bank = separable_bank();
    const auto protos = build_prototypes(bank, {}, 50, 0, "acceptance");
    const auto eval = split_subset(bank, Split::kTest);
    const double f1 = evaluate_prototypes(eval, protos).macro_f1;
    const std::vector<std::uint64_t> sizes = {50, 500};
    const auto sel = selection_experiment(bank, sizes);
    const double gap = std::abs(sel[0].mean - sel[1].mean);
    const double secs = seconds_since(t0);
    detail = fmt("K=50 macro-F1 %.4f (>= 0.99); mean F1 @50 %.4f vs @500 ", f1, sel[0].mean) +
             fmt("%.4f (gap %.4f <= 0.02); %.2f s (limit 10 s)", sel[1].mean, gap, secs);
    return f1 >= 0.99 && gap <= 0.02 && secs < 10.0;
  });

  criterion("metric-goldens", [](std::string& detail) {
    const std::vector<std::uint8_t> y = {0, 0, 1, 1}, p = {0, 0, 0, 0};
    const double f1 = macro_f1(confusion(y, p));
    const double s = speedup(12, 9.75);
    const std::vector<double> a = {1, 2, 3}, b = {0, 0, 0};
    const auto tt = paired_t_test(a, b);
    const double closed = 1.0 - tt.t / std::sqrt(2.0 + tt.t * tt.t);
    const double simpson = simpson_p_df2(tt.t);
    const bool ok = f1 == 1.0 / 3.0 && std::abs(s - 1.230769) <= 1e-6 &&
                    std::abs(tt.t - 3.4641) <= 1e-3 && std::abs(tt.p - 0.0742) <= 1e-3 &&
                    std::abs(tt.p - closed) <= 1e-9 && std::abs(tt.p - simpson) <= 1e-6;
    detail = fmt("macro-F1 %.17g; speedup %.7f; ", f1, s) +
             fmt("t %.5f p %.6f (closed form %.6f, ", tt.t, tt.p, closed) +
             fmt("quadrature %.6f)", simpson);
    return ok;
  });

  criterion("format-conformance", [](std::string& detail) {
    testing::TempDir dir;
    std::mt19937_64 rng(7);
    int exact = 0, size_ok = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      std::uniform_int_distribution<std::uint32_t> Ld(1, 4), dd(1, 16);
      std::uniform_int_distribution<std::uint64_t> Nd(0, 20);
      std::normal_distribution<float> val(0.0f, 10.0f);
      EmbeddingBank bank;
      bank.header.num_layers = Ld(rng);
      bank.header.hidden_dim = dd(rng);
      const auto n = Nd(rng);
      for (std::uint64_t i = 0; i < n; ++i) {
        SampleRecord r;
        r.sample_id = rng();
        r.label = static_cast<std::uint8_t>(rng() & 1);
        r.vectors.resize(std::size_t(bank.header.num_layers) * bank.header.hidden_dim);
        for (auto& v : r.vectors) v = val(rng);
        bank.records.push_back(std::move(r));
      }
      bank.header.num_samples = n;
      const auto path = dir / ("rt" + std::to_string(trial % 8) + ".bin");
      write_bank(bank, path);
      const auto expected = 32 + n * (16 + 4ull * bank.header.num_layers * bank.header.hidden_dim);
      size_ok += std::filesystem::file_size(path) == expected;
      const auto back = read_bank(path, false);
      bool same = back.header.num_layers == bank.header.num_layers &&
                  back.header.hidden_dim == bank.header.hidden_dim && back.size() == n;
      for (std::size_t i = 0; same && i < n; ++i) {
        const auto& x = bank.records[i];
        const auto& z = back.records[i];
        same = x.sample_id == z.sample_id && x.label == z.label &&
               std::memcmp(x.vectors.data(), z.vectors.data(), x.vectors.size() * 4) == 0;
      }
      exact += same;
    }

    // corruption classes on one valid file
    EmbeddingBank good;
    good.header.num_layers = 2;
    good.header.hidden_dim = 3;
    for (std::uint64_t i = 0; i < 4; ++i) {
      SampleRecord r;
      r.sample_id = i;
      r.label = static_cast<std::uint8_t>(i % 2);
      r.vectors.assign(6, 0.5f);
      good.records.push_back(r);
    }
    good.header.num_samples = 4;
    const auto base = dir / "good.bin";
    write_bank(good, base);
    std::ifstream in(base, std::ios::binary);
    const std::string bytes{std::istreambuf_iterator<char>(in), {}};
    auto corrupt = [&](const std::string& name, const std::function<void(std::string&)>& edit) {
      std::string b = bytes;
      edit(b);
      const auto p = dir / name;
      std::ofstream(p, std::ios::binary) << b;
      return p;
    };
    const std::size_t rec0 = 32;
    std::string w1, w2, w3, w4;
    const bool magic = throws_format(corrupt("m.bin", [](std::string& b) { b[0] = 'X'; }),
                                     "magic", w1);
    const bool trunc = throws_format(
        corrupt("t.bin", [](std::string& b) { b.resize(b.size() - 5); }), "truncated", w2);
    const bool nan = throws_format(corrupt("n.bin",
                                           [&](std::string& b) {
                                             const float q = std::nanf("");
                                             std::memcpy(&b[rec0 + 16 + 4], &q, 4);
                                           }),
                                   "NaN", w3);
    const bool label = throws_format(
        corrupt("l.bin", [&](std::string& b) { b[rec0 + 8] = 2; }), "label", w4);
    detail = std::to_string(exact) + "/1000 bit-exact, " + std::to_string(size_ok) +
             "/1000 size law; corruption magic=" + (magic ? "caught" : "missed") +
             " truncation=" + (trunc ? "caught" : "missed") + " nan=" +
             (nan ? "caught" : "missed") + " label=" + (label ? "caught" : "missed");
    return exact == 1000 && size_ok == 1000 && magic && trunc && nan && label;
  });

  criterion("probe-baseline-sanity", [](std::string& detail) {
    const auto bank = separable_bank();
    const auto probes = train_probes(bank, {}, {});
    const auto eval = split_subset(bank, Split::kTest);
    const PolicyResources res{nullptr, &probes};
    const double loose = average_exit_layer(run_policy(eval, res, ExitPolicy::entropy(0.1)));
    const double tight = average_exit_layer(run_policy(eval, res, ExitPolicy::entropy(0.01)));
    const double pat1 = average_exit_layer(run_policy(eval, res, ExitPolicy::patience(1)));
    detail = fmt("avg exit tau=0.1 %.4f < tau=0.01 %.4f; patience t=1 %.4f (== 1)", loose, tight,
                 pat1);
    return loose < tight && pat1 == 1.0;
  });

  report("not-desk-reproducible", true,
         "stated: headline transfer and early-exit numbers on real benchmarks need the fine-tuned "
         "checkpoints and licensed datasets; covered here by the oracle and property criteria");

  std::printf("%s: %d criterion failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
