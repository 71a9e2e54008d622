// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hproto/error.hpp"
#include "hproto/exit.hpp"
#include "hproto/metrics.hpp"
#include "hproto/synth.hpp"
#include "test_support.hpp"

using namespace hproto;
using doctest::Approx;

namespace {

PrototypeBank axis_protos(std::uint32_t L) {
  PrototypeInfo info;
  info.num_layers = L;
  info.dim = 2;
  std::vector<std::uint32_t> layers;
  std::array<PrototypeBank::LayerMeans, 2> means;
  for (std::uint32_t l = 1; l <= L; ++l) {
    layers.push_back(l);
    means[0].push_back({1.0, 0.0});
    means[1].push_back({0.0, 1.0});
  }
  return PrototypeBank(info, layers, means);
}

// Unit vector whose cosine gap to the axis prototypes is m, leaning to class 0:
// cos(t) - sin(t) = sqrt(2) cos(t + pi/4) = m.
std::array<float, 2> with_margin(double m) {
  const double t = std::acos(m / std::numbers::sqrt2) - std::numbers::pi / 4;
  return {static_cast<float>(std::cos(t)), static_cast<float>(std::sin(t))};
}

// Probes over d = 1 whose prediction at each layer is fixed by the bias.
ProbeSet bias_probes(const std::vector<int>& preds, double strength = 1.0) {
  ProbeSet set;
  set.num_layers = static_cast<std::uint32_t>(preds.size());
  set.dim = 1;
  for (std::uint32_t l = 1; l <= set.num_layers; ++l) {
    LinearProbe p;
    p.layer = l;
    p.weights = {std::vector<double>{0.0}, std::vector<double>{0.0}};
    p.bias = preds[l - 1] == 1 ? std::array<double, 2>{0.0, strength}
                               : std::array<double, 2>{strength, 0.0};
    set.probes[l] = p;
  }
  return set;
}

SampleRecord scalar_sample(std::uint32_t L) {
  SampleRecord r;
  r.sample_id = 5;
  r.vectors.assign(L, 1.0f);
  return r;
}

EmbeddingBank ramp_bank(std::uint64_t seed, std::uint32_t L = 6) {
  synth::GaussianSpec spec;
  spec.num_layers = L;
  spec.dim = 8;
  spec.train_per_class = 60;
  spec.test_per_class = 60;
  spec.separation = 4.0;
  spec.seed = seed;
  return synth::gaussian_bank(spec);
}

}  // namespace

TEST_CASE("margin exit on a constructed two-layer sample") {
  const auto p = axis_protos(2);
  const auto a = with_margin(0.1), b = with_margin(0.3);
  SampleRecord r;
  r.vectors = {a[0], a[1], b[0], b[1]};
  // Oracle check of the construction itself.
  CHECK(margin(similarity_scores(r.layer(1, 2), p, 1)) == Approx(0.1).epsilon(1e-6));
  CHECK(margin(similarity_scores(r.layer(2, 2), p, 2)) == Approx(0.3).epsilon(1e-6));

  const auto o = margin_exit(r, p, 0.2);
  CHECK(o.exit_layer == 2);
  CHECK(o.label == 0);
  CHECK_FALSE(o.exited_early);

  CHECK(margin_exit(r, p, 0.05).exit_layer == 1);
  CHECK(margin_exit(r, p, 0.05).exited_early);
  CHECK(margin_exit(r, p, 0.0).exit_layer == 1);
  CHECK(margin_exit(r, p, 2.5).exit_layer == 2);

  const auto kept = margin_exit(r, p, 0.05, 1, true);
  REQUIRE(kept.per_layer_margins.size() == 2);
  CHECK(kept.per_layer_margins[1] == Approx(0.3).epsilon(1e-6));
}

TEST_CASE("margin exit respects the minimum layer") {
  const auto p = axis_protos(4);
  SampleRecord r;
  r.vectors = {1, 0, 1, 0, 1, 0, 0, 1};
  CHECK(margin_exit(r, p, 0.0, 3).exit_layer == 3);
  CHECK(margin_exit(r, p, 0.0, 3).label == 0);
  CHECK(margin_exit(r, p, 5.0, 3).label == 1);
  CHECK_THROWS_AS(margin_exit(r, p, 0.0, 5), ValidationError);
}

TEST_CASE("entropy exit") {
  // Zero probe gives logits (0, 0): entropy ln 2.
  auto set = bias_probes({0, 0, 0}, 0.0);
  const auto r = scalar_sample(3);
  CHECK(entropy_exit(r, set, 0.5).exit_layer == 3);
  CHECK(entropy_exit(r, set, std::numbers::ln2 + 1e-9).exit_layer == 1);

  set = bias_probes({1, 1, 1}, 20.0);  // logits (0, 20)
  CHECK(entropy_exit(r, set, 1e-6).exit_layer == 1);
  CHECK(entropy_exit(r, set, 1e-6).label == 1);

  set.probes.erase(2);
  CHECK_THROWS_AS(entropy_exit(r, set, 1e-30), ValidationError);
}

TEST_CASE("patience exit") {
  const auto r = scalar_sample(4);
  auto o = patience_exit(r, bias_probes({1, 0, 0, 0}), 1);
  CHECK(o.exit_layer == 1);
  CHECK(o.label == 1);

  o = patience_exit(r, bias_probes({0, 1, 1, 1}), 3);
  CHECK(o.exit_layer == 4);
  CHECK(o.label == 1);

  o = patience_exit(r, bias_probes({0, 1, 0, 1}), 2);
  CHECK(o.exit_layer == 4);
  CHECK(o.label == 1);

  o = patience_exit(r, bias_probes({0, 0, 0, 0}), 9);
  CHECK(o.exit_layer == 4);
  CHECK_THROWS_AS(patience_exit(r, bias_probes({0, 0, 0, 0}), 0), ValidationError);
}

TEST_CASE("policy collapse") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto bank = ramp_bank(seed);
    const auto p = build_prototypes(bank, {}, 30, seed);
    const PolicyResources res{&p, nullptr};
    const auto L = bank.num_layers();
    const auto first = run_policy(bank, res, ExitPolicy::fixed_layer(1));
    const auto last = run_policy(bank, res, ExitPolicy::fixed_layer(L));
    CHECK(run_policy(bank, res, ExitPolicy::margin(0.0)) == first);
    CHECK(run_policy(bank, res, ExitPolicy::margin(2.5)) == last);
    CHECK(run_policy(bank, res, ExitPolicy::margin(1e300)) == last);
    for (std::size_t i = 0; i < bank.size(); ++i) {
      CHECK(last[i].label == classify_at_layer(bank.records[i].layer(L, bank.dim()), p, L));
      CHECK(last[i].sample_id == bank.records[i].sample_id);
    }
  }
}

TEST_CASE("exit layers are monotone in delta") {
  const auto grid = default_delta_grid();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto bank = ramp_bank(seed + 10);
    const auto p = build_prototypes(bank, {}, std::nullopt, 0);
    std::vector<ExitOutcome> prev;
    for (double delta : grid) {
      auto cur = run_policy(bank, {&p, nullptr}, ExitPolicy::margin(delta));
      if (!prev.empty())
        for (std::size_t i = 0; i < cur.size(); ++i)
          CHECK(prev[i].exit_layer <= cur[i].exit_layer);
      prev = std::move(cur);
    }
  }
}

TEST_CASE("patience collapse over a bank") {
  const auto bank = ramp_bank(3, 4);
  const auto probes = train_probes(bank, {}, {50, 0.1, 0});
  const PolicyResources res{nullptr, &probes};
  const auto t1 = run_policy(bank, res, ExitPolicy::patience(1));
  const auto tbig = run_policy(bank, res, ExitPolicy::patience(5));
  for (std::size_t i = 0; i < bank.size(); ++i) {
    CHECK(t1[i].exit_layer == 1);
    CHECK(t1[i].label == probe_predict(probes.at(1), bank.records[i].layer(1, bank.dim())));
    CHECK(tbig[i].exit_layer == 4);
  }
  const auto all = run_policy(bank, res, ExitPolicy::entropy(std::numbers::ln2 + 1e-12));
  for (const auto& o : all) CHECK(o.exit_layer == 1);
}

TEST_CASE("policies check their resources") {
  const auto bank = ramp_bank(1, 3);
  const auto p = build_prototypes(bank, {}, 10, 0);
  CHECK_THROWS_AS(run_policy(bank, {nullptr, nullptr}, ExitPolicy::margin(0.1)), ValidationError);
  CHECK_THROWS_AS(run_policy(bank, {&p, nullptr}, ExitPolicy::entropy(0.1)), ValidationError);
  CHECK_THROWS_AS(run_policy(bank, {&p, nullptr}, ExitPolicy::margin(-1)), ValidationError);
  CHECK_THROWS_AS(run_policy(bank, {&p, nullptr}, ExitPolicy::fixed_layer(4)), ValidationError);
  const std::uint32_t only2[] = {2};
  const auto partial = build_prototypes(bank, only2, 10, 0);
  CHECK_THROWS_AS(run_policy(bank, {&partial, nullptr}, ExitPolicy::margin(0.1)), ValidationError);
  CHECK(run_policy(bank, {&partial, nullptr}, ExitPolicy::fixed_layer(2)).size() == bank.size());

  auto probes = train_probes(bank, {}, {5, 0.1, 0});
  probes.probes.erase(3);
  CHECK_THROWS_AS(run_policy(bank, {nullptr, &probes}, ExitPolicy::patience(2)), ValidationError);
}

TEST_CASE("average exit layer, speedup, histogram") {
  auto outcomes = [](std::initializer_list<std::uint32_t> layers) {
    std::vector<ExitOutcome> out;
    for (auto l : layers) out.push_back({0, 0, l, false, {}});
    return out;
  };
  CHECK(average_exit_layer(outcomes({12, 12, 12})) == 12.0);
  CHECK(average_exit_layer(outcomes({9, 10, 11, 12})) == 10.5);
  CHECK_THROWS_AS(average_exit_layer(outcomes({})), ValidationError);

  CHECK(speedup(12, 12.0) == 1.0);
  CHECK(speedup(12, 6.0) == 2.0);
  CHECK(speedup(12, 9.75) == Approx(1.23077).epsilon(1e-5));
  CHECK_THROWS_AS(speedup(12, 0.5), ValidationError);
  CHECK_THROWS_AS(speedup(12, 12.5), ValidationError);

  auto h = exit_histogram(outcomes({3, 3}), 3);
  CHECK(h == std::vector<double>{0.0, 0.0, 1.0});
  h = exit_histogram(outcomes({1, 1, 2, 2}), 2);
  CHECK(h == std::vector<double>{0.5, 0.5});
  h = exit_histogram(outcomes({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}), 12);
  double sum = 0.0;
  for (double x : h) {
    CHECK(x == Approx(1.0 / 12.0));
    sum += x;
  }
  CHECK(sum == Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(exit_histogram(outcomes({13}), 12), ValidationError);
}

TEST_CASE("delta sweep agrees with per-delta policy runs") {
  const auto bank = ramp_bank(21);
  const auto p = build_prototypes(bank, {}, 40, 1);
  const double zero[] = {0.0};
  CHECK(delta_sweep(bank, p, zero)[0].avg_exit == 1.0);
  const double big[] = {2.5};
  CHECK(delta_sweep(bank, p, big)[0].avg_exit == bank.num_layers());

  const auto grid = default_delta_grid();
  const auto sweep = delta_sweep(bank, p, grid);
  REQUIRE(sweep.size() == grid.size());
  std::vector<std::uint8_t> labels;
  for (const auto& r : bank.records) labels.push_back(r.label);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto out = run_policy(bank, {&p, nullptr}, ExitPolicy::margin(grid[g]));
    CHECK(sweep[g].delta == grid[g]);
    CHECK(sweep[g].avg_exit == Approx(average_exit_layer(out)).epsilon(1e-12));
    CHECK(sweep[g].macro_f1 == macro_f1(confusion(labels, predicted_labels(out))));
    if (g > 0) CHECK(sweep[g].avg_exit >= sweep[g - 1].avg_exit);
  }
  const double descending[] = {0.2, 0.1};
  CHECK_THROWS_AS(delta_sweep(bank, p, descending), ValidationError);
}

TEST_CASE("grid parsing") {
  const auto g = default_delta_grid();
  REQUIRE(g.size() == 21);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == Approx(0.5));
  CHECK(g[4] == Approx(0.1));
  CHECK(parse_grid("0.05") == std::vector<double>{0.05});
  CHECK(parse_grid("0,0.5,1").size() == 3);
  CHECK(parse_grid("1:1:0.5") == std::vector<double>{1.0});
  CHECK_THROWS_AS(parse_grid("0:1"), ValidationError);
  CHECK_THROWS_AS(parse_grid("0:1:0"), ValidationError);
  CHECK_THROWS_AS(parse_grid("a:1:0.1"), ValidationError);
}

TEST_CASE("policy names") {
  CHECK(ExitPolicy::margin(0.1).name() == "margin(delta=0.1)");
  CHECK(ExitPolicy::patience(2).name() == "patience(t=2)");
  CHECK(ExitPolicy::patience(2).uses_probes());
  CHECK_FALSE(ExitPolicy::fixed_layer(3).uses_probes());
}
