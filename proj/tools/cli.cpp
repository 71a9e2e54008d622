// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hproto/bank.hpp"
#include "hproto/error.hpp"
#include "hproto/exit.hpp"
#include "hproto/experiments.hpp"
#include "hproto/parallel.hpp"
#include "hproto/probe.hpp"
#include "hproto/prototypes.hpp"
#include "hproto/report.hpp"
#include "hproto/synth.hpp"

namespace hproto::cli {
namespace {

using nlohmann::json;

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  try {
    if (!s.empty() && s[0] != '-') {
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ValidationError("bad " + what + " '" + s + "'");
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("bad " + what + " '" + s + "'");
}

// "all", or a comma list of layers and a-b ranges.
std::vector<std::uint32_t> parse_layers(const std::string& s) {
  std::vector<std::uint32_t> out;
  if (s.empty() || s == "all") return out;
  for (const auto& part : split_list(s)) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(static_cast<std::uint32_t>(parse_u64(part, "layer")));
    } else {
      const auto lo = parse_u64(part.substr(0, dash), "layer");
      const auto hi = parse_u64(part.substr(dash + 1), "layer");
      if (hi < lo) throw ValidationError("bad layer range '" + part + "'");
      for (auto l = lo; l <= hi; ++l) out.push_back(static_cast<std::uint32_t>(l));
    }
  }
  return out;
}

std::optional<std::uint64_t> parse_per_class(const std::string& s) {
  if (s == "all") return std::nullopt;
  const auto k = parse_u64(s, "per-class count");
  if (k == 0) throw ValidationError("per-class count must be at least 1");
  return k;
}

std::optional<Split> parse_split_arg(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_split(s);
}

EmbeddingBank select_split(const EmbeddingBank& bank, const std::string& split) {
  const auto s = parse_split_arg(split);
  return s ? split_subset(bank, *s) : bank;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw FormatError("write failed for " + path);
}

std::vector<std::uint8_t> labels_of(const EmbeddingBank& bank) {
  std::vector<std::uint8_t> y;
  for (const auto& r : bank.records) y.push_back(r.label);
  return y;
}

std::optional<std::map<std::string, double>> group_accuracy_if_tagged(
    const EmbeddingBank& bank, std::span<const std::uint8_t> preds) {
  std::vector<std::optional<std::string>> cats;
  bool any = false;
  for (const auto& r : bank.records) {
    const SampleMeta* m = bank.find_meta(r.sample_id);
    cats.push_back(m ? m->category : std::nullopt);
    any = any || cats.back().has_value();
  }
  if (!any) return std::nullopt;
  return grouped_accuracy(labels_of(bank), preds, cats);
}

// Parameters shared by several subcommands. CLI11 binds into these.
struct Options {
  std::string bank, meta, out, protos, probes, format, split = "test", source;
  std::string per_class = "500", layers = "all", grid = "0:0.5:0.025", sizes = "5,10,20,50,100,200,500";
  std::string policy = "margin", predictions, in, a, b, report_a, report_b, metric = "macro_f1";
  std::string histogram_csv, outcomes;
  std::vector<std::string> named_banks;
  std::uint64_t seed = 0, base_seed = 0;
  std::uint32_t layer = 0, min_layer = 1, repeats = kDefaultRepeats, seeds = 0;
  std::uint32_t patience = kDefaultPatience, epochs = 200;
  double delta = 0.1, tau = kDefaultTau, lr = 0.1;
  bool keep_margins = false, timestamp = false;
  // synth
  std::uint32_t syn_layers = 4, syn_dim = 32;
  std::uint64_t syn_train = 500, syn_test = 500;
  double syn_sep = 6.0, syn_sigma = 1.0, syn_offset = 0.0;
  bool syn_swap = false;
  std::string syn_categories;
};

json config_of(const CLI::App* sub, bool timestamp) {
  json cfg;
  cfg["subcommand"] = sub->get_name();
  json opts = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      opts[name] = res.size() == 1 ? json(res[0]) : json(res);
    } else if (!opt->get_default_str().empty()) {
      opts[name] = opt->get_default_str();
    }
  }
  cfg["options"] = std::move(opts);
  if (timestamp) {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    cfg["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(now).count();
  }
  return cfg;
}

std::string emit_json(const json& j) { return j.dump(2) + "\n"; }

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args);

 private:
  void setup(CLI::App& app);
  void cmd_validate();
  void cmd_build();
  void cmd_classify();
  void cmd_exit();
  void cmd_sweep();
  void cmd_transfer();
  void cmd_select();
  void cmd_probe_train();
  void cmd_probe_eval();
  void cmd_ttest();
  void cmd_report();
  void cmd_synth();

  void emit(const EvaluationReport& r) {
    write_text(o_.out, emit_report(r, parse_report_format(o_.format.empty() ? "json" : o_.format)),
               out_);
  }
  std::string format_or(const std::string& fallback) const {
    return o_.format.empty() ? fallback : o_.format;
  }

  std::ostream& out_;
  std::ostream& err_;
  Options o_;
  int threads_ = 0;
  const CLI::App* active_ = nullptr;
  json config() const { return config_of(active_, o_.timestamp); }
};

void Runner::setup(CLI::App& app) {
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.add_option("--threads", threads_,
                 "Cap on worker threads (default: HPROTO_THREADS, else all cores)");

  auto bank = [&](CLI::App* s, bool required = true) {
    auto* o = s->add_option("--bank", o_.bank, "Embedding bank file");
    if (required) o->required();
  };
  auto out = [&](CLI::App* s, const std::string& what) {
    s->add_option("--out", o_.out, what + " (default: stdout)");
  };
  auto format = [&](CLI::App* s, const std::string& def) {
    s->add_option("--format", o_.format, "Output format: json or csv (default: " + def + ")");
  };
  auto split = [&](CLI::App* s) {
    s->add_option("--split", o_.split, "Samples to evaluate: test, train or all");
  };
  auto stamp = [&](CLI::App* s) {
    s->add_flag("--timestamp", o_.timestamp, "Record the run time in the config block");
  };

  auto* v = app.add_subcommand("validate", "Check a bank file and its metadata sidecar");
  bank(v);
  v->add_option("--meta", o_.meta, "Metadata JSONL (default: <bank>.meta.jsonl if present)");
  v->callback([this] { cmd_validate(); });

  auto* b = app.add_subcommand("build", "Build per-class, per-layer prototypes");
  bank(b);
  b->add_option("--out", o_.out, "Prototype JSON output")->required();
  b->add_option("--per-class", o_.per_class, "Samples per class, or 'all'");
  b->add_option("--seed", o_.seed, "Sampling seed");
  b->add_option("--layers", o_.layers, "Layers, e.g. 'all', '12' or '1-4,12'");
  b->add_option("--source", o_.source, "Name recorded as the prototype source");
  b->callback([this] { cmd_build(); });

  auto* c = app.add_subcommand("classify", "Prototype classification at one layer");
  bank(c);
  c->add_option("--protos", o_.protos, "Prototype JSON (omit to build per seed from --bank)");
  c->add_option("--layer", o_.layer, "Layer to classify at (default: last)");
  c->add_option("--seeds", o_.seeds, "Build prototypes for this many ladder seeds");
  c->add_option("--base-seed", o_.base_seed, "First seed of the ladder");
  c->add_option("--per-class", o_.per_class, "Samples per class when building, or 'all'");
  c->add_option("--predictions", o_.predictions, "Write per-sample predictions as JSONL");
  split(c);
  out(c, "Report path");
  format(c, "json");
  stamp(c);
  c->callback([this] { cmd_classify(); });

  auto* e = app.add_subcommand("exit", "Simulate early exiting under one policy");
  bank(e);
  e->add_option("--protos", o_.protos, "Prototype JSON (margin and fixed policies)");
  e->add_option("--probes", o_.probes, "Probe JSON (entropy and patience policies)");
  e->add_option("--policy", o_.policy, "margin, entropy, patience or fixed")
      ->check(CLI::IsMember({"margin", "entropy", "patience", "fixed"}));
  e->add_option("--delta", o_.delta, "Margin threshold");
  e->add_option("--tau", o_.tau, "Entropy threshold (nats)");
  e->add_option("--patience", o_.patience, "Consecutive agreeing layers");
  e->add_option("--layer", o_.layer, "Layer for the fixed policy");
  e->add_option("--min-layer", o_.min_layer, "First layer allowed to exit");
  e->add_option("--histogram-csv", o_.histogram_csv, "Write layer,proportion CSV");
  e->add_option("--outcomes", o_.outcomes, "Write per-sample outcomes as JSONL");
  e->add_flag("--keep-margins", o_.keep_margins, "Include per-layer margins in outcomes");
  split(e);
  out(e, "Report path");
  format(e, "json");
  stamp(e);
  e->callback([this] { cmd_exit(); });

  auto* sw = app.add_subcommand("sweep", "Margin policy over a grid of thresholds");
  bank(sw);
  sw->add_option("--protos", o_.protos, "Prototype JSON")->required();
  sw->add_option("--grid", o_.grid, "start:stop:step or a comma list");
  sw->add_option("--min-layer", o_.min_layer, "First layer allowed to exit");
  split(sw);
  out(sw, "Output path");
  format(sw, "csv");
  sw->callback([this] { cmd_sweep(); });

  auto* t = app.add_subcommand("transfer", "Cross-bank prototype transfer matrix");
  t->add_option("--bank", o_.named_banks, "name=path, repeat for each bank")->required();
  t->add_option("--per-class", o_.per_class, "Samples per class, or 'all'");
  t->add_option("--seed", o_.seed, "Sampling seed");
  t->add_option("--layer", o_.layer, "Layer (default: last)");
  out(t, "Output path");
  format(t, "csv");
  stamp(t);
  t->callback([this] { cmd_transfer(); });

  auto* se = app.add_subcommand("select", "Prototype sample-size selection experiment");
  bank(se);
  se->add_option("--sizes", o_.sizes, "Comma list of per-class sizes, ascending");
  se->add_option("--repeats", o_.repeats, "Draws per size");
  se->add_option("--base-seed", o_.base_seed, "Seed the repeat seeds derive from");
  se->add_option("--layer", o_.layer, "Layer (default: last)");
  out(se, "Output path");
  format(se, "csv");
  stamp(se);
  se->callback([this] { cmd_select(); });

  auto* pt = app.add_subcommand("probe-train", "Train per-layer linear probes");
  bank(pt);
  pt->add_option("--out", o_.out, "Probe JSON output")->required();
  pt->add_option("--epochs", o_.epochs, "Full-batch gradient steps");
  pt->add_option("--lr", o_.lr, "Learning rate");
  pt->add_option("--seed", o_.seed, "Seed recorded with the probes");
  pt->add_option("--layers", o_.layers, "Layers, e.g. 'all' or '1-12'");
  pt->callback([this] { cmd_probe_train(); });

  auto* pe = app.add_subcommand("probe-eval", "Per-layer probe accuracy, or a probe exit policy");
  bank(pe);
  pe->add_option("--probes", o_.probes, "Probe JSON")->required();
  pe->add_option("--policy", o_.policy, "entropy or patience (omit for the per-layer table)")
      ->check(CLI::IsMember({"entropy", "patience"}));
  pe->add_option("--tau", o_.tau, "Entropy threshold (nats)");
  pe->add_option("--patience", o_.patience, "Consecutive agreeing layers");
  pe->add_option("--min-layer", o_.min_layer, "First layer allowed to exit");
  split(pe);
  out(pe, "Output path");
  format(pe, "json");
  stamp(pe);
  pe->callback([this] { cmd_probe_eval(); });

  auto* tt = app.add_subcommand("ttest", "Two-sided paired t-test");
  tt->add_option("--a", o_.a, "Comma list of values, or @file with one value per line");
  tt->add_option("--b", o_.b, "Comma list of values, or @file");
  tt->add_option("--report-a", o_.report_a, "Report JSON whose per-seed metric is sample a");
  tt->add_option("--report-b", o_.report_b, "Report JSON whose per-seed metric is sample b");
  tt->add_option("--metric", o_.metric, "macro_f1 or accuracy (with --report-*)")
      ->check(CLI::IsMember({"macro_f1", "accuracy"}));
  out(tt, "Output path");
  tt->callback([this] { cmd_ttest(); });

  auto* r = app.add_subcommand("report", "Convert a report, or score a predictions file");
  r->add_option("--in", o_.in, "Report JSON to convert");
  bank(r, false);
  r->add_option("--predictions", o_.predictions,
                "JSONL of {sample_id, label} predictions scored against --bank");
  split(r);
  out(r, "Output path");
  format(r, "json");
  r->callback([this] { cmd_report(); });

  auto* sy = app.add_subcommand("synth", "Write a synthetic two-Gaussian bank and sidecar");
  sy->add_option("--out", o_.out, "Bank output path")->required();
  sy->add_option("--layers", o_.syn_layers, "Layer count");
  sy->add_option("--dim", o_.syn_dim, "Hidden dimension");
  sy->add_option("--train-per-class", o_.syn_train, "Train samples per class");
  sy->add_option("--test-per-class", o_.syn_test, "Test samples per class");
  sy->add_option("--separation", o_.syn_sep, "Class-mean distance at the last layer, in sigmas");
  sy->add_option("--sigma", o_.syn_sigma, "Noise standard deviation");
  sy->add_option("--offset", o_.syn_offset, "Norm of a shared per-layer offset");
  sy->add_option("--seed", o_.seed, "Generator seed");
  sy->add_option("--source", o_.source, "Source name written to metadata");
  sy->add_option("--categories", o_.syn_categories, "Comma list assigned round-robin");
  sy->add_flag("--swap", o_.syn_swap, "Swap the class means");
  sy->callback([this] { cmd_synth(); });

  for (auto* sub : app.get_subcommands({}))
    sub->parse_complete_callback([this, sub] {
      active_ = sub;
      if (threads_ == 0) threads_ = threads_from_env().value_or(0);
      set_threads(threads_);
    });
}

void Runner::cmd_validate() {
  const EmbeddingBank raw = read_bank(o_.bank, false);
  EmbeddingBank bank = raw;
  const std::string meta = o_.meta.empty() ? meta_path_for(o_.bank).string() : o_.meta;
  if (!o_.meta.empty() || std::filesystem::exists(meta))
    for (auto& m : read_meta(meta)) bank.meta.emplace(m.sample_id, std::move(m));
  const auto problems = validate_bank(bank);
  for (const auto& p : problems) out_ << "violation: " << p << '\n';
  if (!problems.empty())
    throw ValidationError(std::to_string(problems.size()) + " violation(s) in " + o_.bank);
  out_ << "ok: " << bank.size() << " samples, " << bank.num_layers() << " layers, dim "
       << bank.dim() << ", " << bank.meta.size() << " metadata rows\n";
}

void Runner::cmd_build() {
  const auto bank = read_bank(o_.bank);
  const auto layers = parse_layers(o_.layers);
  const auto protos = build_prototypes(bank, layers, parse_per_class(o_.per_class), o_.seed,
                                       o_.source.empty() ? o_.bank : o_.source);
  for (int c = 0; c < 2; ++c) {
    const auto want = protos.info().per_class;
    if (want && protos.info().effective_counts[c] < *want)
      err_ << "warning: class " << c << " has only " << protos.info().effective_counts[c]
           << " train samples (requested " << *want << ")\n";
  }
  save_prototypes(protos, o_.out);
}

void Runner::cmd_classify() {
  const auto bank = read_bank(o_.bank);
  const auto eval = select_split(bank, o_.split);
  const auto labels = labels_of(eval);

  std::vector<PrototypeBank> protos;
  std::vector<std::uint64_t> seeds;
  if (!o_.protos.empty()) {
    if (o_.seeds > 0) throw ValidationError("--protos and --seeds are mutually exclusive");
    protos.push_back(load_prototypes(o_.protos));
    seeds.push_back(protos.back().info().seed);
  } else {
    seeds = seed_ladder(o_.base_seed, o_.seeds == 0 ? 1 : o_.seeds);
    const auto per_class = parse_per_class(o_.per_class);
    for (auto s : seeds) protos.push_back(build_prototypes(bank, {}, per_class, s, o_.bank));
  }
  const std::optional<std::uint32_t> layer =
      o_.layer ? std::optional<std::uint32_t>(o_.layer) : std::nullopt;

  EvaluationReport report;
  std::vector<std::uint8_t> first_preds;
  for (std::size_t i = 0; i < protos.size(); ++i) {
    const auto ev = evaluate_prototypes(eval, protos[i], layer);
    if (i == 0) {
      report = make_report(labels, ev.predictions);
      first_preds = ev.predictions;
    }
    report.per_seed_accuracy.push_back(ev.accuracy);
    report.per_seed_macro_f1.push_back(ev.macro_f1);
  }
  report.seeds_used = seeds;
  report.per_group_accuracy = group_accuracy_if_tagged(eval, first_preds);
  report.config = config();
  emit(report);

  if (!o_.predictions.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < eval.size(); ++i)
      os << json{{"sample_id", eval.records[i].sample_id},
                 {"label", eval.records[i].label},
                 {"prediction", first_preds[i]}}
                .dump()
         << '\n';
    write_text(o_.predictions, os.str(), out_);
  }
}

void Runner::cmd_exit() {
  const auto bank = read_bank(o_.bank);
  const auto eval = select_split(bank, o_.split);
  std::optional<PrototypeBank> protos;
  std::optional<ProbeSet> probes;
  if (!o_.protos.empty()) protos = load_prototypes(o_.protos);
  if (!o_.probes.empty()) probes = load_probes(o_.probes);

  ExitPolicy policy;
  if (o_.policy == "margin") policy = ExitPolicy::margin(o_.delta);
  if (o_.policy == "entropy") policy = ExitPolicy::entropy(o_.tau);
  if (o_.policy == "patience") policy = ExitPolicy::patience(o_.patience);
  if (o_.policy == "fixed")
    policy = ExitPolicy::fixed_layer(o_.layer ? o_.layer : bank.num_layers());
  policy.min_layer = o_.min_layer;

  const PolicyResources res{protos ? &*protos : nullptr, probes ? &*probes : nullptr};
  const auto outcomes = run_policy(eval, res, policy, {o_.keep_margins});
  const auto preds = predicted_labels(outcomes);

  auto report = make_report(labels_of(eval), preds);
  report.avg_exit_layer = average_exit_layer(outcomes);
  report.speedup = speedup(bank.num_layers(), *report.avg_exit_layer);
  report.exit_histogram = exit_histogram(outcomes, bank.num_layers());
  report.per_group_accuracy = group_accuracy_if_tagged(eval, preds);
  if (protos) report.seeds_used = {protos->info().seed};
  report.config = config();
  report.config["policy"] = policy.name();
  emit(report);

  if (!o_.histogram_csv.empty())
    write_text(o_.histogram_csv, histogram_csv(*report.exit_histogram), out_);
  if (!o_.outcomes.empty()) {
    std::ostringstream os;
    for (const auto& o : outcomes) {
      json j = {{"sample_id", o.sample_id},
                {"prediction", o.label},
                {"exit_layer", o.exit_layer},
                {"exited_early", o.exited_early}};
      if (o_.keep_margins) j["margins"] = o.per_layer_margins;
      os << j.dump() << '\n';
    }
    write_text(o_.outcomes, os.str(), out_);
  }
}

void Runner::cmd_sweep() {
  const auto bank = read_bank(o_.bank);
  const auto eval = select_split(bank, o_.split);
  const auto protos = load_prototypes(o_.protos);
  const auto grid = parse_grid(o_.grid);
  const auto points = delta_sweep(eval, protos, grid, o_.min_layer);
  if (parse_report_format(format_or("csv")) == ReportFormat::kCsv) {
    write_text(o_.out, sweep_csv(points), out_);
  } else {
    write_text(o_.out, emit_json({{"config", config()}, {"points", to_json(std::span(points))}}),
               out_);
  }
}

void Runner::cmd_transfer() {
  std::vector<std::string> names;
  std::vector<EmbeddingBank> banks;
  for (const auto& spec : o_.named_banks) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw ValidationError("--bank expects name=path, got '" + spec + "'");
    names.push_back(spec.substr(0, eq));
    banks.push_back(read_bank(spec.substr(eq + 1)));
  }
  std::vector<NamedBank> named;
  for (std::size_t i = 0; i < banks.size(); ++i) named.push_back({names[i], &banks[i]});
  TransferOptions opts;
  opts.per_class = parse_per_class(o_.per_class);
  opts.seed = o_.seed;
  if (o_.layer) opts.layer = o_.layer;
  const auto cells = transfer_matrix(named, opts);
  if (parse_report_format(format_or("csv")) == ReportFormat::kCsv) {
    write_text(o_.out, transfer_csv(cells), out_);
  } else {
    write_text(o_.out, emit_json({{"config", config()}, {"cells", to_json(std::span(cells))}}),
               out_);
  }
}

void Runner::cmd_select() {
  const auto bank = read_bank(o_.bank);
  std::vector<std::uint64_t> sizes;
  for (const auto& s : split_list(o_.sizes)) sizes.push_back(parse_u64(s, "size"));
  SelectionOptions opts;
  opts.repeats = o_.repeats;
  opts.base_seed = o_.base_seed;
  if (o_.layer) opts.layer = o_.layer;
  const auto results = selection_experiment(bank, sizes, opts);
  for (const auto& r : results)
    if (r.clamped)
      err_ << "warning: size " << r.size << " exceeds a class population; clamped\n";
  if (parse_report_format(format_or("csv")) == ReportFormat::kCsv) {
    write_text(o_.out, selection_csv(results), out_);
  } else {
    write_text(o_.out,
               emit_json({{"config", config()}, {"results", to_json(std::span(results))}}), out_);
  }
}

void Runner::cmd_probe_train() {
  const auto bank = read_bank(o_.bank);
  const auto set = train_probes(bank, parse_layers(o_.layers), {o_.epochs, o_.lr, o_.seed});
  save_probes(set, o_.out);
}

void Runner::cmd_probe_eval() {
  const auto bank = read_bank(o_.bank);
  const auto eval = select_split(bank, o_.split);
  const auto probes = load_probes(o_.probes);
  if (probes.num_layers != bank.num_layers() || probes.dim != bank.dim())
    throw ValidationError("probes do not match the bank's layer count and dimension");
  const auto labels = labels_of(eval);

  if (!o_.policy.empty() && o_.policy != "margin") {
    ExitPolicy policy = o_.policy == "entropy" ? ExitPolicy::entropy(o_.tau)
                                               : ExitPolicy::patience(o_.patience);
    policy.min_layer = o_.min_layer;
    const auto outcomes = run_policy(eval, {nullptr, &probes}, policy);
    const auto preds = predicted_labels(outcomes);
    auto report = make_report(labels, preds);
    report.avg_exit_layer = average_exit_layer(outcomes);
    report.speedup = speedup(bank.num_layers(), *report.avg_exit_layer);
    report.exit_histogram = exit_histogram(outcomes, bank.num_layers());
    report.config = config();
    report.config["policy"] = policy.name();
    emit(report);
    return;
  }

  json rows = json::array();
  std::ostringstream csv;
  csv << "layer,accuracy,macro_f1\n";
  for (const auto& [layer, probe] : probes.probes) {
    std::vector<std::uint8_t> preds;
    for (const auto& r : eval.records)
      preds.push_back(static_cast<std::uint8_t>(probe_predict(probe, r.layer(layer, eval.dim()))));
    const auto c = confusion(labels, preds);
    rows.push_back({{"layer", layer}, {"accuracy", accuracy(c)}, {"macro_f1", macro_f1(c)}});
    csv << layer << ',' << format_percent(accuracy(c)) << ',' << format_percent(macro_f1(c))
        << '\n';
  }
  if (parse_report_format(format_or("json")) == ReportFormat::kCsv)
    write_text(o_.out, csv.str(), out_);
  else
    write_text(o_.out, emit_json({{"config", config()}, {"layers", rows}}), out_);
}

std::vector<double> read_values(const std::string& spec) {
  std::vector<double> out;
  if (!spec.empty() && spec[0] == '@') {
    std::ifstream in(spec.substr(1));
    if (!in) throw FormatError("cannot open " + spec.substr(1));
    for (std::string line; std::getline(in, line);) {
      for (const auto& item : split_list(line))
        if (item.find_first_not_of(" \t\r") != std::string::npos)
          out.push_back(parse_double(item, "value"));
    }
    return out;
  }
  for (const auto& item : split_list(spec)) out.push_back(parse_double(item, "value"));
  return out;
}

std::vector<double> report_metric(const std::string& path, const std::string& metric) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("cannot parse " + path + ": " + e.what());
  }
  const auto r = report_from_json(j);
  return metric == "accuracy" ? r.per_seed_accuracy : r.per_seed_macro_f1;
}

void Runner::cmd_ttest() {
  std::vector<double> a, b;
  if (!o_.report_a.empty() || !o_.report_b.empty()) {
    if (o_.report_a.empty() || o_.report_b.empty())
      throw ValidationError("--report-a and --report-b go together");
    a = report_metric(o_.report_a, o_.metric);
    b = report_metric(o_.report_b, o_.metric);
  } else {
    if (o_.a.empty() || o_.b.empty()) throw ValidationError("ttest needs --a and --b");
    a = read_values(o_.a);
    b = read_values(o_.b);
  }
  const auto r = paired_t_test(a, b);
  auto num = [](double v) {
    if (std::isinf(v)) return json(v > 0 ? "inf" : "-inf");
    return json(v);
  };
  write_text(o_.out,
             emit_json({{"t", num(r.t)},
                        {"p", r.p},
                        {"n", r.n},
                        {"df", r.n - 1},
                        {"significant_at_0.01", r.p < 0.01}}),
             out_);
}

void Runner::cmd_report() {
  if (!o_.in.empty()) {
    std::ifstream in(o_.in);
    if (!in) throw FormatError("cannot open report " + o_.in);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw FormatError("cannot parse " + o_.in + ": " + e.what());
    }
    emit(report_from_json(j));
    return;
  }
  if (o_.bank.empty() || o_.predictions.empty())
    throw ValidationError("report needs --in, or --bank with --predictions");
  const auto eval = select_split(read_bank(o_.bank), o_.split);
  std::map<std::uint64_t, std::uint8_t> predicted;
  std::ifstream in(o_.predictions);
  if (!in) throw FormatError("cannot open predictions " + o_.predictions);
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      const auto value = j.contains("prediction") ? j["prediction"] : j.at("label");
      const auto label = value.get<int>();
      if (label != 0 && label != 1) throw FormatError("label not in {0,1}");
      predicted[j.at("sample_id").get<std::uint64_t>()] = static_cast<std::uint8_t>(label);
    } catch (const std::exception& e) {
      throw FormatError("bad prediction at " + o_.predictions + ":" + std::to_string(lineno) +
                        ": " + e.what());
    }
  }
  std::vector<std::uint8_t> preds;
  for (const auto& r : eval.records) {
    auto it = predicted.find(r.sample_id);
    if (it == predicted.end())
      throw ValidationError("no prediction for sample " + std::to_string(r.sample_id));
    preds.push_back(it->second);
  }
  auto report = make_report(labels_of(eval), preds);
  report.per_group_accuracy = group_accuracy_if_tagged(eval, preds);
  report.config = config();
  emit(report);
}

void Runner::cmd_synth() {
  synth::GaussianSpec spec;
  spec.num_layers = o_.syn_layers;
  spec.dim = o_.syn_dim;
  spec.train_per_class = o_.syn_train;
  spec.test_per_class = o_.syn_test;
  spec.separation = o_.syn_sep;
  spec.sigma = o_.syn_sigma;
  spec.offset_norm = o_.syn_offset;
  spec.swap_classes = o_.syn_swap;
  spec.categories = split_list(o_.syn_categories);
  spec.source = o_.source;
  spec.seed = o_.seed;
  const auto bank = synth::gaussian_bank(spec);
  write_bank(bank, o_.out);
  write_meta(bank, meta_path_for(o_.out));
}

int Runner::run(const std::vector<std::string>& args) {
  CLI::App app{"Prototype-based hate-speech classification and early-exit engine", "hproto"};
  setup(app);
  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out_, err_);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out_, err_);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err_ << "error: usage: " << msg << '\n';
    const CLI::App* sub = active_;
    for (const auto* s : app.get_subcommands()) sub = s;
    err_ << (sub ? sub->help() : app.help());
    return kExitValidation;
  } catch (const ValidationError& e) {
    err_ << "error: validation: " << e.what() << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    err_ << "error: format: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    err_ << "error: io: " << e.what() << '\n';
    return kExitFormat;
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(args);
}

}  // namespace hproto::cli
