#include "mci/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <tuple>

#include "mci/data.hpp"
#include "mci/dependence.hpp"
#include "mci/discrepancy.hpp"
#include "mci/errors.hpp"
#include "mci/indicator.hpp"
#include "mci/numeric_text.hpp"
#include "mci/trainer.hpp"

namespace mci {

namespace {

using json = nlohmann::json;

std::vector<std::string_view> split(std::string_view text, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(delimiter, start);
    out.push_back(trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Thrown for option combinations CLI11 cannot express; maps to exit 2.
struct UsageError : Error {
  using Error::Error;
};

// ----------------------------------------------------------------------------
// Data resolution

struct DataOptions {
  std::string input;
  std::string synthetic;
  std::string delimiter = ",";
  std::optional<int> classes;
  std::optional<int> per_class;
  std::optional<int> dim;
  std::optional<double> shift;
  std::optional<double> angle;
  std::optional<double> noise;
  std::optional<int> sources;
  std::optional<double> separation;
  std::optional<double> offset;
  std::optional<double> tilt;
};

const std::vector<std::string> kScenarios = {"shifted-blobs", "rotated-moons", "chain-ci",
                                             "chain-dep"};

void add_data_options(CLI::App* app, DataOptions& o, bool allow_input) {
  auto* syn = app->add_option("--synthetic", o.synthetic, "Synthetic scenario")
                  ->check(CLI::IsMember(kScenarios));
  if (allow_input) {
    auto* in = app->add_option("--input", o.input, "Feature file (f0..f{d-1},label,domain)");
    in->excludes(syn);
    app->add_option("--delimiter", o.delimiter, "Feature file delimiter")->capture_default_str();
  }
  app->add_option("--classes", o.classes, "Number of classes");
  app->add_option("--per-class", o.per_class, "Samples per class per domain");
  app->add_option("--dim", o.dim, "Input dimension");
  app->add_option("--shift", o.shift, "Target shift in noise standard deviations (blobs)");
  app->add_option("--angle", o.angle, "Target rotation in radians (moons)");
  app->add_option("--noise", o.noise, "Noise standard deviation");
  app->add_option("--sources", o.sources, "Number of source domains");
  app->add_option("--separation", o.separation, "Class mean spacing in noise standard deviations");
  app->add_option("--offset", o.offset, "Domain offset in noise standard deviations (chain-dep)");
  app->add_option("--tilt", o.tilt, "Class prior tilt between domains (chain)");
}

SyntheticSpec scenario_spec(const DataOptions& o, std::uint64_t seed) {
  SyntheticSpec s;
  if (o.synthetic == "shifted-blobs") {
    s.kind = SyntheticKind::ShiftedBlobs;
  } else if (o.synthetic == "rotated-moons") {
    s.kind = SyntheticKind::RotatedMoons;
    s.classes = 2;
    s.samples_per_class_per_domain = 100;
    s.noise_sd = 0.1;
  } else {
    s.kind = SyntheticKind::ConditionalChain;
    s.classes = 2;
    s.samples_per_class_per_domain = 150;
    s.class_separation = 3.0;
    s.chain_mode = o.synthetic == "chain-dep" ? ChainMode::Offset : ChainMode::Independent;
  }
  s.seed = seed;
  if (o.classes) s.classes = *o.classes;
  if (o.per_class) s.samples_per_class_per_domain = *o.per_class;
  if (o.dim) s.dim = *o.dim;
  if (o.shift) s.shift = *o.shift;
  if (o.angle) s.angle = *o.angle;
  if (o.noise) s.noise_sd = *o.noise;
  if (o.sources) s.num_sources = *o.sources;
  if (o.separation) s.class_separation = *o.separation;
  if (o.offset) s.offset = *o.offset;
  if (o.tilt) s.prior_tilt = *o.tilt;
  return s;
}

char delimiter_of(const DataOptions& o) {
  if (o.delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
  return o.delimiter.front();
}

void require_source(const DataOptions& o) {
  if (o.input.empty() && o.synthetic.empty()) {
    throw UsageError("one of --input or --synthetic is required");
  }
}

bool is_chain(const DataOptions& o) { return o.synthetic == "chain-ci" || o.synthetic == "chain-dep"; }

LabeledDataset resolve_dataset(const DataOptions& o, std::uint64_t seed) {
  require_source(o);
  if (!o.input.empty()) return load_features(std::filesystem::path(o.input), delimiter_of(o));
  if (is_chain(o)) throw UsageError("--synthetic " + o.synthetic + " is not an adaptation scenario");
  return make_synthetic(scenario_spec(o, seed));
}

json spec_json(const SyntheticSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["classes"] = s.classes;
  j["samples_per_class_per_domain"] = s.samples_per_class_per_domain;
  j["dim"] = s.dim;
  j["noise_sd"] = s.noise_sd;
  j["num_sources"] = s.num_sources;
  j["class_separation"] = s.class_separation;
  switch (s.kind) {
    case SyntheticKind::ShiftedBlobs: j["shift"] = s.shift; break;
    case SyntheticKind::RotatedMoons: j["angle"] = s.angle; break;
    case SyntheticKind::ConditionalChain:
      j["chain_mode"] = to_string(s.chain_mode);
      j["prior_tilt"] = s.prior_tilt;
      if (s.chain_mode == ChainMode::Offset) j["offset"] = s.offset;
      break;
  }
  return j;
}

json data_json(const DataOptions& o, std::uint64_t seed) {
  if (!o.input.empty()) return json{{"input", o.input}, {"delimiter", o.delimiter}};
  json j = spec_json(scenario_spec(o, seed));
  j["scenario"] = o.synthetic;
  return j;
}

// ----------------------------------------------------------------------------
// Report plumbing

struct Report {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  json config;
  json results;
  double wall_time = 0.0;

  json to_json() const {
    return json{{"command", command}, {"argv", argv},       {"seed", seed},
                {"config", config},   {"results", results}, {"wall_time_seconds", wall_time}};
  }
};

void emit(const Report& report, const std::string& out_path, std::ostream& out) {
  const std::string text = report.to_json().dump(2) + "\n";
  std::filesystem::path target;
  if (!out_path.empty()) {
    target = out_path;
  } else if (const char* dir = std::getenv(kReportDirEnv); dir != nullptr && *dir != '\0') {
    target = std::filesystem::path(dir) / (report.command + "-report.json");
  }
  if (target.empty()) {
    out << text;
    return;
  }
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  std::ofstream file(target, std::ios::binary);
  if (!file) throw InputError("cannot write report to " + target.string());
  file << text;
  if (!file) throw InputError("failed while writing " + target.string());
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json dependence_json(const DependenceReport& r) {
  json j{{"kind", to_string(r.kind)},
         {"statistic", r.statistic},
         {"n", r.n},
         {"epsilon", r.epsilon},
         {"permutations", r.permutations},
         {"p_value", nullable(r.permutation_pvalue)}};
  if (r.kind == DependenceKind::PerClassNocco) {
    json rows = json::array();
    for (const auto& c : r.per_class) {
      rows.push_back({{"label", c.label}, {"n", c.n}, {"weight", c.weight}, {"statistic", c.statistic}});
    }
    j["per_class"] = rows;
    j["skipped_classes"] = r.skipped_classes;
  }
  return j;
}

json losses_json(const LossBreakdown& l) {
  return json{{"ce", l.ce},         {"cond", l.cond},   {"ent", l.ent},
              {"total", l.total},   {"beta1", l.beta1}, {"beta2", l.beta2}};
}

// ----------------------------------------------------------------------------
// measure

struct MeasureOptions {
  DataOptions data;
  std::string stat = "cond";
  double epsilon = 1e-5;
  int permutations = 0;
  std::uint64_t seed = 0;
  std::string bandwidth = "per-block";
  std::string out;
};

struct MeasureData {
  Matrix X;
  std::vector<int> domains;
  int num_domains = 0;
  std::optional<std::vector<int>> labels;
  int num_classes = 0;
};

MeasureData measure_data(const MeasureOptions& o) {
  MeasureData m;
  if (is_chain(o.data)) {
    ChainSample c = make_conditional_chain(scenario_spec(o.data, o.seed));
    m.X = std::move(c.vars.X);
    m.domains = std::move(c.domains);
    m.num_domains = 2;
    m.labels = std::move(c.classes);
    m.num_classes = static_cast<int>(c.vars.Y.rows());
    return m;
  }
  LabeledDataset ds = resolve_dataset(o.data, o.seed);
  m.X = ds.dataset.stacked().X;
  m.domains = ds.dataset.domain_ids();
  m.num_domains = ds.dataset.num_sources() + 1;
  m.num_classes = ds.dataset.num_classes();
  if (ds.truth.available()) {
    std::vector<int> labels;
    for (const auto& s : ds.dataset.sources) {
      const auto l = argmax_labels(s.Y);
      labels.insert(labels.end(), l.begin(), l.end());
    }
    labels.insert(labels.end(), ds.truth.labels.begin(), ds.truth.labels.end());
    m.labels = std::move(labels);
  }
  return m;
}

const std::vector<int>& require_labels(const MeasureData& m, const std::string& stat) {
  if (!m.labels) {
    throw InputError(stat + " needs a label for every sample, but the target is unlabeled");
  }
  return *m.labels;
}

json run_measure(const MeasureOptions& o, std::ostream& err) {
  require_source(o.data);
  if (o.permutations < 0) throw UsageError("--permutations must be >= 0");
  if (o.permutations > 0 && o.stat != "nocco" && o.stat != "cond") {
    throw UsageError("--permutations applies only to --stat nocco or cond");
  }
  const MeasureData m = measure_data(o);
  const Matrix Z = one_hot(m.domains, m.num_domains);
  const int target = m.num_domains - 1;
  const PermutationOptions perm{o.permutations, o.seed};

  json results;
  if (o.stat == "nocco") {
    const GramMatrix KX = gram(m.X, KernelConfig::fitted(m.X));
    const GramMatrix KZ = gram(Z, KernelConfig::fitted_or_unit(Z));
    const auto r = o.permutations > 0 ? nocco_test(KX, KZ, o.epsilon, perm) : nocco(KX, KZ, o.epsilon);
    results = dependence_json(r);
  } else if (o.stat == "cond") {
    const auto& labels = require_labels(m, o.stat);
    const auto mode =
        o.bandwidth == "shared" ? ExtendedBandwidth::Shared : ExtendedBandwidth::PerBlock;
    const CondGrams g = build_cond_grams(CondVariables{m.X, one_hot(labels, m.num_classes), Z}, mode);
    const auto r = o.permutations > 0 ? cond_test(g.KXt, g.KZt, g.KY, labels, o.epsilon, perm)
                                      : cond(g.KXt, g.KZt, g.KY, o.epsilon);
    results = dependence_json(r);
  } else if (o.stat == "per-class-nocco") {
    const auto& labels = require_labels(m, o.stat);
    const GramMatrix KX = gram(m.X, KernelConfig::fitted(m.X));
    const GramMatrix KZ = gram(Z, KernelConfig::fitted_or_unit(Z));
    results = dependence_json(per_class_nocco(KX, KZ, labels, m.domains, o.epsilon));
  } else {
    std::vector<Index> src;
    std::vector<Index> tgt;
    for (std::size_t j = 0; j < m.domains.size(); ++j) {
      (m.domains[j] == target ? tgt : src).push_back(static_cast<Index>(j));
    }
    const Matrix XS = m.X(Eigen::all, src);
    const Matrix XT = m.X(Eigen::all, tgt);
    if (o.stat == "mmd") {
      results = json{{"kind", "mmd"}, {"statistic", mmd_pooled_bandwidth(XS, XT)},
                     {"n_source", XS.cols()}, {"n_target", XT.cols()}};
    } else {
      AdistanceReport r;
      if (m.labels) {
        std::vector<int> ys;
        std::vector<int> yt;
        for (Index j : src) ys.push_back((*m.labels)[j]);
        for (Index j : tgt) yt.push_back((*m.labels)[j]);
        r = a_distance(XS, ys, XT, yt, o.seed);
      } else {
        r = a_distance(XS, XT, o.seed);
      }
      json rows = json::array();
      for (const auto& c : r.per_class) {
        rows.push_back({{"label", c.label}, {"n", c.n}, {"d_A", c.d_A},
                        {"classifier_test_error", c.classifier_test_error}});
      }
      results = json{{"kind", "a-distance"},
                     {"statistic", r.d_A},
                     {"classifier_test_error", r.classifier_test_error},
                     {"d_A_C", nullable(r.d_A_C)},
                     {"per_class", rows},
                     {"skipped_classes", r.skipped_classes}};
    }
  }
  err << "measure: " << o.stat << " = " << format_double(results["statistic"].get<double>());
  if (results.contains("p_value") && !results["p_value"].is_null()) {
    err << " (p = " << format_double(results["p_value"].get<double>()) << ")";
  }
  err << "\n";
  return results;
}

// ----------------------------------------------------------------------------
// train and sweep

struct TrainOptions {
  DataOptions data;
  TrainConfig config;
  std::string pseudo_labels = "hard";
  int trials = 1;
  bool baseline = false;
  bool trace = false;
  std::string model_out;
  std::string out;
};

void add_train_options(CLI::App* app, TrainOptions& o) {
  TrainConfig& c = o.config;
  app->add_option("--beta1", c.beta1, "Weight of the conditional dependence term")->capture_default_str();
  app->add_option("--beta2", c.beta2, "Weight of the target entropy term")->capture_default_str();
  app->add_option("--epsilon", c.epsilon, "Regularization of the normalized Grams")->capture_default_str();
  app->add_option("--pretrain-epochs", c.pretrain_epochs, "Source-only epochs")->capture_default_str();
  app->add_option("--adapt-epochs", c.adapt_epochs, "Adaptation epochs")->capture_default_str();
  app->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  app->add_option("--hidden", c.hidden_dim, "Hidden width of g")->capture_default_str();
  app->add_option("--feature-dim", c.feature_dim, "Output width of g")->capture_default_str();
  app->add_option("--pseudo-labels", o.pseudo_labels, "Pseudo-label mode")
      ->check(CLI::IsMember({"hard", "soft"}))
      ->capture_default_str();
  app->add_option("--trials", o.trials, "Trials; trial t uses seed + t")->capture_default_str();
  app->add_option("--seed", c.seed, "Base seed")->capture_default_str();
}

json config_json(const TrainConfig& c) {
  return json{{"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"pretrain_epochs", c.pretrain_epochs},
              {"adapt_epochs", c.adapt_epochs},
              {"learning_rate", c.learning_rate},
              {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
              {"hidden_dim", c.hidden_dim},
              {"feature_dim", c.feature_dim},
              {"pseudo_label_mode", to_string(c.pseudo_label_mode)},
              {"seed", c.seed}};
}

struct TrialOutcome {
  std::uint64_t seed = 0;
  std::optional<double> target_accuracy;
  std::optional<double> pretrained_accuracy;
  double source_accuracy = 0.0;
  LossBreakdown final_losses;
  double features_domain_nocco = 0.0;
  FitResult fit;
};

std::vector<int> source_labels(const AdaptationDataset& ds) {
  std::vector<int> labels;
  for (const auto& s : ds.sources) {
    const auto l = argmax_labels(s.Y);
    labels.insert(labels.end(), l.begin(), l.end());
  }
  return labels;
}

TrialOutcome run_trial(const DataOptions& data, TrainConfig config, int trial) {
  TrialOutcome t;
  t.seed = config.seed + static_cast<std::uint64_t>(trial);
  config.seed = t.seed;
  LabeledDataset ds = resolve_dataset(data, t.seed);
  t.fit = fit(ds.dataset, config);
  const StackedBatch batch = ds.dataset.stacked();
  if (ds.truth.available()) {
    t.target_accuracy = accuracy(t.fit.params, ds.dataset.target, ds.truth.labels);
    t.pretrained_accuracy = accuracy(t.fit.pretrained, ds.dataset.target, ds.truth.labels);
  }
  const Matrix Xs = batch.X.leftCols(batch.n_source);
  t.source_accuracy = accuracy(t.fit.params, Xs, source_labels(ds.dataset));
  t.final_losses = loss_total(t.fit.params, batch, t.fit.pseudo_labels, config.loss_settings());
  const Matrix F = forward_g(t.fit.params, batch.X);
  t.features_domain_nocco =
      nocco(gram(F, KernelConfig::fitted_or_unit(F)), gram(batch.Z, KernelConfig::fitted_or_unit(batch.Z)),
            config.epsilon)
          .statistic;
  return t;
}

struct Summary {
  std::optional<double> mean;
  std::optional<double> stderr_;
};

Summary summarize(const std::vector<std::optional<double>>& values) {
  std::vector<double> v;
  for (const auto& x : values) {
    if (x) v.push_back(*x);
  }
  if (v.empty()) return {};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double se = 0.0;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  }
  return {mean, se};
}

json trace_json(const TrainTrace& trace) {
  json rows = json::array();
  for (const auto& e : trace.epochs) {
    json row = losses_json(e.losses);
    row["epoch"] = e.epoch;
    row["phase"] = e.phase == TrainPhase::Pretrain ? "pretrain" : "adapt";
    rows.push_back(row);
  }
  return rows;
}

void finalize_config(TrainOptions& o) {
  o.config.pseudo_label_mode = o.pseudo_labels == "soft" ? PseudoLabelMode::Soft : PseudoLabelMode::Hard;
  if (o.trials < 1) throw UsageError("--trials must be >= 1");
  try {
    o.config.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

json run_train(TrainOptions& o, std::ostream& err) {
  finalize_config(o);
  require_source(o.data);
  TrainConfig base_cfg = o.config;
  base_cfg.beta1 = 0.0;
  base_cfg.beta2 = 0.0;

  json trials = json::array();
  std::vector<std::optional<double>> acc;
  std::vector<std::optional<double>> base_acc;
  std::vector<std::optional<double>> deltas;
  for (int t = 0; t < o.trials; ++t) {
    TrialOutcome r = run_trial(o.data, o.config, t);
    json row{{"seed", r.seed},
             {"target_accuracy", nullable(r.target_accuracy)},
             {"pretrained_target_accuracy", nullable(r.pretrained_accuracy)},
             {"source_accuracy", r.source_accuracy},
             {"final_losses", losses_json(r.final_losses)},
             {"features_domain_nocco", r.features_domain_nocco}};
    if (o.trace) row["trace"] = trace_json(r.fit.trace);
    acc.push_back(r.target_accuracy);
    if (o.baseline) {
      TrialOutcome b = run_trial(o.data, base_cfg, t);
      row["baseline_target_accuracy"] = nullable(b.target_accuracy);
      std::optional<double> delta;
      if (r.target_accuracy && b.target_accuracy) delta = *r.target_accuracy - *b.target_accuracy;
      row["delta_vs_baseline"] = nullable(delta);
      base_acc.push_back(b.target_accuracy);
      deltas.push_back(delta);
    }
    if (t == 0 && !o.model_out.empty()) save_model(o.model_out, r.fit.params);
    err << "train: trial " << t << " seed " << r.seed << " target accuracy "
        << (r.target_accuracy ? format_double(*r.target_accuracy) : std::string("n/a")) << "\n";
    trials.push_back(std::move(row));
  }
  const Summary s = summarize(acc);
  json results{{"trials", trials},
               {"mean_target_accuracy", nullable(s.mean)},
               {"stderr_target_accuracy", nullable(s.stderr_)}};
  if (o.baseline) {
    const Summary b = summarize(base_acc);
    const Summary d = summarize(deltas);
    results["baseline"] = json{{"mean_target_accuracy", nullable(b.mean)},
                               {"stderr_target_accuracy", nullable(b.stderr_)},
                               {"mean_delta", nullable(d.mean)},
                               {"stderr_delta", nullable(d.stderr_)}};
  }
  if (s.mean) {
    err << "train: mean target accuracy " << format_double(*s.mean) << " +/- "
        << format_double(*s.stderr_) << "\n";
  }
  return results;
}

struct SweepOptions {
  TrainOptions train;
  std::string beta1_text = "1e-4,1e-3,1e-2,1e-1,1";
  std::string beta2_text = "5e-6,5e-5,5e-4,5e-3,5e-2,5e-1";
  std::string epsilon_text;
  std::vector<double> beta1_grid;
  std::vector<double> beta2_grid;
  std::vector<double> epsilon_grid;
};

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  for (std::string_view cell : split(text, ',')) {
    if (cell.empty()) continue;
    const auto v = parse_double(cell);
    if (!v || !std::isfinite(*v)) {
      throw UsageError(flag + ": '" + std::string(cell) + "' is not a number");
    }
    values.push_back(*v);
  }
  return values;
}

json run_sweep(SweepOptions& o, std::ostream& err) {
  finalize_config(o.train);
  require_source(o.train.data);
  o.beta1_grid = parse_grid(o.beta1_text, "--beta1-grid");
  o.beta2_grid = parse_grid(o.beta2_text, "--beta2-grid");
  o.epsilon_grid = parse_grid(o.epsilon_text, "--epsilon-grid");
  if (o.beta1_grid.empty() || o.beta2_grid.empty()) throw UsageError("sweep grids must be non-empty");
  if (o.epsilon_grid.empty()) o.epsilon_grid.push_back(o.train.config.epsilon);

  std::vector<std::tuple<double, double, double>> cells;
  for (double b1 : o.beta1_grid) {
    for (double b2 : o.beta2_grid) {
      for (double eps : o.epsilon_grid) cells.emplace_back(b1, b2, eps);
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  json rows = json::array();
  for (const auto& [b1, b2, eps] : cells) {
    TrainConfig cfg = o.train.config;
    cfg.beta1 = b1;
    cfg.beta2 = b2;
    cfg.epsilon = eps;
    try {
      cfg.validate();
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    std::vector<std::optional<double>> acc;
    std::vector<std::optional<double>> cond_values;
    std::vector<std::optional<double>> nocco_values;
    for (int t = 0; t < o.train.trials; ++t) {
      TrialOutcome r = run_trial(o.train.data, cfg, t);
      acc.push_back(r.target_accuracy);
      cond_values.push_back(r.final_losses.cond);
      nocco_values.push_back(r.features_domain_nocco);
    }
    const Summary s = summarize(acc);
    rows.push_back(json{{"beta1", b1},
                        {"beta2", b2},
                        {"epsilon", eps},
                        {"mean_target_accuracy", nullable(s.mean)},
                        {"stderr_target_accuracy", nullable(s.stderr_)},
                        {"mean_final_cond", nullable(summarize(cond_values).mean)},
                        {"mean_features_domain_nocco", nullable(summarize(nocco_values).mean)}});
    err << "sweep: beta1 " << format_double(b1) << " beta2 " << format_double(b2) << " epsilon "
        << format_double(eps) << " accuracy "
        << (s.mean ? format_double(*s.mean) : std::string("n/a")) << "\n";
  }
  return json{{"rows", rows}, {"cells", rows.size()}};
}

// ----------------------------------------------------------------------------
// generate

struct GenerateOptions {
  DataOptions data;
  std::uint64_t seed = 0;
  std::string out;
};

json run_generate(const GenerateOptions& o) {
  if (o.out.empty()) throw UsageError("generate needs --out");
  const SyntheticSpec spec = scenario_spec(o.data, o.seed);
  if (is_chain(o.data)) {
    ChainSample c = make_conditional_chain(spec);
    std::vector<int> ys;
    std::vector<Index> src;
    std::vector<Index> tgt;
    for (std::size_t j = 0; j < c.domains.size(); ++j) {
      (c.domains[j] == 0 ? src : tgt).push_back(static_cast<Index>(j));
      if (c.domains[j] == 0) ys.push_back(c.classes[j]);
    }
    TargetTruth truth;
    for (Index j : tgt) truth.labels.push_back(c.classes[j]);
    const AdaptationDataset ds = AdaptationDataset::single_source(
        c.vars.X(Eigen::all, src), one_hot(ys, spec.classes), c.vars.X(Eigen::all, tgt));
    write_features(std::filesystem::path(o.out), ds, truth);
    return json{{"path", o.out}, {"n", c.domains.size()}};
  }
  const LabeledDataset ds = make_synthetic(spec);
  write_features(std::filesystem::path(o.out), ds.dataset, ds.truth);
  return json{{"path", o.out}, {"n", ds.dataset.n()}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  CLI::App app{"Conditional-independence domain adaptation toolkit", "mci"};
  app.require_subcommand(1);

  MeasureOptions mo;
  auto* measure = app.add_subcommand("measure", "Dependence and discrepancy statistics");
  add_data_options(measure, mo.data, true);
  measure->add_option("--stat", mo.stat, "Statistic")
      ->check(CLI::IsMember({"nocco", "cond", "per-class-nocco", "mmd", "a-distance"}))
      ->capture_default_str();
  measure->add_option("--epsilon", mo.epsilon, "Regularization")->capture_default_str();
  measure->add_option("--permutations", mo.permutations, "Permutation replicates")->capture_default_str();
  measure->add_option("--seed", mo.seed, "Seed")->capture_default_str();
  measure->add_option("--bandwidth", mo.bandwidth, "Bandwidth of the extended (X, Y) and (Z, Y) kernels")
      ->check(CLI::IsMember({"per-block", "shared"}))
      ->capture_default_str();
  measure->add_option("--out", mo.out, "Report path");

  TrainOptions to;
  auto* train = app.add_subcommand("train", "Source pretraining followed by adaptation");
  add_data_options(train, to.data, true);
  add_train_options(train, to);
  train->add_flag("--baseline", to.baseline, "Also run beta1 = beta2 = 0 with the same seeds");
  train->add_flag("--trace", to.trace, "Include per-epoch losses");
  train->add_option("--model-out", to.model_out, "Save the first trial's model here");
  train->add_option("--out", to.out, "Report path");

  SweepOptions so;
  auto* sweep = app.add_subcommand("sweep", "Grid over beta1 x beta2 (x epsilon)");
  add_data_options(sweep, so.train.data, true);
  add_train_options(sweep, so.train);
  sweep->add_option("--beta1-grid", so.beta1_text, "Comma-separated beta1 values")->capture_default_str();
  sweep->add_option("--beta2-grid", so.beta2_text, "Comma-separated beta2 values")->capture_default_str();
  sweep->add_option("--epsilon-grid", so.epsilon_text, "Comma-separated epsilon values (default: --epsilon)");
  sweep->add_option("--out", so.train.out, "Report path");

  GenerateOptions go;
  auto* generate = app.add_subcommand("generate", "Write a synthetic scenario as a feature file");
  add_data_options(generate, go.data, false);
  generate->get_option("--synthetic")->required();
  generate->add_option("--seed", go.seed, "Seed")->capture_default_str();
  generate->add_option("--out", go.out, "Feature file path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front()) {
      err << sub->help();
    }
    return kExitUsage;
  }

  Report report;
  report.argv = args;
  std::string out_path;
  try {
    if (measure->parsed()) {
      report.command = "measure";
      report.seed = mo.seed;
      report.config = json{{"data", data_json(mo.data, mo.seed)},
                           {"stat", mo.stat},
                           {"epsilon", mo.epsilon},
                           {"permutations", mo.permutations},
                           {"bandwidth", mo.bandwidth}};
      report.results = run_measure(mo, err);
      out_path = mo.out;
    } else if (train->parsed()) {
      report.command = "train";
      report.results = run_train(to, err);
      report.seed = to.config.seed;
      report.config = json{{"data", data_json(to.data, to.config.seed)},
                           {"train", config_json(to.config)},
                           {"trials", to.trials},
                           {"baseline", to.baseline}};
      out_path = to.out;
    } else if (sweep->parsed()) {
      report.command = "sweep";
      report.results = run_sweep(so, err);
      report.seed = so.train.config.seed;
      report.config = json{{"data", data_json(so.train.data, so.train.config.seed)},
                           {"train", config_json(so.train.config)},
                           {"trials", so.train.trials},
                           {"beta1_grid", so.beta1_grid},
                           {"beta2_grid", so.beta2_grid},
                           {"epsilon_grid", so.epsilon_grid}};
      out_path = so.train.out;
    } else {
      report.command = "generate";
      report.seed = go.seed;
      report.config = json{{"data", data_json(go.data, go.seed)}};
      report.results = run_generate(go);
    }
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit(report, out_path, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitOk;
}

}  // namespace mci
