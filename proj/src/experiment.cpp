#include "crygcn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "crygcn/error.hpp"
#include "crygcn/rng.hpp"

namespace crygcn {

namespace {

struct RunOutcome {
  Metrics metrics;
  std::vector<std::size_t> evaluated_nodes;
  TrainingTrace trace;
};

FeatureMatrix prepared(const FeatureMatrix& features, const ExperimentConfig& config) {
  return config.standardize ? standardize(features) : features;
}

Hyperparams run_hyper(const ExperimentConfig& config, std::uint64_t run_seed) {
  Hyperparams h = config.hyper;
  h.seed = run_seed;
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_bytes(std::uint64_t h, const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint(std::string_view protocol, const nlohmann::json& config, const FeatureMatrix& features,
                        const LabelVector& labels, std::span<const std::size_t> extra = {}) {
  std::uint64_t h = fnv1a(protocol);
  const std::string cfg = config.dump();
  h = hash_bytes(h, cfg.data(), cfg.size());
  h = hash_bytes(h, features.values().data(), static_cast<std::size_t>(features.values().size()) * sizeof(double));
  h = hash_bytes(h, labels.labels().data(), labels.size() * sizeof(int));
  h = hash_bytes(h, extra.data(), extra.size() * sizeof(std::size_t));
  return hex64(mix64(h));
}

RunOutcome semi_supervised_run(const FeatureMatrix& features, const LabelVector& labels, const LabelMask& mask,
                               const ExperimentConfig& config, std::uint64_t run_seed) {
  if (mask.mask.size() != labels.size() || labels.size() != features.rows())
    fail(ErrorKind::ShapeError, "features, labels and mask must cover the same nodes");
  RunOutcome out;
  out.evaluated_nodes = mask.unlabeled_indices();
  if (out.evaluated_nodes.empty()) fail(ErrorKind::EmptyEvaluation, "every node is labeled; nothing to evaluate");
  if (mask.labeled_count == 0) fail(ErrorKind::EmptyMask, "label mask selects no nodes");

  GraphBundle g = build_graph(features, GraphMode::SemiSupervised, std::nullopt, config.graph);
  TrainResult trained = train(g.op, features, labels, mask, run_hyper(config, run_seed));
  const std::vector<int> predicted = predict(trained.model, g.op, features);
  out.metrics = compute_metrics(predicted, labels, out.evaluated_nodes);
  out.trace = std::move(trained.trace);
  return out;
}

void check_split(std::span<const std::size_t> train_indices, std::span<const std::size_t> test_indices,
                 std::size_t n) {
  if (train_indices.size() < 2 || test_indices.size() < 2)
    fail(ErrorKind::InvalidSplit, "training and testing sets need at least 2 nodes each");
  std::vector<char> seen(n, 0);
  for (std::size_t i : train_indices) {
    if (i >= n) fail(ErrorKind::InvalidSplit, "training index " + std::to_string(i) + " out of range");
    if (seen[i]) fail(ErrorKind::InvalidSplit, "duplicate training index " + std::to_string(i));
    seen[i] = 1;
  }
  for (std::size_t i : test_indices) {
    if (i >= n) fail(ErrorKind::InvalidSplit, "testing index " + std::to_string(i) + " out of range");
    if (seen[i]) fail(ErrorKind::InvalidSplit, "node " + std::to_string(i) + " is in both training and testing sets");
    seen[i] = 2;
  }
}

RunOutcome supervised_run(const FeatureMatrix& features, const LabelVector& labels,
                          std::span<const std::size_t> train_indices, std::span<const std::size_t> test_indices,
                          const ExperimentConfig& config, std::uint64_t run_seed) {
  if (labels.size() != features.rows()) fail(ErrorKind::ShapeError, "features and labels differ in length");
  check_split(train_indices, test_indices, features.rows());

  GraphBundle train_graph = build_graph(features, GraphMode::SupervisedTrain, train_indices, config.graph);
  const FeatureMatrix train_x = features.subset(train_indices);
  const LabelVector train_y = labels.subset(train_indices);
  const LabelMask all = LabelMask::from_bools(std::vector<bool>(train_indices.size(), true));
  TrainResult trained = train(train_graph.op, train_x, train_y, all, run_hyper(config, run_seed));

  GraphBundle test_graph = build_graph(features, GraphMode::SupervisedTest, test_indices, config.graph);
  const std::vector<int> local = predict(trained.model, test_graph.op, features.subset(test_indices));
  std::vector<int> predicted(features.rows(), -1);
  for (std::size_t t = 0; t < test_indices.size(); ++t) predicted[test_graph.graph.node_ids[t]] = local[t];

  RunOutcome out;
  out.evaluated_nodes.assign(test_indices.begin(), test_indices.end());
  out.metrics = compute_metrics(predicted, labels, out.evaluated_nodes);
  out.trace = std::move(trained.trace);
  return out;
}

std::vector<double> recall_from(const ConfusionMatrix& confusion) {
  std::vector<double> recall(confusion.size(), 0.0);
  for (std::size_t c = 0; c < confusion.size(); ++c) {
    const std::size_t row = std::accumulate(confusion[c].begin(), confusion[c].end(), std::size_t{0});
    if (row > 0) recall[c] = static_cast<double>(confusion[c][c]) / static_cast<double>(row);
  }
  return recall;
}

ExperimentReport single_run_report(std::string protocol, Mode mode, double train_fraction, RunOutcome outcome,
                                   std::size_t graphs, const LabelVector& labels, const ExperimentConfig& config) {
  ExperimentReport r;
  r.protocol = std::move(protocol);
  r.mode = mode;
  r.train_test = train_test_label(train_fraction);
  r.fold_accuracy = {outcome.metrics.accuracy};
  r.mean_accuracy = outcome.metrics.accuracy;
  r.confusion = std::move(outcome.metrics.confusion);
  r.per_class_recall = std::move(outcome.metrics.per_class_recall);
  r.class_names = labels.class_names();
  r.evaluated = outcome.metrics.total;
  r.graphs_built = graphs;
  r.evaluated_nodes = std::move(outcome.evaluated_nodes);
  r.train_accuracy = {outcome.trace.final_train_accuracy};
  if (config.record_traces) r.traces.push_back(std::move(outcome.trace));
  r.config = to_json(config);
  return r;
}

}  // namespace

Metrics compute_metrics(std::span<const int> predicted, const LabelVector& actual,
                        std::span<const std::size_t> eval_indices) {
  if (eval_indices.empty()) fail(ErrorKind::EmptyEvaluation, "no nodes to evaluate");
  if (predicted.size() != actual.size()) fail(ErrorKind::ShapeError, "prediction and label counts differ");
  const auto classes = static_cast<std::size_t>(actual.class_count());
  Metrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i : eval_indices) {
    if (i >= actual.size()) fail(ErrorKind::InvalidSplit, "evaluation index out of range");
    const int p = predicted[i];
    if (p < 0 || static_cast<std::size_t>(p) >= classes)
      fail(ErrorKind::ShapeError, "node " + std::to_string(i) + " has no valid prediction");
    ++m.confusion[static_cast<std::size_t>(actual[i])][static_cast<std::size_t>(p)];
    if (p == actual[i]) ++correct;
  }
  m.total = eval_indices.size();
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
  m.per_class_recall = recall_from(m.confusion);
  return m;
}

ExperimentReport run_semi_supervised(const FeatureMatrix& features, const LabelVector& labels,
                                     const LabelMask& mask, const ExperimentConfig& config) {
  const FeatureMatrix x = prepared(features, config);
  RunOutcome outcome = semi_supervised_run(x, labels, mask, config, derive_seed(config.seed, "run"));
  const double fraction = static_cast<double>(mask.labeled_count) / static_cast<double>(labels.size());
  ExperimentReport r =
      single_run_report("semi_supervised", Mode::SemiSupervised, fraction, std::move(outcome), 1, labels, config);
  std::vector<std::size_t> labeled = mask.labeled_indices();
  r.fingerprint = fingerprint(r.protocol, r.config, features, labels, labeled);
  return r;
}

ExperimentReport run_supervised(const FeatureMatrix& features, const LabelVector& labels,
                                std::span<const std::size_t> train_indices,
                                std::span<const std::size_t> test_indices, const ExperimentConfig& config) {
  const FeatureMatrix x = prepared(features, config);
  RunOutcome outcome =
      supervised_run(x, labels, train_indices, test_indices, config, derive_seed(config.seed, "run"));
  const double fraction = static_cast<double>(train_indices.size()) /
                          static_cast<double>(train_indices.size() + test_indices.size());
  ExperimentReport r =
      single_run_report("supervised", Mode::Supervised, fraction, std::move(outcome), 2, labels, config);
  std::vector<std::size_t> split(train_indices.begin(), train_indices.end());
  split.push_back(static_cast<std::size_t>(-1));
  split.insert(split.end(), test_indices.begin(), test_indices.end());
  r.fingerprint = fingerprint(r.protocol, r.config, features, labels, split);
  return r;
}

ExperimentReport cross_validate(const FeatureMatrix& features, const LabelVector& labels,
                                const ExperimentConfig& config) {
  if (!config.fold_count) fail(ErrorKind::InvalidConfig, "cross validation needs fold_count");
  if (labels.size() != features.rows()) fail(ErrorKind::ShapeError, "features and labels differ in length");
  const int folds = *config.fold_count;
  const FeatureMatrix x = prepared(features, config);
  const SplitPlan plan = make_folds(labels, folds, config.seed);

  ExperimentReport r;
  r.protocol = "cross_validation";
  r.mode = config.mode;
  r.train_test = train_test_label(static_cast<double>(folds - 1) / static_cast<double>(folds));
  r.class_names = labels.class_names();
  const auto classes = static_cast<std::size_t>(labels.class_count());
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  r.config = to_json(config);

  for (int f = 0; f < folds; ++f) {
    const std::uint64_t run_seed = derive_seed(config.seed, "run", static_cast<std::uint64_t>(f));
    const std::vector<std::size_t> test = plan.fold_members(f);
    const std::vector<std::size_t> train_nodes = plan.complement(f);
    RunOutcome outcome;
    if (config.mode == Mode::SemiSupervised) {
      std::vector<bool> m(labels.size(), true);
      for (std::size_t i : test) m[i] = false;
      outcome = semi_supervised_run(x, labels, LabelMask::from_bools(std::move(m)), config, run_seed);
      r.graphs_built += 1;
    } else {
      outcome = supervised_run(x, labels, train_nodes, test, config, run_seed);
      r.graphs_built += 2;
    }
    r.fold_accuracy.push_back(outcome.metrics.accuracy);
    r.train_accuracy.push_back(outcome.trace.final_train_accuracy);
    for (std::size_t a = 0; a < classes; ++a)
      for (std::size_t p = 0; p < classes; ++p) r.confusion[a][p] += outcome.metrics.confusion[a][p];
    r.evaluated += outcome.metrics.total;
    r.evaluated_nodes.insert(r.evaluated_nodes.end(), outcome.evaluated_nodes.begin(), outcome.evaluated_nodes.end());
    if (config.record_traces) r.traces.push_back(std::move(outcome.trace));
  }
  r.mean_accuracy = std::accumulate(r.fold_accuracy.begin(), r.fold_accuracy.end(), 0.0) /
                    static_cast<double>(r.fold_accuracy.size());
  r.per_class_recall = recall_from(r.confusion);
  r.fingerprint = fingerprint(r.protocol, r.config, features, labels);
  return r;
}

SweepReport ratio_sweep(const FeatureMatrix& features, const LabelVector& labels, const ExperimentConfig& config) {
  config.validate();
  if (labels.size() != features.rows()) fail(ErrorKind::ShapeError, "features and labels differ in length");
  const FeatureMatrix x = prepared(features, config);
  SweepReport report;
  report.config = to_json(config);
  for (Mode mode : config.sweep.modes) {
    for (double ratio : config.sweep.ratios) {
      SweepRow row;
      row.ratio = ratio;
      row.mode = mode;
      for (std::uint64_t seed : config.sweep.seeds) {
        const LabelMask mask = make_label_mask(labels, ratio, seed);
        const std::uint64_t run_seed = derive_seed(seed, "run");
        RunOutcome outcome = mode == Mode::SemiSupervised
                                 ? semi_supervised_run(x, labels, mask, config, run_seed)
                                 : supervised_run(x, labels, mask.labeled_indices(), mask.unlabeled_indices(),
                                                  config, run_seed);
        row.accuracies.push_back(outcome.metrics.accuracy);
      }
      const double count = static_cast<double>(row.accuracies.size());
      row.mean_accuracy = std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) / count;
      if (row.accuracies.size() > 1) {
        double ss = 0.0;
        for (double a : row.accuracies) ss += (a - row.mean_accuracy) * (a - row.mean_accuracy);
        row.std_accuracy = std::sqrt(ss / (count - 1.0));
      }
      report.rows.push_back(std::move(row));
    }
  }
  report.fingerprint = fingerprint("ratio_sweep", report.config, features, labels);
  return report;
}

std::string train_test_label(double train_fraction) {
  const long train = std::lround(train_fraction * 100.0);
  return std::to_string(train) + ":" + std::to_string(100 - train);
}

namespace {

std::string model_label(Mode mode) {
  return mode == Mode::Supervised ? "GCN (supervised)" : "GCN (semi-supervised)";
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
  return buf;
}

std::string improvement(double accuracy, std::optional<double> baseline) {
  if (!baseline) return "---";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f%%", 100.0 * (accuracy - *baseline));
  return buf;
}

std::string row(const std::vector<std::string>& cells, const std::vector<int>& widths) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string cell = cells[i];
    if (i + 1 < cells.size()) cell.resize(std::max<std::size_t>(cell.size(), static_cast<std::size_t>(widths[i])), ' ');
    out += cell;
    if (i + 1 < cells.size()) out += "  ";
  }
  return out + "\n";
}

}  // namespace

std::string format_table(const ExperimentReport& report, std::optional<double> baseline) {
  const std::vector<int> widths{22, 10, 9, 11};
  std::string out = row({"Model", "Train:Test", "Accuracy", "Improvement"}, widths);
  if (baseline) out += row({"Baseline", "---", percent(*baseline), "baseline"}, widths);
  out += row({model_label(report.mode), report.train_test, percent(report.mean_accuracy),
              improvement(report.mean_accuracy, baseline)},
             widths);
  return out;
}

std::string format_table(const SweepReport& report, std::optional<double> baseline) {
  const std::vector<int> widths{22, 10, 9, 11, 7};
  std::string out = row({"Model", "Train:Test", "Accuracy", "Improvement", "Std"}, widths);
  if (baseline) out += row({"Baseline", "---", percent(*baseline), "baseline", "---"}, widths);
  for (const auto& r : report.rows)
    out += row({model_label(r.mode), train_test_label(r.ratio), percent(r.mean_accuracy),
                improvement(r.mean_accuracy, baseline), percent(r.std_accuracy)},
               widths);
  return out;
}

Dataset load_dataset(const ExperimentConfig& config) {
  const auto& d = config.data;
  if (d.features || d.labels) {
    if (!d.features) fail(ErrorKind::InvalidConfig, "data.labels given without data.features");
    if (!d.labels) fail(ErrorKind::InvalidConfig, "data.features given without data.labels");
    FeatureMatrix x = load_features(*d.features);
    LabelVector y = load_labels(*d.labels);
    if (x.rows() != y.size())
      fail(ErrorKind::ShapeError, "feature file has " + std::to_string(x.rows()) + " rows but label file has " +
                                      std::to_string(y.size()));
    return Dataset{std::move(x), std::move(y)};
  }
  if (d.synth) return synth_blobs(*d.synth);
  fail(ErrorKind::InvalidConfig, "no dataset: set data.features/data.labels or data.synth");
}

}  // namespace crygcn
