#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crygcn/config.hpp"
#include "crygcn/dataset.hpp"
#include "crygcn/gcn.hpp"

namespace crygcn {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;  // [actual][predicted]

struct Metrics {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> per_class_recall;  // 0 for classes absent from the evaluated set
  std::size_t total = 0;
};

/// `predicted` and `actual` are indexed by the same node ids; only
/// `eval_indices` are scored.
Metrics compute_metrics(std::span<const int> predicted, const LabelVector& actual,
                        std::span<const std::size_t> eval_indices);

struct ExperimentReport {
  std::string protocol;  // "semi_supervised", "supervised" or "cross_validation"
  Mode mode = Mode::SemiSupervised;
  std::string train_test;  // e.g. "80:20"
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> per_class_recall;
  std::vector<std::string> class_names;
  std::size_t evaluated = 0;
  std::size_t graphs_built = 0;
  std::vector<std::size_t> evaluated_nodes;  // dataset indices, in evaluation order
  std::vector<double> train_accuracy;        // per fold, on the labeled nodes
  std::vector<TrainingTrace> traces;         // filled when record_traces is set
  std::string fingerprint;
  nlohmann::json config;
};

/// One graph over every node; loss on `mask`, accuracy on the rest.
ExperimentReport run_semi_supervised(const FeatureMatrix& features, const LabelVector& labels,
                                     const LabelMask& mask, const ExperimentConfig& config);

/// Separate training and testing graphs; the trained weights are applied
/// unchanged to the testing graph.
ExperimentReport run_supervised(const FeatureMatrix& features, const LabelVector& labels,
                                std::span<const std::size_t> train_indices,
                                std::span<const std::size_t> test_indices, const ExperimentConfig& config);

/// Stratified k-fold: each fold in turn is the test (or unlabeled) set.
ExperimentReport cross_validate(const FeatureMatrix& features, const LabelVector& labels,
                                const ExperimentConfig& config);

struct SweepRow {
  double ratio = 0.0;
  Mode mode = Mode::SemiSupervised;
  std::vector<double> accuracies;  // one per seed
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;       // sample standard deviation; 0 for a single seed
};

struct SweepReport {
  std::vector<SweepRow> rows;  // ordered by mode, then ratio
  std::string fingerprint;
  nlohmann::json config;
};

SweepReport ratio_sweep(const FeatureMatrix& features, const LabelVector& labels, const ExperimentConfig& config);

/// "80:20" style label for a training fraction.
std::string train_test_label(double train_fraction);

/// Plain-text table with Model, Train:Test, Accuracy and Improvement columns.
std::string format_table(const ExperimentReport& report, std::optional<double> baseline);
std::string format_table(const SweepReport& report, std::optional<double> baseline);

/// Loads or generates the dataset described by `config.data`.
Dataset load_dataset(const ExperimentConfig& config);

}  // namespace crygcn
