#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "crygcn/dataset.hpp"
#include "crygcn/graph.hpp"
#include "crygcn/linalg.hpp"
#include "crygcn/rng.hpp"

namespace crygcn {

struct ModelDims {
  int input = 0;
  int hidden = 0;
  int classes = 0;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Two graph-convolution layers: H = ReLU(S X W1 + b1), P = softmax(S H W2 + b2).
struct GcnModel {
  Matrix w1;     // input x hidden
  RowVector b1;  // hidden
  Matrix w2;     // hidden x classes
  RowVector b2;  // classes

  ModelDims dims() const {
    return {static_cast<int>(w1.rows()), static_cast<int>(w1.cols()), static_cast<int>(w2.cols())};
  }
  bool operator==(const GcnModel& other) const;
};

enum class Optimizer { Adam, GradientDescent };

struct Hyperparams {
  int layers = 2;
  int hidden = 32;
  int epochs = 2000;
  double learning_rate = 0.001;
  double dropout = 0.1;
  double weight_decay = 0.0;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 0;
};

struct TrainingTrace {
  std::vector<double> loss;
  double final_train_accuracy = 0.0;
  double wall_seconds = 0.0;
};

/// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
  Matrix input;          // X after dropout
  Matrix hidden_pre;     // S X W1 + b1
  Matrix hidden_keep;    // inverted-dropout scale per hidden unit; empty in eval mode
  Matrix hidden;         // dropped ReLU output fed to the second layer
  Matrix logits;
  Matrix probabilities;
};

struct Gradients {
  Matrix w1;
  RowVector b1;
  Matrix w2;
  RowVector b2;
};

struct LossValue {
  double loss = 0.0;
  std::size_t count = 0;
};

struct TrainResult {
  GcnModel model;
  TrainingTrace trace;
};

GcnModel init_model(int input, int hidden, int classes, std::uint64_t seed);

/// Training mode when `dropout_rng` is supplied: inverted dropout at `dropout`
/// on the input of each layer. Eval mode otherwise.
ForwardCache forward(const PropagationOperator& op, const FeatureMatrix& features, const GcnModel& model,
                     Rng* dropout_rng = nullptr, double dropout = 0.0);

Matrix predict_proba(const GcnModel& model, const PropagationOperator& op, const FeatureMatrix& features);

std::vector<int> argmax_rows(const Matrix& scores);

std::vector<int> predict(const GcnModel& model, const PropagationOperator& op, const FeatureMatrix& features);

/// Mean negative log-likelihood over masked nodes, via log-sum-exp of logits.
LossValue masked_cross_entropy_logits(const Matrix& logits, const LabelVector& labels, const LabelMask& mask);

/// Same loss from probabilities (their logarithms are used as logits).
LossValue masked_cross_entropy(const Matrix& probabilities, const LabelVector& labels, const LabelMask& mask);

/// Cross-entropy plus weight_decay * (|W1|^2 + |W2|^2) / 2.
double objective(const ForwardCache& cache, const LabelVector& labels, const LabelMask& mask,
                 const GcnModel& model, double weight_decay);

Gradients backward(const ForwardCache& cache, const PropagationOperator& op, const LabelVector& labels,
                   const LabelMask& mask, const GcnModel& model, double weight_decay = 0.0);

TrainResult train(const PropagationOperator& op, const FeatureMatrix& features, const LabelVector& labels,
                  const LabelMask& mask, const Hyperparams& hyper);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_block;
  double w1_error = 0.0;
  double b1_error = 0.0;
  double w2_error = 0.0;
  double b2_error = 0.0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double weight_decay = 0.0;
  bool corrupt_analytic = false;  // failure injection for exercising the checker
};

/// Compares backward() against central finite differences of objective() in
/// eval mode.
GradCheckReport gradient_check(const PropagationOperator& op, const FeatureMatrix& features,
                               const LabelVector& labels, const LabelMask& mask, const GcnModel& model,
                               const GradCheckOptions& options = {});

struct GradCheckInstance {
  PropagationOperator op;
  FeatureMatrix features;
  LabelVector labels;
  LabelMask mask;
  GcnModel model;
};

/// Gaussian features, round-robin labels, three of every four nodes labeled,
/// a symmetrized kNN graph and a model with small random biases.
GradCheckInstance random_gradcheck_instance(std::size_t nodes, std::size_t features, int hidden, int classes, int k,
                                            std::uint64_t seed);

}  // namespace crygcn
