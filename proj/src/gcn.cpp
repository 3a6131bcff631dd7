#include "crygcn/gcn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "crygcn/error.hpp"

namespace crygcn {

namespace {

void check_shapes(const PropagationOperator& op, const FeatureMatrix& features, const GcnModel& model) {
  if (op.size() != features.rows())
    fail(ErrorKind::ShapeError, "operator has " + std::to_string(op.size()) + " nodes but features have " +
                                    std::to_string(features.rows()) + " rows");
  const ModelDims dims = model.dims();
  if (static_cast<std::size_t>(dims.input) != features.cols())
    fail(ErrorKind::ShapeError, "model expects " + std::to_string(dims.input) + " input features, got " +
                                    std::to_string(features.cols()));
  if (model.b1.size() != dims.hidden || model.w2.rows() != dims.hidden || model.b2.size() != dims.classes)
    fail(ErrorKind::ShapeError, "inconsistent model parameter shapes");
}

void check_labels(std::size_t n, const LabelVector& labels, const LabelMask& mask, int classes) {
  if (labels.size() != n || mask.mask.size() != n)
    fail(ErrorKind::ShapeError, "labels/mask length does not match the node count");
  if (labels.class_count() != classes)
    fail(ErrorKind::ShapeError, "label class count does not match the model output width");
  if (mask.labeled_count == 0) fail(ErrorKind::EmptyMask, "label mask selects no nodes");
}

// Inverted dropout: kept entries are scaled by 1 / (1 - rate).
Matrix dropout_keep(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
  return m;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - top).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

double glorot_bound(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template <typename Param>
struct AdamSlot {
  Param m;
  Param v;
  explicit AdamSlot(const Param& like) : m(Param::Zero(like.rows(), like.cols())), v(m) {}

  void step(Param& p, const Param& g, double lr, double beta1_t, double beta2_t) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - beta1_t;
    const double c2 = 1.0 - beta2_t;
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace

bool GcnModel::operator==(const GcnModel& other) const {
  return w1.rows() == other.w1.rows() && w1.cols() == other.w1.cols() && w2.rows() == other.w2.rows() &&
         w2.cols() == other.w2.cols() && b1.size() == other.b1.size() && b2.size() == other.b2.size() &&
         w1 == other.w1 && b1 == other.b1 && w2 == other.w2 && b2 == other.b2;
}

GcnModel init_model(int input, int hidden, int classes, std::uint64_t seed) {
  if (input < 1 || hidden < 1 || classes < 1) fail(ErrorKind::InvalidConfig, "model dimensions must be >= 1");
  Rng rng(derive_seed(seed, "init"));
  GcnModel model;
  auto fill = [&rng](Matrix& w) {
    const double bound = glorot_bound(w.rows(), w.cols());
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  };
  model.w1.resize(input, hidden);
  model.w2.resize(hidden, classes);
  fill(model.w1);
  fill(model.w2);
  model.b1 = RowVector::Zero(hidden);
  model.b2 = RowVector::Zero(classes);
  return model;
}

ForwardCache forward(const PropagationOperator& op, const FeatureMatrix& features, const GcnModel& model,
                     Rng* dropout_rng, double dropout) {
  check_shapes(op, features, model);
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::InvalidConfig, "dropout must lie in [0, 1)");
  const bool training = dropout_rng != nullptr && dropout > 0.0;
  const Matrix& x = features.values();

  ForwardCache c;
  if (training) {
    std::bernoulli_distribution keep(1.0 - dropout);
    const double scale = 1.0 / (1.0 - dropout);
    c.input.resize(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) c.input.data()[i] = x.data()[i] * (keep(*dropout_rng) ? scale : 0.0);
  } else {
    c.input = x;
  }
  c.hidden_pre = op.entries * (c.input * model.w1);
  c.hidden_pre.rowwise() += model.b1;
  c.hidden = c.hidden_pre.cwiseMax(0.0);
  if (training) {
    c.hidden_keep = dropout_keep(c.hidden.rows(), c.hidden.cols(), dropout, *dropout_rng);
    c.hidden = c.hidden.cwiseProduct(c.hidden_keep);
  }
  c.logits = op.entries * (c.hidden * model.w2);
  c.logits.rowwise() += model.b2;
  c.probabilities = softmax_rows(c.logits);
  return c;
}

Matrix predict_proba(const GcnModel& model, const PropagationOperator& op, const FeatureMatrix& features) {
  return forward(op, features, model).probabilities;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j)
      if (scores(i, j) > scores(i, best)) best = j;  // strict: ties keep the lowest index
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const GcnModel& model, const PropagationOperator& op, const FeatureMatrix& features) {
  return argmax_rows(forward(op, features, model).probabilities);
}

LossValue masked_cross_entropy_logits(const Matrix& logits, const LabelVector& labels, const LabelMask& mask) {
  if (labels.size() != static_cast<std::size_t>(logits.rows()) || mask.mask.size() != labels.size())
    fail(ErrorKind::ShapeError, "labels/mask length does not match the node count");
  if (labels.class_count() != logits.cols())
    fail(ErrorKind::ShapeError, "label class count does not match the output width");
  LossValue out;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!mask.mask[i]) continue;
    const auto row = logits.row(static_cast<Eigen::Index>(i));
    const double top = row.maxCoeff();
    const double lse = top + std::log((row.array() - top).exp().sum());
    sum += lse - row(labels[i]);
    ++out.count;
  }
  if (out.count == 0) fail(ErrorKind::EmptyMask, "label mask selects no nodes");
  out.loss = sum / static_cast<double>(out.count);
  return out;
}

LossValue masked_cross_entropy(const Matrix& probabilities, const LabelVector& labels, const LabelMask& mask) {
  return masked_cross_entropy_logits(probabilities.array().log().matrix(), labels, mask);
}

double objective(const ForwardCache& cache, const LabelVector& labels, const LabelMask& mask,
                 const GcnModel& model, double weight_decay) {
  double loss = masked_cross_entropy_logits(cache.logits, labels, mask).loss;
  if (weight_decay > 0.0) loss += 0.5 * weight_decay * (model.w1.squaredNorm() + model.w2.squaredNorm());
  return loss;
}

Gradients backward(const ForwardCache& cache, const PropagationOperator& op, const LabelVector& labels,
                   const LabelMask& mask, const GcnModel& model, double weight_decay) {
  const Eigen::Index n = cache.logits.rows();
  const ModelDims dims = model.dims();
  if (static_cast<std::size_t>(n) != op.size() || cache.logits.cols() != dims.classes ||
      cache.input.cols() != dims.input || cache.hidden.cols() != dims.hidden || cache.hidden_pre.rows() != n)
    fail(ErrorKind::ShapeError, "forward cache does not match the model or operator");
  check_labels(static_cast<std::size_t>(n), labels, mask, dims.classes);

  // Softmax + cross-entropy: dL/dlogits = (P - Y) / count on labeled rows.
  Matrix d_logits = Matrix::Zero(n, dims.classes);
  const double inv = 1.0 / static_cast<double>(mask.labeled_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask.mask[static_cast<std::size_t>(i)]) continue;
    d_logits.row(i) = cache.probabilities.row(i) * inv;
    d_logits(i, labels[static_cast<std::size_t>(i)]) -= inv;
  }

  Gradients g;
  const Matrix back2 = op.entries.transpose() * d_logits;
  g.w2 = cache.hidden.transpose() * back2;
  g.b2 = d_logits.colwise().sum();

  Matrix d_hidden = back2 * model.w2.transpose();
  if (cache.hidden_keep.size() > 0) d_hidden = d_hidden.cwiseProduct(cache.hidden_keep);
  Matrix d_pre = (cache.hidden_pre.array() > 0.0).select(d_hidden.array(), 0.0).matrix();

  const Matrix back1 = op.entries.transpose() * d_pre;
  g.w1 = cache.input.transpose() * back1;
  g.b1 = d_pre.colwise().sum();

  if (weight_decay > 0.0) {
    g.w1 += weight_decay * model.w1;
    g.w2 += weight_decay * model.w2;
  }
  return g;
}

TrainResult train(const PropagationOperator& op, const FeatureMatrix& features, const LabelVector& labels,
                  const LabelMask& mask, const Hyperparams& hyper) {
  if (hyper.layers != 2) fail(ErrorKind::InvalidConfig, "only 2-layer networks are supported");
  if (hyper.epochs < 0) fail(ErrorKind::InvalidConfig, "epochs must be >= 0");
  if (!(hyper.learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "learning_rate must be > 0");
  if (!(hyper.weight_decay >= 0.0)) fail(ErrorKind::InvalidConfig, "weight_decay must be >= 0");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  GcnModel& model = result.model;
  model = init_model(static_cast<int>(features.cols()), hyper.hidden, labels.class_count(), hyper.seed);
  check_shapes(op, features, model);
  check_labels(features.rows(), labels, mask, labels.class_count());

  AdamSlot<Matrix> s_w1(model.w1), s_w2(model.w2);
  AdamSlot<RowVector> s_b1(model.b1), s_b2(model.b2);
  double beta1_t = 1.0, beta2_t = 1.0;
  result.trace.loss.reserve(static_cast<std::size_t>(hyper.epochs));

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng rng(derive_seed(hyper.seed, "dropout", static_cast<std::uint64_t>(epoch)));
    ForwardCache cache = forward(op, features, model, &rng, hyper.dropout);
    const double loss = objective(cache, labels, mask, model, hyper.weight_decay);
    if (!std::isfinite(loss))
      fail(ErrorKind::DivergenceError, "loss became non-finite at epoch " + std::to_string(epoch));
    result.trace.loss.push_back(loss);

    Gradients g = backward(cache, op, labels, mask, model, hyper.weight_decay);
    if (hyper.optimizer == Optimizer::Adam) {
      beta1_t *= 0.9;
      beta2_t *= 0.999;
      s_w1.step(model.w1, g.w1, hyper.learning_rate, beta1_t, beta2_t);
      s_b1.step(model.b1, g.b1, hyper.learning_rate, beta1_t, beta2_t);
      s_w2.step(model.w2, g.w2, hyper.learning_rate, beta1_t, beta2_t);
      s_b2.step(model.b2, g.b2, hyper.learning_rate, beta1_t, beta2_t);
    } else {
      model.w1 -= hyper.learning_rate * g.w1;
      model.b1 -= hyper.learning_rate * g.b1;
      model.w2 -= hyper.learning_rate * g.w2;
      model.b2 -= hyper.learning_rate * g.b2;
    }
  }

  const std::vector<int> predicted = predict(model, op, features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (mask.mask[i] && predicted[i] == labels[i]) ++correct;
  result.trace.final_train_accuracy = static_cast<double>(correct) / static_cast<double>(mask.labeled_count);
  result.trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

namespace {

// Denominators are floored so that parameters with (near) zero gradient, such
// as units behind an inactive ReLU, do not turn round-off into a large ratio.
constexpr double kRelativeFloor = 1e-6;

template <typename Param, typename Eval>
double block_error(Param& param, const Param& analytic, double step, Eval&& eval) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + step;
    const double up = eval();
    param.data()[i] = saved - step;
    const double down = eval();
    param.data()[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kRelativeFloor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace

GradCheckReport gradient_check(const PropagationOperator& op, const FeatureMatrix& features,
                               const LabelVector& labels, const LabelMask& mask, const GcnModel& model,
                               const GradCheckOptions& options) {
  GcnModel probe = model;
  const ForwardCache cache = forward(op, features, probe);
  Gradients g = backward(cache, op, labels, mask, probe, options.weight_decay);
  if (options.corrupt_analytic) {
    g.w1.array() *= 1.5;
    g.b2.array() += 0.1;
  }
  auto eval = [&]() { return objective(forward(op, features, probe), labels, mask, probe, options.weight_decay); };

  GradCheckReport r;
  r.w1_error = block_error(probe.w1, g.w1, options.step, eval);
  r.b1_error = block_error(probe.b1, g.b1, options.step, eval);
  r.w2_error = block_error(probe.w2, g.w2, options.step, eval);
  r.b2_error = block_error(probe.b2, g.b2, options.step, eval);
  const std::pair<double, const char*> blocks[] = {
      {r.w1_error, "W1"}, {r.b1_error, "b1"}, {r.w2_error, "W2"}, {r.b2_error, "b2"}};
  for (const auto& [err, name] : blocks) {
    if (r.worst_block.empty() || err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_block = name;
    }
  }
  return r;
}

GradCheckInstance random_gradcheck_instance(std::size_t nodes, std::size_t features, int hidden, int classes, int k,
                                            std::uint64_t seed) {
  if (classes < 2 || nodes < static_cast<std::size_t>(classes) || nodes < 2 || features < 1 || hidden < 1)
    fail(ErrorKind::InvalidConfig, "gradient check needs nodes >= classes >= 2 and positive sizes");
  Rng rng(derive_seed(seed, "gradcheck"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(features));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);

  std::vector<int> y(nodes);
  std::vector<bool> m(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    y[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
    m[i] = i % 4 != 3;
  }
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));

  FeatureMatrix fx(std::move(x));
  GraphConfig gc;
  gc.k = k;
  GraphBundle g = build_graph(fx, GraphMode::SemiSupervised, std::nullopt, gc);
  GcnModel model = init_model(static_cast<int>(features), hidden, classes, seed);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  for (Eigen::Index i = 0; i < model.b1.size(); ++i) model.b1(i) = small(rng);
  for (Eigen::Index i = 0; i < model.b2.size(); ++i) model.b2(i) = small(rng);
  return GradCheckInstance{std::move(g.op), std::move(fx), LabelVector(std::move(y), std::move(names)),
                           LabelMask::from_bools(std::move(m)), std::move(model)};
}

}  // namespace crygcn
