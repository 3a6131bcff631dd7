#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "crygcn/error.hpp"
#include "crygcn/gcn.hpp"
#include "test_support.hpp"

using namespace crygcn;

namespace {

struct Instance {
  FeatureMatrix x;
  LabelVector y;
  LabelMask mask;
  GraphBundle graph;
  GcnModel model;
};

Instance random_instance(std::size_t n, std::size_t d, int h, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureMatrix x(testing::to_matrix(oracle::random_dense(n, d, rng)));
  std::vector<int> labels(n);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  std::vector<bool> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = rng() % 3 != 0;
  m[0] = true;
  GraphBundle g = build_graph(x, GraphMode::SemiSupervised, std::nullopt, GraphConfig{2, std::nullopt, SymmetrizePolicy::Max, false});
  GcnModel model = init_model(static_cast<int>(d), h, classes, seed);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (Eigen::Index i = 0; i < model.b1.size(); ++i) model.b1(i) = u(rng);
  for (Eigen::Index i = 0; i < model.b2.size(); ++i) model.b2(i) = u(rng);
  return {std::move(x), LabelVector(std::move(labels), std::move(names)), LabelMask::from_bools(std::move(m)),
          std::move(g), std::move(model)};
}

double oracle_objective(const oracle::Dense& s, const oracle::Dense& x, const oracle::Dense& w1,
                        const std::vector<double>& b1, const oracle::Dense& w2, const std::vector<double>& b2,
                        const LabelVector& y, const LabelMask& m) {
  return oracle::masked_nll(oracle::gcn_forward(s, x, w1, b1, w2, b2), y.labels(), m.mask);
}

Dataset two_blobs(int per_class, std::uint64_t seed) { return synth_blobs({2, per_class, 2, 8.0, 0.5, seed}); }

}  // namespace

TEST_CASE("init_model") {
  GcnModel m = init_model(4, 3, 2, 42);
  CHECK(m.dims() == ModelDims{4, 3, 2});
  CHECK(m.w1.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 7.0));
  CHECK(m.w2.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 5.0));
  CHECK(m.b1.isZero(0.0));
  CHECK(m.b2.isZero(0.0));
  CHECK(init_model(4, 3, 2, 42) == m);
  CHECK_FALSE(init_model(4, 3, 2, 43) == m);
  CHECK_THROWS_AS(init_model(0, 3, 2, 1), Error);
}

TEST_CASE("forward with the identity operator is a row-wise MLP") {
  Instance inst = random_instance(9, 6, 5, 3, 1);
  PropagationOperator id = PropagationOperator::identity(9);
  Matrix p = forward(id, inst.x, inst.model).probabilities;
  const auto w1 = testing::to_dense(inst.model.w1), w2 = testing::to_dense(inst.model.w2);
  const auto b1 = testing::to_vec(inst.model.b1), b2 = testing::to_vec(inst.model.b2);
  const auto x = testing::to_dense(inst.x.values());
  for (std::size_t i = 0; i < 9; ++i) {
    auto want = oracle::mlp_row(x[i], w1, b1, w2, b2);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) - want[c]) <= 1e-12);
  }
}

TEST_CASE("forward matches the dense oracle and normalizes rows") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Instance inst = random_instance(15, 4, 6, 3, seed);
    Matrix p = forward(inst.graph.op, inst.x, inst.model).probabilities;
    auto want = oracle::gcn_forward(testing::to_dense(Matrix(inst.graph.op.entries)), testing::to_dense(inst.x.values()),
                                    testing::to_dense(inst.model.w1), testing::to_vec(inst.model.b1),
                                    testing::to_dense(inst.model.w2), testing::to_vec(inst.model.b2));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      CHECK(std::abs(p.row(i).sum() - 1.0) <= 1e-12);
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        CHECK(p(i, c) > 0.0);
        CHECK(p(i, c) < 1.0);
        CHECK(std::abs(p(i, c) - want[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("forward is permutation equivariant in eval mode") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    Instance inst = random_instance(20, 5, 8, 3, seed);
    std::vector<std::size_t> perm(20);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(seed));
    FeatureMatrix px = inst.x.subset(perm);
    GraphBundle pg = build_graph(px, GraphMode::SemiSupervised, std::nullopt, GraphConfig{2, std::nullopt, SymmetrizePolicy::Max, false});
    Matrix p = forward(inst.graph.op, inst.x, inst.model).probabilities;
    Matrix q = forward(pg.op, px, inst.model).probabilities;
    for (std::size_t i = 0; i < 20; ++i)
      CHECK((q.row(static_cast<Eigen::Index>(i)) - p.row(static_cast<Eigen::Index>(perm[i]))).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("forward shape errors") {
  Instance inst = random_instance(10, 4, 3, 2, 2);
  GcnModel wrong = init_model(5, 3, 2, 0);
  try {
    forward(inst.graph.op, inst.x, wrong);
    FAIL("expected ShapeError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeError);
  }
  CHECK_THROWS_AS(forward(PropagationOperator::identity(3), inst.x, inst.model), Error);
}

TEST_CASE("dropout only in training mode and reproducible from the stream") {
  Instance inst = random_instance(12, 4, 6, 3, 3);
  Rng a(5), b(5);
  ForwardCache ca = forward(inst.graph.op, inst.x, inst.model, &a, 0.5);
  ForwardCache cb = forward(inst.graph.op, inst.x, inst.model, &b, 0.5);
  CHECK(ca.probabilities == cb.probabilities);
  CHECK(ca.hidden_keep.size() > 0);
  CHECK(ca.input != inst.x.values());
  ForwardCache eval = forward(inst.graph.op, inst.x, inst.model);
  CHECK(eval.hidden_keep.size() == 0);
  CHECK(eval.input == inst.x.values());
}

TEST_CASE("masked_cross_entropy") {
  LabelVector y({0, 1, 2, 1}, {"a", "b", "c"});
  LabelMask all = LabelMask::from_bools({true, true, true, true});

  Matrix sure(4, 3);
  const double eps = 1e-15;
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) sure(i, c) = c == y[static_cast<std::size_t>(i)] ? 1.0 - eps : eps / 2.0;
  LossValue l = masked_cross_entropy(sure, y, all);
  CHECK(l.loss >= 0.0);
  CHECK(l.loss < 1e-14);
  CHECK(l.count == 4);

  Matrix uniform = Matrix::Constant(4, 3, 1.0 / 3.0);
  CHECK(std::abs(masked_cross_entropy(uniform, y, all).loss - std::log(3.0)) <= 1e-12);
  CHECK(std::abs(masked_cross_entropy_logits(Matrix::Constant(4, 3, 7.0), y, all).loss - std::log(3.0)) <= 1e-12);

  std::mt19937_64 rng(9);
  oracle::Dense logits = oracle::random_dense(4, 3, rng, 3.0);
  oracle::Dense probs;
  for (auto& row : logits) probs.push_back(oracle::softmax(row));
  LabelMask half = LabelMask::from_bools({true, false, true, false});
  const double want = oracle::masked_nll(probs, y.labels(), half.mask);
  CHECK(std::abs(masked_cross_entropy_logits(testing::to_matrix(logits), y, half).loss - want) <= 1e-12);
  CHECK(masked_cross_entropy_logits(testing::to_matrix(logits), y, half).count == 2);

  // very confident wrong logits stay finite
  Matrix extreme = Matrix::Zero(4, 3);
  extreme(0, 2) = 1e4;
  CHECK(std::isfinite(masked_cross_entropy_logits(extreme, y, all).loss));

  try {
    masked_cross_entropy(uniform, y, LabelMask::from_bools({false, false, false, false}));
    FAIL("expected EmptyMask");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyMask);
  }
}

TEST_CASE("backward agrees with central differences of an independent forward") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Instance inst = random_instance(12, 5, 4, 3, seed);
    const ForwardCache cache = forward(inst.graph.op, inst.x, inst.model);
    const Gradients g = backward(cache, inst.graph.op, inst.y, inst.mask, inst.model);

    const auto s = testing::to_dense(Matrix(inst.graph.op.entries));
    const auto x = testing::to_dense(inst.x.values());
    auto w1 = testing::to_dense(inst.model.w1), w2 = testing::to_dense(inst.model.w2);
    auto b1 = testing::to_vec(inst.model.b1), b2 = testing::to_vec(inst.model.b2);
    const double h = 1e-5;
    double worst = 0.0;
    auto compare = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = oracle_objective(s, x, w1, b1, w2, b2, inst.y, inst.mask);
      param = saved - h;
      const double down = oracle_objective(s, x, w1, b1, w2, b2, inst.y, inst.mask);
      param = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
    };
    for (std::size_t i = 0; i < w1.size(); ++i)
      for (std::size_t j = 0; j < w1[i].size(); ++j) compare(w1[i][j], g.w1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    for (std::size_t j = 0; j < b1.size(); ++j) compare(b1[j], g.b1(static_cast<Eigen::Index>(j)));
    for (std::size_t i = 0; i < w2.size(); ++i)
      for (std::size_t j = 0; j < w2[i].size(); ++j) compare(w2[i][j], g.w2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    for (std::size_t j = 0; j < b2.size(); ++j) compare(b2[j], g.b2(static_cast<Eigen::Index>(j)));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradient_check reports small errors and catches corruption") {
  GradCheckInstance inst = random_gradcheck_instance(12, 5, 4, 3, 2, 0);
  GradCheckReport ok = gradient_check(inst.op, inst.features, inst.labels, inst.mask, inst.model);
  CHECK(ok.max_relative_error < 1e-4);
  GradCheckOptions wd;
  wd.weight_decay = 0.05;
  CHECK(gradient_check(inst.op, inst.features, inst.labels, inst.mask, inst.model, wd).max_relative_error < 1e-4);
  GradCheckOptions bad;
  bad.corrupt_analytic = true;
  CHECK(gradient_check(inst.op, inst.features, inst.labels, inst.mask, inst.model, bad).max_relative_error > 1e-2);
}

TEST_CASE("backward with dropout replays the cached masks") {
  Instance inst = random_instance(12, 5, 4, 3, 21);
  Rng rng(3);
  const ForwardCache cache = forward(inst.graph.op, inst.x, inst.model, &rng, 0.3);
  const Gradients g = backward(cache, inst.graph.op, inst.y, inst.mask, inst.model);
  // perturb W2 and re-run the same dropout pattern: the objective must move
  // by the analytic directional derivative
  const double h = 1e-6;
  GcnModel up = inst.model, down = inst.model;
  up.w2(0, 0) += h;
  down.w2(0, 0) -= h;
  Rng r1(3), r2(3);
  const double fu = objective(forward(inst.graph.op, inst.x, up, &r1, 0.3), inst.y, inst.mask, up, 0.0);
  const double fd = objective(forward(inst.graph.op, inst.x, down, &r2, 0.3), inst.y, inst.mask, down, 0.0);
  CHECK(std::abs((fu - fd) / (2 * h) - g.w2(0, 0)) <= 1e-6 * std::max(1.0, std::abs(g.w2(0, 0))));
}

TEST_CASE("backward edge cases") {
  Instance inst = random_instance(10, 3, 4, 3, 5);
  SUBCASE("softmax fixed point gives a zero output bias gradient") {
    GcnModel m = inst.model;
    m.w2.setZero();
    m.b2 << 1000.0, 0.0, 0.0;
    std::vector<bool> only0(10, false);
    for (std::size_t i = 0; i < 10; ++i) only0[i] = inst.y[i] == 0;
    LabelMask mask = LabelMask::from_bools(only0);
    ForwardCache c = forward(inst.graph.op, inst.x, m);
    Gradients g = backward(c, inst.graph.op, inst.y, mask, m);
    CHECK(g.b2.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("pure") {
    ForwardCache c = forward(inst.graph.op, inst.x, inst.model);
    Gradients a = backward(c, inst.graph.op, inst.y, inst.mask, inst.model);
    Gradients b = backward(c, inst.graph.op, inst.y, inst.mask, inst.model);
    CHECK(a.w1 == b.w1);
    CHECK(a.b1 == b.b1);
    CHECK(a.w2 == b.w2);
    CHECK(a.b2 == b.b2);
  }
  SUBCASE("stale cache") {
    ForwardCache c = forward(inst.graph.op, inst.x, inst.model);
    GcnModel other = init_model(3, 7, 3, 1);
    try {
      backward(c, inst.graph.op, inst.y, inst.mask, other);
      FAIL("expected ShapeError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeError);
    }
  }
}

TEST_CASE("train solves a separable instance") {
  Dataset d = two_blobs(10, 4);
  PropagationOperator id = PropagationOperator::identity(20);
  LabelMask all = LabelMask::from_bools(std::vector<bool>(20, true));
  Hyperparams h;
  h.epochs = 500;
  h.seed = 1;
  TrainResult r = train(id, d.features, d.labels, all, h);
  CHECK(r.trace.loss.size() == 500);
  CHECK(r.trace.final_train_accuracy == 1.0);
  CHECK(r.trace.loss.back() < r.trace.loss.front());
}

TEST_CASE("train edge cases") {
  Dataset d = two_blobs(10, 5);
  GraphBundle g = build_graph(d.features, GraphMode::SemiSupervised, std::nullopt, GraphConfig{});
  LabelMask all = LabelMask::from_bools(std::vector<bool>(20, true));
  Hyperparams h;
  h.seed = 9;

  SUBCASE("zero epochs returns the initialization") {
    h.epochs = 0;
    TrainResult r = train(g.op, d.features, d.labels, all, h);
    CHECK(r.trace.loss.empty());
    CHECK(r.model == init_model(2, h.hidden, 2, h.seed));
  }
  SUBCASE("deterministic") {
    h.epochs = 50;
    TrainResult a = train(g.op, d.features, d.labels, all, h);
    TrainResult b = train(g.op, d.features, d.labels, all, h);
    CHECK(a.model == b.model);
    CHECK(a.trace.loss == b.trace.loss);
  }
  SUBCASE("plain gradient descent also runs") {
    h.epochs = 20;
    h.optimizer = Optimizer::GradientDescent;
    h.learning_rate = 0.1;
    CHECK(train(g.op, d.features, d.labels, all, h).trace.loss.size() == 20);
  }
  SUBCASE("divergence is reported with its epoch") {
    h.epochs = 50;
    h.optimizer = Optimizer::GradientDescent;
    h.learning_rate = 1e300;
    try {
      train(g.op, d.features, d.labels, all, h);
      FAIL("expected DivergenceError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DivergenceError);
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
  SUBCASE("empty mask") {
    h.epochs = 1;
    try {
      train(g.op, d.features, d.labels, LabelMask::from_bools(std::vector<bool>(20, false)), h);
      FAIL("expected EmptyMask");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyMask);
    }
  }
}

TEST_CASE("predict") {
  Matrix p(2, 3);
  p << 0.2, 0.5, 0.3, 0.1, 0.1, 0.8;
  CHECK(argmax_rows(p) == std::vector<int>{1, 2});
  Matrix tie(1, 2);
  tie << 0.5, 0.5;
  CHECK(argmax_rows(tie) == std::vector<int>{0});

  Instance inst = random_instance(14, 4, 5, 3, 8);
  std::vector<int> base = predict(inst.model, inst.graph.op, inst.x);
  GcnModel shifted = inst.model;
  shifted.b2.array() += 3.25;
  CHECK(predict(shifted, inst.graph.op, inst.x) == base);
}
