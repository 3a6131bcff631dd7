#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"

#include "crygcn/error.hpp"
#include "crygcn/graph.hpp"
#include "test_support.hpp"

using namespace crygcn;

namespace {

FeatureMatrix line(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return FeatureMatrix(m);
}

FeatureMatrix random_features(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  return FeatureMatrix(testing::to_matrix(oracle::random_dense(n, d, rng)));
}

std::map<std::pair<std::size_t, std::size_t>, double> edge_map(const SimilarityGraph& g) {
  std::map<std::pair<std::size_t, std::size_t>, double> out;
  for (const auto& e : g.edges) out[{e.src, e.dst}] = e.weight;
  return out;
}

SimilarityGraph make_graph(std::size_t n, std::vector<Edge> edges, bool symmetrized = false) {
  SimilarityGraph g;
  g.n = n;
  g.k = 1;
  g.symmetrized = symmetrized;
  g.edges = std::move(edges);
  return g;
}

oracle::Dense dense(const PropagationOperator& op) { return testing::to_dense(Matrix(op.entries)); }

}  // namespace

TEST_CASE("pairwise_distances") {
  DistanceMatrix d = pairwise_distances(line({0, 1, 5}));
  CHECK(d(0, 1) == 1.0);
  CHECK(d(0, 2) == 5.0);
  CHECK(d(1, 2) == 4.0);
  CHECK(d(2, 1) == 4.0);
  CHECK(d(1, 1) == 0.0);

  DistanceMatrix same = pairwise_distances(line({3, 3, 7}));
  CHECK(same(0, 1) == 0.0);

  std::mt19937_64 rng(1);
  oracle::Dense x = oracle::random_dense(50, 8, rng);
  DistanceMatrix got = pairwise_distances(FeatureMatrix(testing::to_matrix(x)));
  oracle::Dense want = oracle::distances(x);
  double worst = 0;
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 50; ++j) {
      worst = std::max(worst, std::abs(got(i, j) - want[i][j]));
      CHECK(got(i, j) == got(j, i));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("distance_to_similarity") {
  CHECK(gaussian_similarity(0.0, 2.0) == 1.0);
  const double sigma = 1.7;
  CHECK(gaussian_similarity(sigma * std::sqrt(2.0 * std::log(2.0)), sigma) == doctest::Approx(0.5).epsilon(1e-14));

  DistanceMatrix d = pairwise_distances(line({0, 1, 5}));
  CHECK(auto_sigma(d) == 4.0);
  Matrix s = distance_to_similarity(d, std::nullopt);
  CHECK(std::abs(s(0, 1) - 0.9692332344763441) < 1e-9);
  CHECK(s(2, 2) == 1.0);

  // even count: points 0,1,3,6 give {1,2,3,3,5,6}, median (3 + 3) / 2
  CHECK(auto_sigma(pairwise_distances(line({0, 1, 3, 6}))) == 3.0);
  CHECK(auto_sigma(pairwise_distances(line({0, 1, 3, 7}))) == 3.5);

  DistanceMatrix zero = pairwise_distances(line({2, 2, 2}));
  CHECK_THROWS_AS(distance_to_similarity(zero, std::nullopt), Error);
  try {
    auto_sigma(zero);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateGeometry);
  }
}

TEST_CASE("knn_edges follows the directed nearest-neighbour pattern") {
  SimilarityGraph g = knn_edges(pairwise_distances(line({0, 1, 5})), 1);
  std::vector<std::pair<std::size_t, std::size_t>> got;
  for (const auto& e : g.edges) got.emplace_back(e.src, e.dst);
  CHECK(got == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}, {2, 1}});
  std::size_t into1 = 0;
  for (const auto& e : g.edges) into1 += e.dst == 1;
  CHECK(into1 == 2);
  CHECK(g.sigma == 4.0);
}

TEST_CASE("knn_edges breaks ties by index") {
  SimilarityGraph g = knn_edges(pairwise_distances(line({4, 4, 4})), 1, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> got;
  for (const auto& e : g.edges) got.emplace_back(e.src, e.dst);
  CHECK(got == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}, {2, 0}});
  for (const auto& e : g.edges) CHECK(e.weight == 1.0);
}

TEST_CASE("knn_edges degree rules") {
  SimilarityGraph all = knn_edges(pairwise_distances(line({0, 1, 2, 3})), 10);
  for (std::size_t deg : all.out_degrees()) CHECK(deg == 3);
  SimilarityGraph single = knn_edges(pairwise_distances(line({1})), 3);
  CHECK(single.n == 1);
  CHECK(single.edges.empty());
  CHECK_THROWS_AS(knn_edges(pairwise_distances(line({0, 1})), 0), Error);
}

TEST_CASE("knn_edges matches the exhaustive-sort oracle") {
  std::mt19937_64 rng(2);
  oracle::Dense x = oracle::random_dense(100, 16, rng);
  SimilarityGraph g = knn_edges(pairwise_distances(FeatureMatrix(testing::to_matrix(x))), 3);
  oracle::Dense d = oracle::distances(x);
  CHECK(g.sigma == oracle::median_positive(d));
  CHECK(edge_map(g) == oracle::knn(d, 3, oracle::median_positive(d)));
  for (std::size_t deg : g.out_degrees()) CHECK(deg == 3);
}

TEST_CASE("symmetrize") {
  SimilarityGraph one = make_graph(2, {{0, 1, 0.9}});
  SimilarityGraph s = symmetrize(one, SymmetrizePolicy::Max);
  CHECK(s.edges == std::vector<Edge>{{0, 1, 0.9}, {1, 0, 0.9}});
  CHECK(s.symmetrized);
  CHECK(symmetrize(s, SymmetrizePolicy::Max).edges == s.edges);

  SimilarityGraph fig = make_graph(3, {{0, 1, 0.9}, {1, 0, 0.8}, {2, 1, 0.7}});
  CHECK(symmetrize(fig, SymmetrizePolicy::Max).edges ==
        std::vector<Edge>{{0, 1, 0.9}, {1, 0, 0.9}, {1, 2, 0.7}, {2, 1, 0.7}});
  CHECK(symmetrize(fig, SymmetrizePolicy::None).edges == fig.edges);
  CHECK_FALSE(symmetrize(fig, SymmetrizePolicy::None).symmetrized);
}

TEST_CASE("propagation_operator small cases") {
  PropagationOperator id = propagation_operator(make_graph(4, {}));
  CHECK(Matrix(id.entries) == Matrix::Identity(4, 4));

  PropagationOperator half = propagation_operator(make_graph(2, {{0, 1, 1.0}, {1, 0, 1.0}}, true));
  Matrix h(half.entries);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(h(i, j) - 0.5) <= 1e-12);

  Matrix t(propagation_operator(make_graph(2, {{0, 1, 0.5}, {1, 0, 0.5}}, true)).entries);
  CHECK(std::abs(t(0, 0) - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(t(1, 1) - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(t(0, 1) - 1.0 / 3.0) <= 1e-12);
  CHECK(std::abs(t(1, 0) - 1.0 / 3.0) <= 1e-12);

  // binary weights ignore the similarity values on the kNN support
  Matrix b(propagation_operator(make_graph(2, {{0, 1, 0.5}, {1, 0, 0.5}}, true), true).entries);
  CHECK(std::abs(b(0, 1) - 0.5) <= 1e-12);
}

TEST_CASE("propagation_operator matches the per-node formula on random graphs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 3 + rng() % 40;
    FeatureMatrix x = random_features(n, 1 + rng() % 6, rng);
    const int k = 1 + static_cast<int>(rng() % 4);
    for (auto policy : {SymmetrizePolicy::None, SymmetrizePolicy::Max}) {
      SimilarityGraph g = symmetrize(knn_edges(pairwise_distances(x), k), policy);
      oracle::Dense want = oracle::propagation(n, edge_map(g));
      oracle::Dense got = dense(propagation_operator(g));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(std::abs(got[i][j] - want[i][j]) <= 1e-15);
          CHECK(got[i][j] >= 0.0);
          CHECK(got[i][j] <= 1.0);
        }
      for (std::size_t i = 0; i < n; ++i) CHECK(got[i][i] > 0.0);
      if (policy == SymmetrizePolicy::Max)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) CHECK(got[i][j] == got[j][i]);
    }
  }
}

TEST_CASE("property: spectral radius of symmetrized operators is at most one") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng() % 48;
    FeatureMatrix x = random_features(n, 1 + rng() % 8, rng);
    SimilarityGraph g = symmetrize(knn_edges(pairwise_distances(x), 1 + static_cast<int>(rng() % 5)), SymmetrizePolicy::Max);
    CHECK(oracle::spectral_radius(dense(propagation_operator(g))) <= 1.0 + 1e-9);
  }
}

TEST_CASE("property: weight-regular graphs have unit row sums") {
  for (std::size_t n : {3u, 5u, 8u}) {
    for (double w : {0.25, 0.6, 1.0}) {
      std::vector<Edge> ring;
      for (std::size_t i = 0; i < n; ++i) {
        ring.push_back({i, (i + 1) % n, w});
        ring.push_back({i, (i + n - 1) % n, w});
      }
      std::sort(ring.begin(), ring.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
      });
      Matrix s(propagation_operator(make_graph(n, ring, true)).entries);
      for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK(std::abs(s.row(i).sum() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("property: isolated nodes keep their identity row") {
  Matrix s(propagation_operator(make_graph(4, {{0, 1, 0.7}, {1, 0, 0.7}, {1, 2, 0.3}, {2, 1, 0.3}}, true)).entries);
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(s(3, j) == (j == 3 ? 1.0 : 0.0));
}

TEST_CASE("property: kNN topology is invariant to positive feature scaling") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 5 + rng() % 60;
    Matrix m = testing::to_matrix(oracle::random_dense(n, 1 + rng() % 10, rng));
    const int k = 1 + static_cast<int>(rng() % 5);
    auto topo = [&](const Matrix& x) {
      std::set<std::pair<std::size_t, std::size_t>> e;
      for (const auto& edge : knn_edges(pairwise_distances(FeatureMatrix(x)), k).edges) e.emplace(edge.src, edge.dst);
      return e;
    };
    // powers of two scale distances exactly, so distance ties are preserved
    CHECK(topo(m) == topo(m * 4.0));
    CHECK(topo(m) == topo(m * 0.125));
  }
}

TEST_CASE("build_graph modes") {
  std::mt19937_64 rng(7);
  FeatureMatrix x = random_features(100, 4, rng);
  GraphConfig cfg;

  GraphBundle semi = build_graph(x, GraphMode::SemiSupervised, std::nullopt, cfg);
  CHECK(semi.graph.n == 100);
  CHECK(semi.op.size() == 100);
  CHECK(semi.graph.symmetrized);

  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < 100; ++i) (i % 5 == 0 ? test : train).push_back(i);
  GraphBundle tr = build_graph(x, GraphMode::SupervisedTrain, train, cfg);
  GraphBundle te = build_graph(x, GraphMode::SupervisedTest, test, cfg);
  CHECK(tr.graph.n == 80);
  CHECK(te.graph.n == 20);
  std::set<std::size_t> a(tr.graph.node_ids.begin(), tr.graph.node_ids.end());
  for (std::size_t id : te.graph.node_ids) CHECK(a.count(id) == 0);
  CHECK(te.graph.node_ids == test);

  // bandwidth comes from the subset only
  DistanceMatrix sub = pairwise_distances(x.subset(test));
  CHECK(te.graph.sigma == auto_sigma(sub));

  std::vector<std::size_t> one{3};
  try {
    build_graph(x, GraphMode::SupervisedTest, one, cfg);
    FAIL("expected DegenerateGraph");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateGraph);
  }
  CHECK_THROWS_AS(build_graph(x, GraphMode::SemiSupervised, std::span<const std::size_t>(train), cfg), Error);
  CHECK_THROWS_AS(build_graph(x, GraphMode::SupervisedTrain, std::nullopt, cfg), Error);

  GraphConfig directed;
  directed.symmetrize = SymmetrizePolicy::None;
  GraphBundle d = build_graph(x, GraphMode::SemiSupervised, std::nullopt, directed);
  for (std::size_t deg : d.graph.out_degrees()) CHECK(deg == 3);
  CHECK_FALSE(d.op.symmetrized);
}
