#include "crygcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crygcn/error.hpp"

namespace crygcn {

std::vector<std::size_t> SimilarityGraph::out_degrees() const {
  std::vector<std::size_t> deg(n, 0);
  for (const auto& e : edges) ++deg[e.src];
  return deg;
}

PropagationOperator PropagationOperator::identity(std::size_t n) {
  PropagationOperator op;
  op.entries.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  op.entries.setIdentity();
  op.symmetrized = true;
  return op;
}

DistanceMatrix pairwise_distances(const FeatureMatrix& features) {
  const Matrix& x = features.values();
  const Eigen::Index n = x.rows();
  const Eigen::Index dims = x.cols();
  Matrix d = Matrix::Zero(n, n);
  // Row blocks keep a handful of rows hot in cache while streaming the rest.
  // Each unordered pair is summed once, in coordinate order.
  constexpr Eigen::Index kBlock = 32;
  for (Eigen::Index i0 = 0; i0 < n; i0 += kBlock) {
    const Eigen::Index i1 = std::min(n, i0 + kBlock);
    for (Eigen::Index j = i0 + 1; j < n; ++j) {
      const double* xj = x.data() + j * dims;
      for (Eigen::Index i = i0; i < std::min(i1, j); ++i) {
        const double* xi = x.data() + i * dims;
        double sum = 0.0;
        for (Eigen::Index t = 0; t < dims; ++t) {
          const double diff = xi[t] - xj[t];
          sum += diff * diff;
        }
        const double v = std::sqrt(sum);
        d(i, j) = v;
        d(j, i) = v;
      }
    }
  }
  return DistanceMatrix(std::move(d));
}

double auto_sigma(const DistanceMatrix& dist) {
  std::vector<double> positive;
  const std::size_t n = dist.size();
  positive.reserve(n * (n > 0 ? n - 1 : 0) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (dist(i, j) > 0.0) positive.push_back(dist(i, j));
  if (positive.empty())
    fail(ErrorKind::DegenerateGeometry, "all points coincide; cannot derive a kernel bandwidth");
  const std::size_t mid = positive.size() / 2;
  std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid), positive.end());
  double upper = positive[mid];
  if (positive.size() % 2 == 1) return upper;
  double lower = *std::max_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

namespace {

double resolve_sigma(const DistanceMatrix& dist, std::optional<double> sigma) {
  if (!sigma) return auto_sigma(dist);
  if (!(*sigma > 0.0) || !std::isfinite(*sigma)) fail(ErrorKind::InvalidConfig, "sigma must be a positive number");
  return *sigma;
}

}  // namespace

Matrix distance_to_similarity(const DistanceMatrix& dist, std::optional<double> sigma) {
  const double s = resolve_sigma(dist, sigma);
  return dist.entries().unaryExpr([s](double d) { return gaussian_similarity(d, s); });
}

SimilarityGraph knn_edges(const DistanceMatrix& dist, int k, std::optional<double> sigma) {
  if (k < 1) fail(ErrorKind::InvalidConfig, "k must be >= 1");
  SimilarityGraph g;
  g.n = dist.size();
  g.k = k;
  g.node_ids.resize(g.n);
  std::iota(g.node_ids.begin(), g.node_ids.end(), std::size_t{0});
  if (g.n < 2) return g;  // a single node has no candidate neighbours
  g.sigma = resolve_sigma(dist, sigma);

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), g.n - 1);
  g.edges.reserve(g.n * take);
  std::vector<std::pair<double, std::size_t>> candidates;
  candidates.reserve(g.n - 1);
  for (std::size_t i = 0; i < g.n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < g.n; ++j)
      if (j != i) candidates.emplace_back(dist(i, j), j);
    // pair ordering breaks distance ties by ascending node index
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end());
    std::vector<std::size_t> chosen;
    for (std::size_t t = 0; t < take; ++t) chosen.push_back(candidates[t].second);
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t j : chosen) {
      // Far neighbours can underflow the kernel; weights must stay positive.
      double w = std::max(gaussian_similarity(dist(i, j), g.sigma), std::numeric_limits<double>::min());
      g.edges.push_back({i, j, w});
    }
  }
  return g;
}

SimilarityGraph symmetrize(const SimilarityGraph& graph, SymmetrizePolicy policy) {
  if (policy == SymmetrizePolicy::None) return graph;
  SimilarityGraph out = graph;
  out.symmetrized = true;
  std::vector<Edge> all;
  all.reserve(graph.edges.size() * 2);
  for (const auto& e : graph.edges) {
    all.push_back(e);
    all.push_back({e.dst, e.src, e.weight});
  }
  std::sort(all.begin(), all.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  out.edges.clear();
  for (const auto& e : all) {
    if (!out.edges.empty() && out.edges.back().src == e.src && out.edges.back().dst == e.dst)
      out.edges.back().weight = std::max(out.edges.back().weight, e.weight);
    else
      out.edges.push_back(e);
  }
  return out;
}

PropagationOperator propagation_operator(const SimilarityGraph& graph, bool binary_weights) {
  const std::size_t n = graph.n;
  std::vector<double> degree(n, 0.0);
  for (const auto& e : graph.edges) {
    if (e.src >= n || e.dst >= n || e.src == e.dst)
      fail(ErrorKind::Internal, "malformed edge in similarity graph");
    if (!(e.weight > 0.0)) fail(ErrorKind::Internal, "non-positive edge weight");
    degree[e.src] += binary_weights ? 1.0 : e.weight;
  }
  std::vector<double> root(n);
  for (std::size_t i = 0; i < n; ++i) root[i] = std::sqrt(degree[i] + 1.0);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n + graph.edges.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto ii = static_cast<int>(i);
    triplets.emplace_back(ii, ii, 1.0 / (degree[i] + 1.0));
  }
  for (const auto& e : graph.edges) {
    double a = binary_weights ? 1.0 : e.weight;
    triplets.emplace_back(static_cast<int>(e.src), static_cast<int>(e.dst), a / (root[e.src] * root[e.dst]));
  }
  PropagationOperator op;
  op.entries.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  op.entries.setFromTriplets(triplets.begin(), triplets.end());
  op.entries.makeCompressed();
  op.symmetrized = graph.symmetrized;
  return op;
}

GraphBundle build_graph(const FeatureMatrix& features, GraphMode mode,
                        std::optional<std::span<const std::size_t>> node_subset, const GraphConfig& config) {
  std::vector<std::size_t> ids;
  if (mode == GraphMode::SemiSupervised) {
    if (node_subset) fail(ErrorKind::InvalidConfig, "semi-supervised graphs are built over all nodes");
    ids.resize(features.rows());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
  } else {
    if (!node_subset || node_subset->empty())
      fail(ErrorKind::InvalidConfig, "supervised graphs need a node subset");
    ids.assign(node_subset->begin(), node_subset->end());
  }
  if (ids.size() < 2) fail(ErrorKind::DegenerateGraph, "a graph needs at least 2 nodes");

  DistanceMatrix dist = ids.size() == features.rows() && mode == GraphMode::SemiSupervised
                            ? pairwise_distances(features)
                            : pairwise_distances(features.subset(ids));
  SimilarityGraph g = symmetrize(knn_edges(dist, config.k, config.sigma), config.symmetrize);
  g.node_ids = std::move(ids);
  PropagationOperator op = propagation_operator(g, config.binary_weights);
  return GraphBundle{std::move(g), std::move(op)};
}

}  // namespace crygcn
