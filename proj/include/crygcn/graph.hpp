#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "crygcn/dataset.hpp"
#include "crygcn/linalg.hpp"

namespace crygcn {

/// Dense symmetric n x n Euclidean distances with a zero diagonal.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(Matrix entries) : entries_(std::move(entries)) {}

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Matrix& entries() const noexcept { return entries_; }

 private:
  Matrix entries_;
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

enum class SymmetrizePolicy { None, Max };

/// Weighted kNN graph. Edges are directed and kept sorted by (src, dst).
struct SimilarityGraph {
  std::size_t n = 0;
  int k = 0;
  double sigma = 1.0;
  bool symmetrized = false;
  std::vector<std::size_t> node_ids;
  std::vector<Edge> edges;

  std::vector<std::size_t> out_degrees() const;
};

/// S = D~^{-1/2} (A + I) D~^{-1/2} with D~ = D + I, D the row sums of A.
struct PropagationOperator {
  SparseMatrix entries;
  bool symmetrized = false;

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries.rows()); }
  static PropagationOperator identity(std::size_t n);
};

struct GraphConfig {
  int k = 3;
  std::optional<double> sigma;  // nullopt selects the median-distance bandwidth
  SymmetrizePolicy symmetrize = SymmetrizePolicy::Max;
  bool binary_weights = false;
};

enum class GraphMode { SupervisedTrain, SupervisedTest, SemiSupervised };

struct GraphBundle {
  SimilarityGraph graph;
  PropagationOperator op;
};

DistanceMatrix pairwise_distances(const FeatureMatrix& features);

/// Median of the strictly positive upper-triangle distances; the middle two
/// are averaged for an even count.
double auto_sigma(const DistanceMatrix& dist);

inline double gaussian_similarity(double distance, double sigma) {
  return std::exp(-(distance * distance) / (2.0 * sigma * sigma));
}

Matrix distance_to_similarity(const DistanceMatrix& dist, std::optional<double> sigma);

SimilarityGraph knn_edges(const DistanceMatrix& dist, int k, std::optional<double> sigma = std::nullopt);

SimilarityGraph symmetrize(const SimilarityGraph& graph, SymmetrizePolicy policy);

PropagationOperator propagation_operator(const SimilarityGraph& graph, bool binary_weights = false);

GraphBundle build_graph(const FeatureMatrix& features, GraphMode mode,
                        std::optional<std::span<const std::size_t>> node_subset, const GraphConfig& config);

}  // namespace crygcn
