#include "crygcn/serialize.hpp"

#include <algorithm>

#include "crygcn/error.hpp"

namespace crygcn {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const RowVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from(const json& rows, Eigen::Index r, Eigen::Index c, const char* name) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != r)
    fail(ErrorKind::ParseError, std::string("model field ") + name + " has the wrong row count");
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
      fail(ErrorKind::ParseError, std::string("model field ") + name + " has a ragged row");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

RowVector vector_from(const json& v, Eigen::Index size, const char* name) {
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != size)
    fail(ErrorKind::ParseError, std::string("model field ") + name + " has the wrong length");
  RowVector out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = v[static_cast<std::size_t>(i)].get<double>();
  return out;
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const SplitPlan& plan) {
  return json{{"seed", plan.seed}, {"fold_count", plan.fold_count}, {"assignments", plan.assignments}};
}

json to_json(const LabelMask& mask) {
  json bits = json::array();
  for (bool b : mask.mask) bits.push_back(b);
  return json{{"seed", mask.seed}, {"fraction", mask.fraction}, {"mask", std::move(bits)}};
}

json to_json(const SimilarityGraph& graph) {
  json edges = json::array();
  for (const auto& e : graph.edges) edges.push_back(json::array({e.src, e.dst, e.weight}));
  return json{{"n", graph.n},
              {"k", graph.k},
              {"sigma", graph.sigma},
              {"symmetrized", graph.symmetrized},
              {"node_ids", graph.node_ids},
              {"edges", std::move(edges)}};
}

json to_json(const GcnModel& model) {
  const ModelDims d = model.dims();
  return json{{"dims", {d.input, d.hidden, d.classes}},
              {"W1", matrix_json(model.w1)},
              {"b1", vector_json(model.b1)},
              {"W2", matrix_json(model.w2)},
              {"b2", vector_json(model.b2)}};
}

json to_json(const TrainingTrace& trace, bool include_wall_time) {
  json out{{"loss", trace.loss}, {"final_train_accuracy", trace.final_train_accuracy}};
  if (include_wall_time) out["wall_seconds"] = trace.wall_seconds;
  return out;
}

json to_json(const ExperimentReport& r) {
  json traces = json::array();
  for (const auto& t : r.traces) traces.push_back(to_json(t));
  return json{{"protocol", r.protocol},
              {"mode", mode_name(r.mode)},
              {"train_test", r.train_test},
              {"fold_accuracy", r.fold_accuracy},
              {"mean_accuracy", r.mean_accuracy},
              {"confusion", r.confusion},
              {"per_class_recall", r.per_class_recall},
              {"class_names", r.class_names},
              {"evaluated", r.evaluated},
              {"graphs_built", r.graphs_built},
              {"train_accuracy", r.train_accuracy},
              {"traces", std::move(traces)},
              {"fingerprint", r.fingerprint},
              {"config", r.config}};
}

json to_json(const SweepReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back(json{{"ratio", row.ratio},
                        {"train_test", train_test_label(row.ratio)},
                        {"mode", mode_name(row.mode)},
                        {"accuracies", row.accuracies},
                        {"mean_accuracy", row.mean_accuracy},
                        {"std_accuracy", row.std_accuracy}});
  return json{{"rows", std::move(rows)}, {"fingerprint", r.fingerprint}, {"config", r.config}};
}

SplitPlan split_from_json(const json& doc) {
  return guarded("split", [&] {
    SplitPlan plan;
    plan.seed = doc.at("seed").get<std::uint64_t>();
    plan.fold_count = doc.at("fold_count").get<int>();
    plan.assignments = doc.at("assignments").get<std::vector<int>>();
    for (int a : plan.assignments)
      if (a < 0 || a >= plan.fold_count) fail(ErrorKind::ParseError, "fold assignment out of range");
    return plan;
  });
}

LabelMask mask_from_json(const json& doc) {
  return guarded("mask", [&] {
    LabelMask m = LabelMask::from_bools(doc.at("mask").get<std::vector<bool>>());
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.fraction = doc.at("fraction").get<double>();
    return m;
  });
}

SimilarityGraph graph_from_json(const json& doc) {
  return guarded("graph", [&] {
    SimilarityGraph g;
    g.n = doc.at("n").get<std::size_t>();
    g.k = doc.at("k").get<int>();
    g.sigma = doc.at("sigma").get<double>();
    g.symmetrized = doc.at("symmetrized").get<bool>();
    g.node_ids = doc.at("node_ids").get<std::vector<std::size_t>>();
    for (const auto& e : doc.at("edges")) {
      Edge edge{e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>()};
      if (edge.src >= g.n || edge.dst >= g.n || edge.src == edge.dst || !(edge.weight > 0.0) || edge.weight > 1.0)
        fail(ErrorKind::ParseError, "invalid edge in graph document");
      g.edges.push_back(edge);
    }
    return g;
  });
}

GcnModel model_from_json(const json& doc) {
  return guarded("model", [&] {
    const auto dims = doc.at("dims").get<std::vector<int>>();
    if (dims.size() != 3 || *std::min_element(dims.begin(), dims.end()) < 1)
      fail(ErrorKind::ParseError, "model dims must be three positive integers");
    GcnModel m;
    m.w1 = matrix_from(doc.at("W1"), dims[0], dims[1], "W1");
    m.b1 = vector_from(doc.at("b1"), dims[1], "b1");
    m.w2 = matrix_from(doc.at("W2"), dims[1], dims[2], "W2");
    m.b2 = vector_from(doc.at("b2"), dims[2], "b2");
    return m;
  });
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace crygcn
