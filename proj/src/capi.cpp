#include "crygcn/crygcn.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "crygcn/config.hpp"
#include "crygcn/dataset.hpp"
#include "crygcn/error.hpp"
#include "crygcn/experiment.hpp"
#include "crygcn/gcn.hpp"
#include "crygcn/graph.hpp"
#include "crygcn/serialize.hpp"

struct crygcn_dataset {
  crygcn::Dataset data;
};

struct crygcn_graph {
  crygcn::GraphBundle bundle;
};

struct crygcn_model {
  crygcn::GcnModel model;
};

namespace {

using namespace crygcn;
using nlohmann::json;

thread_local std::string g_last_error;

crygcn_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError: return CRYGCN_PARSE_ERROR;
    case ErrorKind::EmptyInput: return CRYGCN_EMPTY_INPUT;
    case ErrorKind::DegenerateLabels: return CRYGCN_DEGENERATE_LABELS;
    case ErrorKind::InsufficientClassSize: return CRYGCN_INSUFFICIENT_CLASS_SIZE;
    case ErrorKind::InvalidConfig: return CRYGCN_INVALID_CONFIG;
    case ErrorKind::DegenerateGeometry: return CRYGCN_DEGENERATE_GEOMETRY;
    case ErrorKind::DegenerateGraph: return CRYGCN_DEGENERATE_GRAPH;
    case ErrorKind::ShapeError: return CRYGCN_SHAPE_ERROR;
    case ErrorKind::EmptyMask: return CRYGCN_EMPTY_MASK;
    case ErrorKind::EmptyEvaluation: return CRYGCN_EMPTY_EVALUATION;
    case ErrorKind::InvalidSplit: return CRYGCN_INVALID_SPLIT;
    case ErrorKind::DivergenceError: return CRYGCN_DIVERGENCE;
    case ErrorKind::IoError: return CRYGCN_IO_ERROR;
    case ErrorKind::Internal: return CRYGCN_INTERNAL_ERROR;
  }
  return CRYGCN_INTERNAL_ERROR;
}

template <typename F>
crygcn_status guard(F&& body) noexcept {
  try {
    body();
    g_last_error.clear();
    return CRYGCN_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CRYGCN_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CRYGCN_INTERNAL_ERROR;
  } catch (...) {
    g_last_error = "unknown exception";
    return CRYGCN_INTERNAL_ERROR;
  }
}

// Null pointers are caller bugs, reported separately from library failures.
template <typename F>
crygcn_status guard_args(bool args_ok, const char* what, F&& body) noexcept {
  if (!args_ok) {
    g_last_error = std::string("null argument: ") + what;
    return CRYGCN_INVALID_ARGUMENT;
  }
  return guard(std::forward<F>(body));
}

char* to_c_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  if (out) *out = to_c_string(s);
}

ExperimentConfig config_from(const char* text) {
  if (text == nullptr || *text == '\0') {
    ExperimentConfig c;
    c.validate();
    return c;
  }
  return parse_config(text);
}

json parse_json(const char* text, const char* what, ErrorKind kind = ErrorKind::ParseError) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(kind, std::string(what) + " is not valid JSON: " + e.what());
  }
}

LabelMask mask_from(const char* text, std::size_t n) {
  LabelMask m = mask_from_json(parse_json(text, "mask"));
  if (m.mask.size() != n) fail(ErrorKind::ShapeError, "mask length does not match the dataset");
  return m;
}

}  // namespace

extern "C" {

const char* crygcn_version(void) { return "0.1.0"; }

const char* crygcn_status_name(crygcn_status status) {
  switch (status) {
    case CRYGCN_OK: return "Ok";
    case CRYGCN_PARSE_ERROR: return "ParseError";
    case CRYGCN_EMPTY_INPUT: return "EmptyInput";
    case CRYGCN_DEGENERATE_LABELS: return "DegenerateLabels";
    case CRYGCN_INSUFFICIENT_CLASS_SIZE: return "InsufficientClassSize";
    case CRYGCN_INVALID_CONFIG: return "InvalidConfig";
    case CRYGCN_DEGENERATE_GEOMETRY: return "DegenerateGeometry";
    case CRYGCN_DEGENERATE_GRAPH: return "DegenerateGraph";
    case CRYGCN_SHAPE_ERROR: return "ShapeError";
    case CRYGCN_EMPTY_MASK: return "EmptyMask";
    case CRYGCN_EMPTY_EVALUATION: return "EmptyEvaluation";
    case CRYGCN_INVALID_SPLIT: return "InvalidSplit";
    case CRYGCN_DIVERGENCE: return "DivergenceError";
    case CRYGCN_IO_ERROR: return "IoError";
    case CRYGCN_INVALID_ARGUMENT: return "InvalidArgument";
    case CRYGCN_INTERNAL_ERROR: return "InternalError";
  }
  return "InternalError";
}

const char* crygcn_last_error(void) { return g_last_error.c_str(); }

void crygcn_string_free(char* s) { std::free(s); }

crygcn_status crygcn_config_resolve(const char* config_json, char** resolved_json) {
  return guard_args(resolved_json != nullptr, "resolved_json",
                    [&] { emit(resolved_json, dump(to_json(config_from(config_json)))); });
}

crygcn_status crygcn_dataset_load(const char* features_path, const char* labels_path, crygcn_dataset** out) {
  return guard_args(features_path && labels_path && out, "path or out", [&] {
    FeatureMatrix x = load_features(features_path);
    LabelVector y = load_labels(labels_path);
    if (x.rows() != y.size()) fail(ErrorKind::ShapeError, "feature and label row counts differ");
    *out = new crygcn_dataset{Dataset{std::move(x), std::move(y)}};
  });
}

crygcn_status crygcn_dataset_synth(const char* spec_json, crygcn_dataset** out) {
  return guard_args(out != nullptr, "out", [&] {
    BlobSpec spec = spec_json && *spec_json ? blob_spec_from_json(parse_json(spec_json, "synth spec", ErrorKind::InvalidConfig)) : BlobSpec{};
    *out = new crygcn_dataset{synth_blobs(spec)};
  });
}

crygcn_status crygcn_dataset_from_config(const char* config_json, crygcn_dataset** out) {
  return guard_args(out != nullptr, "out", [&] { *out = new crygcn_dataset{load_dataset(config_from(config_json))}; });
}

crygcn_status crygcn_dataset_save(const crygcn_dataset* dataset, const char* features_path, const char* labels_path) {
  return guard_args(dataset && features_path && labels_path, "dataset or path", [&] {
    save_features(dataset->data.features, features_path);
    save_labels(dataset->data.labels, labels_path);
  });
}

size_t crygcn_dataset_rows(const crygcn_dataset* dataset) { return dataset ? dataset->data.features.rows() : 0; }
size_t crygcn_dataset_cols(const crygcn_dataset* dataset) { return dataset ? dataset->data.features.cols() : 0; }
size_t crygcn_dataset_classes(const crygcn_dataset* dataset) {
  return dataset ? static_cast<size_t>(dataset->data.labels.class_count()) : 0;
}
void crygcn_dataset_free(crygcn_dataset* dataset) { delete dataset; }

crygcn_status crygcn_make_folds(const crygcn_dataset* dataset, int fold_count, uint64_t seed, char** split_json) {
  return guard_args(dataset && split_json, "dataset or split_json", [&] {
    emit(split_json, dump(to_json(make_folds(dataset->data.labels, fold_count, seed))));
  });
}

crygcn_status crygcn_make_mask(const crygcn_dataset* dataset, double fraction, uint64_t seed, char** mask_json) {
  return guard_args(dataset && mask_json, "dataset or mask_json", [&] {
    emit(mask_json, dump(to_json(make_label_mask(dataset->data.labels, fraction, seed))));
  });
}

crygcn_status crygcn_graph_build(const crygcn_dataset* dataset, const char* config_json, const size_t* subset,
                                 size_t subset_len, crygcn_graph** out) {
  return guard_args(dataset && out && (subset || subset_len == 0), "dataset, out or subset", [&] {
    const ExperimentConfig config = config_from(config_json);
    const FeatureMatrix x = config.standardize ? standardize(dataset->data.features) : dataset->data.features;
    GraphBundle b = subset == nullptr
                        ? build_graph(x, GraphMode::SemiSupervised, std::nullopt, config.graph)
                        : build_graph(x, GraphMode::SupervisedTrain, std::span<const std::size_t>(subset, subset_len),
                                      config.graph);
    *out = new crygcn_graph{std::move(b)};
  });
}

crygcn_status crygcn_graph_to_json(const crygcn_graph* graph, char** graph_json) {
  return guard_args(graph && graph_json, "graph or graph_json",
                    [&] { emit(graph_json, dump(to_json(graph->bundle.graph))); });
}

size_t crygcn_graph_nodes(const crygcn_graph* graph) { return graph ? graph->bundle.graph.n : 0; }
size_t crygcn_graph_edges(const crygcn_graph* graph) { return graph ? graph->bundle.graph.edges.size() : 0; }
void crygcn_graph_free(crygcn_graph* graph) { delete graph; }

crygcn_status crygcn_train(const crygcn_dataset* dataset, const char* config_json, const char* mask_json,
                           crygcn_model** out, char** trace_json) {
  return guard_args(dataset && out, "dataset or out", [&] {
    const ExperimentConfig config = config_from(config_json);
    const Dataset& d = dataset->data;
    const FeatureMatrix x = config.standardize ? standardize(d.features) : d.features;
    LabelMask mask = mask_json ? mask_from(mask_json, d.labels.size())
                     : config.labeled_fraction
                         ? make_label_mask(d.labels, *config.labeled_fraction, config.seed)
                         : LabelMask::from_bools(std::vector<bool>(d.labels.size(), true));
    GraphBundle g = build_graph(x, GraphMode::SemiSupervised, std::nullopt, config.graph);
    Hyperparams h = config.hyper;
    h.seed = derive_seed(config.seed, "run");
    TrainResult r = train(g.op, x, d.labels, mask, h);
    emit(trace_json, dump(to_json(r.trace)));
    *out = new crygcn_model{std::move(r.model)};
  });
}

crygcn_status crygcn_model_from_json(const char* model_json, crygcn_model** out) {
  return guard_args(model_json && out, "model_json or out",
                    [&] { *out = new crygcn_model{model_from_json(parse_json(model_json, "model"))}; });
}

crygcn_status crygcn_model_to_json(const crygcn_model* model, char** model_json) {
  return guard_args(model && model_json, "model or model_json",
                    [&] { emit(model_json, dump(to_json(model->model))); });
}

void crygcn_model_free(crygcn_model* model) { delete model; }

crygcn_status crygcn_predict(const crygcn_model* model, const crygcn_dataset* dataset, const char* config_json,
                             int* classes) {
  return guard_args(model && dataset && classes, "model, dataset or classes", [&] {
    const ExperimentConfig config = config_from(config_json);
    const FeatureMatrix x = config.standardize ? standardize(dataset->data.features) : dataset->data.features;
    GraphBundle g = build_graph(x, GraphMode::SemiSupervised, std::nullopt, config.graph);
    const std::vector<int> p = predict(model->model, g.op, x);
    std::copy(p.begin(), p.end(), classes);
  });
}

crygcn_status crygcn_evaluate(const crygcn_model* model, const crygcn_dataset* dataset, const char* config_json,
                              const char* mask_json, char** report_json, char** table_text) {
  return guard_args(model && dataset, "model or dataset", [&] {
    const ExperimentConfig config = config_from(config_json);
    const Dataset& d = dataset->data;
    const FeatureMatrix x = config.standardize ? standardize(d.features) : d.features;
    GraphBundle g = build_graph(x, GraphMode::SemiSupervised, std::nullopt, config.graph);
    const std::vector<int> predicted = predict(model->model, g.op, x);
    std::vector<std::size_t> eval;
    if (mask_json) {
      eval = mask_from(mask_json, d.labels.size()).unlabeled_indices();
    } else {
      eval.resize(d.labels.size());
      for (std::size_t i = 0; i < eval.size(); ++i) eval[i] = i;
    }
    const Metrics m = compute_metrics(predicted, d.labels, eval);

    ExperimentReport r;
    r.protocol = "evaluate";
    r.mode = config.mode;
    r.train_test = "---";
    r.fold_accuracy = {m.accuracy};
    r.mean_accuracy = m.accuracy;
    r.confusion = m.confusion;
    r.per_class_recall = m.per_class_recall;
    r.class_names = d.labels.class_names();
    r.evaluated = m.total;
    r.graphs_built = 1;
    r.config = to_json(config);
    json doc = to_json(r);
    doc["predictions"] = predicted;
    emit(report_json, dump(doc));
    emit(table_text, format_table(r, config.baseline_accuracy));
  });
}

crygcn_status crygcn_run_semi_supervised(const crygcn_dataset* dataset, const char* config_json,
                                         const char* mask_json, char** report_json, char** table_text) {
  return guard_args(dataset != nullptr, "dataset", [&] {
    const ExperimentConfig config = config_from(config_json);
    const Dataset& d = dataset->data;
    LabelMask mask = mask_json ? mask_from(mask_json, d.labels.size())
                               : make_label_mask(d.labels, config.labeled_fraction.value_or(0.2), config.seed);
    ExperimentReport r = run_semi_supervised(d.features, d.labels, mask, config);
    emit(report_json, dump(to_json(r)));
    emit(table_text, format_table(r, config.baseline_accuracy));
  });
}

crygcn_status crygcn_run_supervised(const crygcn_dataset* dataset, const char* config_json, const size_t* train_idx,
                                    size_t train_len, const size_t* test_idx, size_t test_len, char** report_json,
                                    char** table_text) {
  return guard_args(dataset && (train_idx || !train_len) && (test_idx || !test_len), "dataset or index list", [&] {
    const ExperimentConfig config = config_from(config_json);
    ExperimentReport r = run_supervised(dataset->data.features, dataset->data.labels,
                                        std::span<const std::size_t>(train_idx, train_len),
                                        std::span<const std::size_t>(test_idx, test_len), config);
    emit(report_json, dump(to_json(r)));
    emit(table_text, format_table(r, config.baseline_accuracy));
  });
}

crygcn_status crygcn_cross_validate(const crygcn_dataset* dataset, const char* config_json, char** report_json,
                                    char** table_text) {
  return guard_args(dataset != nullptr, "dataset", [&] {
    const ExperimentConfig config = config_from(config_json);
    ExperimentReport r = cross_validate(dataset->data.features, dataset->data.labels, config);
    emit(report_json, dump(to_json(r)));
    emit(table_text, format_table(r, config.baseline_accuracy));
  });
}

crygcn_status crygcn_ratio_sweep(const crygcn_dataset* dataset, const char* config_json, char** report_json,
                                 char** table_text) {
  return guard_args(dataset != nullptr, "dataset", [&] {
    const ExperimentConfig config = config_from(config_json);
    SweepReport r = ratio_sweep(dataset->data.features, dataset->data.labels, config);
    emit(report_json, dump(to_json(r)));
    emit(table_text, format_table(r, config.baseline_accuracy));
  });
}

void crygcn_gradcheck_defaults(crygcn_gradcheck_options* options) {
  if (!options) return;
  options->nodes = 12;
  options->features = 5;
  options->hidden = 4;
  options->classes = 3;
  options->k = 2;
  options->seed = 0;
  options->step = 1e-5;
  options->weight_decay = 0.0;
  options->corrupt = 0;
}

crygcn_status crygcn_gradcheck(const crygcn_gradcheck_options* options, double* max_relative_error,
                               char** detail_json) {
  return guard_args(max_relative_error != nullptr, "max_relative_error", [&] {
    crygcn_gradcheck_options o;
    crygcn_gradcheck_defaults(&o);
    if (options) o = *options;
    GradCheckInstance inst = random_gradcheck_instance(o.nodes, o.features, static_cast<int>(o.hidden),
                                                       static_cast<int>(o.classes), o.k, o.seed);
    GradCheckOptions go;
    go.step = o.step;
    go.weight_decay = o.weight_decay;
    go.corrupt_analytic = o.corrupt != 0;
    const GradCheckReport r = gradient_check(inst.op, inst.features, inst.labels, inst.mask, inst.model, go);
    *max_relative_error = r.max_relative_error;
    emit(detail_json, dump(json{{"nodes", o.nodes},
                                {"features", o.features},
                                {"hidden", o.hidden},
                                {"classes", o.classes},
                                {"k", o.k},
                                {"seed", o.seed},
                                {"step", o.step},
                                {"max_relative_error", r.max_relative_error},
                                {"worst_block", r.worst_block},
                                {"block_errors", {{"W1", r.w1_error}, {"b1", r.b1_error}, {"W2", r.w2_error}, {"b2", r.b2_error}}}}));
  });
}

}  // extern "C"
