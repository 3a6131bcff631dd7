// crygcn command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crygcn/crygcn.h"

namespace {

using nlohmann::json;

enum ExitCode { kOk = 0, kVerificationFailed = 1, kInputError = 2, kInternalError = 3 };

struct CliFailure {
  int code;
  std::string name;
  std::string message;
};

int exit_code_for(crygcn_status s) {
  switch (s) {
    case CRYGCN_OK: return kOk;
    case CRYGCN_DIVERGENCE:
    case CRYGCN_INTERNAL_ERROR: return kInternalError;
    default: return kInputError;
  }
}

void check(crygcn_status s) {
  if (s != CRYGCN_OK) throw CliFailure{exit_code_for(s), crygcn_status_name(s), crygcn_last_error()};
}

// Owns a string returned by the C API.
struct CString {
  char* p = nullptr;
  ~CString() { crygcn_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DatasetDeleter { void operator()(crygcn_dataset* d) const { crygcn_dataset_free(d); } };
struct GraphDeleter { void operator()(crygcn_graph* g) const { crygcn_graph_free(g); } };
struct ModelDeleter { void operator()(crygcn_model* m) const { crygcn_model_free(m); } };
using DatasetPtr = std::unique_ptr<crygcn_dataset, DatasetDeleter>;
using GraphPtr = std::unique_ptr<crygcn_graph, GraphDeleter>;
using ModelPtr = std::unique_ptr<crygcn_model, ModelDeleter>;

std::string read_text(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure{kInputError, "ParseError", std::string("cannot open ") + what + " '" + path + "'"};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw CliFailure{kInputError, "IoError", "cannot write '" + path + "'"};
}

struct CommonOptions {
  std::string config_path;
  std::string features;
  std::string labels;
  std::string out;
  std::optional<std::uint64_t> seed;
  int verbosity = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& out_help, const std::string& out_default) {
  o.out = out_default;
  cmd->add_option("-c,--config", o.config_path, "JSON config file");
  cmd->add_option("--features", o.features, "feature CSV (overrides data.features)");
  cmd->add_option("--labels", o.labels, "label CSV (overrides data.labels)");
  cmd->add_option("-o,--out", o.out, out_help)->capture_default_str();
  cmd->add_option("--seed", o.seed, "seed override");
  cmd->add_flag("-v,--verbose", o.verbosity, "more output");
}

/// Config file + flag overrides, resolved and echoed by the library.
std::string resolve_config(const CommonOptions& o, const std::function<void(json&)>& extra = {}) {
  json doc = json::object();
  if (!o.config_path.empty()) {
    try {
      doc = json::parse(read_text(o.config_path, "config"));
    } catch (const json::exception& e) {
      throw CliFailure{kInputError, "InvalidConfig", std::string("config is not valid JSON: ") + e.what()};
    }
  }
  if (!o.features.empty()) doc["data"]["features"] = o.features;
  if (!o.labels.empty()) doc["data"]["labels"] = o.labels;
  if (o.seed) doc["seed"] = *o.seed;
  if (extra) extra(doc);
  CString resolved;
  check(crygcn_config_resolve(doc.dump().c_str(), &resolved.p));
  std::cout << "resolved config:\n" << resolved.str();
  return resolved.str();
}

DatasetPtr dataset_for(const std::string& config) {
  crygcn_dataset* d = nullptr;
  check(crygcn_dataset_from_config(config.c_str(), &d));
  return DatasetPtr(d);
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  CommonOptions common;
  std::optional<int> classes, per_class, dims;
  std::optional<double> center_distance, noise_std;
};

int cmd_synth(const SynthOptions& o) {
  const std::filesystem::path dir = o.common.out;
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const std::string features = o.common.features.empty() ? (dir / "features.csv").string() : o.common.features;
  const std::string labels = o.common.labels.empty() ? (dir / "labels.csv").string() : o.common.labels;
  CommonOptions c = o.common;
  c.features.clear();
  c.labels.clear();
  const std::string config = resolve_config(c, [&](json& doc) {
    json& s = doc["data"]["synth"];
    if (!s.is_object()) s = json::object();
    if (o.classes) s["classes"] = *o.classes;
    if (o.per_class) s["per_class"] = *o.per_class;
    if (o.dims) s["dims"] = *o.dims;
    if (o.center_distance) s["center_distance"] = *o.center_distance;
    if (o.noise_std) s["noise_std"] = *o.noise_std;
    if (o.common.seed && !s.contains("seed")) s["seed"] = *o.common.seed;
  });
  const json spec = json::parse(config)["data"]["synth"];
  crygcn_dataset* raw = nullptr;
  check(crygcn_dataset_synth(spec.dump().c_str(), &raw));
  DatasetPtr d(raw);
  check(crygcn_dataset_save(d.get(), features.c_str(), labels.c_str()));
  write_text(features + ".json", spec.dump(2) + "\n");
  std::cout << "wrote " << crygcn_dataset_rows(d.get()) << " x " << crygcn_dataset_cols(d.get()) << " features to "
            << features << ", labels to " << labels << "\n";
  return kOk;
}

int cmd_graph(const CommonOptions& o) {
  const std::string config = resolve_config(o);
  DatasetPtr d = dataset_for(config);
  crygcn_graph* raw = nullptr;
  check(crygcn_graph_build(d.get(), config.c_str(), nullptr, 0, &raw));
  GraphPtr g(raw);
  CString text;
  check(crygcn_graph_to_json(g.get(), &text.p));
  write_text(o.out, text.str());
  std::cout << "graph: " << crygcn_graph_nodes(g.get()) << " nodes, " << crygcn_graph_edges(g.get())
            << " directed edges -> " << o.out << "\n";
  return kOk;
}

struct TrainOptions {
  CommonOptions common;
  std::string mask_in;
  std::string mask_out;
  std::string trace_out;
};

int cmd_train(const TrainOptions& o) {
  const std::string config = resolve_config(o.common);
  DatasetPtr d = dataset_for(config);
  std::string mask_text;
  if (!o.mask_in.empty()) {
    mask_text = read_text(o.mask_in, "mask");
  } else {
    const json cfg = json::parse(config);
    if (!cfg["labeled_fraction"].is_null()) {
      CString m;
      check(crygcn_make_mask(d.get(), cfg["labeled_fraction"].get<double>(), cfg["seed"].get<std::uint64_t>(), &m.p));
      mask_text = m.str();
    }
  }
  if (!o.mask_out.empty() && !mask_text.empty()) write_text(o.mask_out, mask_text);

  crygcn_model* raw = nullptr;
  CString trace;
  check(crygcn_train(d.get(), config.c_str(), mask_text.empty() ? nullptr : mask_text.c_str(), &raw, &trace.p));
  ModelPtr m(raw);
  CString model_text;
  check(crygcn_model_to_json(m.get(), &model_text.p));
  write_text(o.common.out, model_text.str());
  if (!o.trace_out.empty()) write_text(o.trace_out, trace.str());
  const json t = json::parse(trace.str());
  const auto& loss = t["loss"];
  std::cout << "epochs: " << loss.size();
  if (!loss.empty()) std::cout << ", first loss " << loss.front().get<double>() << ", final loss " << loss.back().get<double>();
  std::cout << ", train accuracy " << t["final_train_accuracy"].get<double>() << "\nmodel -> " << o.common.out << "\n";
  return kOk;
}

struct EvalOptions {
  CommonOptions common;
  std::string model;
  std::string mask;
};

int cmd_eval(const EvalOptions& o) {
  const std::string config = resolve_config(o.common);
  DatasetPtr d = dataset_for(config);
  const std::string model_text = read_text(o.model, "model");
  crygcn_model* raw = nullptr;
  check(crygcn_model_from_json(model_text.c_str(), &raw));
  ModelPtr m(raw);
  const std::string mask_text = o.mask.empty() ? std::string() : read_text(o.mask, "mask");
  CString report, table;
  check(crygcn_evaluate(m.get(), d.get(), config.c_str(), mask_text.empty() ? nullptr : mask_text.c_str(),
                        &report.p, &table.p));
  std::cout << table.str();
  write_text(o.common.out, report.str());
  return kOk;
}

struct ExperimentOptions {
  CommonOptions common;
  std::string table_out;
};

void print_report_summary(const std::string& report, int verbosity) {
  const json r = json::parse(report);
  if (verbosity > 0 && r.contains("fold_accuracy")) {
    std::cout << "fold accuracy:";
    for (const auto& a : r["fold_accuracy"]) std::cout << " " << a.get<double>();
    std::cout << "\n";
  }
  if (r.contains("mean_accuracy")) std::cout << "mean accuracy: " << r["mean_accuracy"].get<double>() << "\n";
  std::cout << "fingerprint: " << r["fingerprint"].get<std::string>() << "\n";
}

int cmd_cv(const ExperimentOptions& o) {
  const std::string config = resolve_config(o.common);
  DatasetPtr d = dataset_for(config);
  CString report, table;
  check(crygcn_cross_validate(d.get(), config.c_str(), &report.p, &table.p));
  std::cout << table.str();
  print_report_summary(report.str(), o.common.verbosity);
  write_text(o.common.out, report.str());
  if (!o.table_out.empty()) write_text(o.table_out, table.str());
  return kOk;
}

int cmd_sweep(const ExperimentOptions& o) {
  const std::string config = resolve_config(o.common);
  DatasetPtr d = dataset_for(config);
  CString report, table;
  check(crygcn_ratio_sweep(d.get(), config.c_str(), &report.p, &table.p));
  std::cout << table.str();
  print_report_summary(report.str(), o.common.verbosity);
  write_text(o.common.out, report.str());
  if (!o.table_out.empty()) write_text(o.table_out, table.str());
  return kOk;
}

int cmd_gradcheck(const crygcn_gradcheck_options& options) {
  double err = 0.0;
  CString detail;
  check(crygcn_gradcheck(&options, &err, &detail.p));
  const json r = json::parse(detail.str());
  std::printf("max relative error: %.6e (worst block %s)\n", err, r["worst_block"].get<std::string>().c_str());
  const bool ok = err < 1e-4;
  std::printf("%s\n", ok ? "gradient check passed" : "gradient check FAILED (threshold 1e-4)");
  return ok ? kOk : kVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph convolutional network node classification over kNN similarity graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", crygcn_version());

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a Gaussian-blob dataset (features.csv + labels.csv)");
  add_common(synth_cmd, synth.common, "output directory", ".");
  synth_cmd->add_option("--classes", synth.classes);
  synth_cmd->add_option("--per-class", synth.per_class);
  synth_cmd->add_option("--dims", synth.dims);
  synth_cmd->add_option("--center-distance", synth.center_distance);
  synth_cmd->add_option("--noise-std", synth.noise_std);

  CommonOptions graph;
  auto* graph_cmd = app.add_subcommand("graph", "build the kNN similarity graph over a dataset");
  add_common(graph_cmd, graph, "graph JSON", "graph.json");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a GCN on the full-dataset graph");
  add_common(train_cmd, train.common, "model JSON", "model.json");
  train_cmd->add_option("--mask", train.mask_in, "label mask JSON limiting the loss");
  train_cmd->add_option("--mask-out", train.mask_out, "write the mask used");
  train_cmd->add_option("--trace", train.trace_out, "write the per-epoch loss trace");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "apply a trained model to a dataset graph and score it");
  add_common(eval_cmd, eval.common, "report JSON", "eval_report.json");
  eval_cmd->add_option("-m,--model", eval.model, "model JSON")->required();
  eval_cmd->add_option("--mask", eval.mask, "score only the unlabeled nodes of this mask");

  ExperimentOptions cv;
  auto* cv_cmd = app.add_subcommand("cv", "stratified k-fold cross validation");
  add_common(cv_cmd, cv.common, "report JSON", "cv_report.json");
  cv_cmd->add_option("--table", cv.table_out, "also write the text table here");

  ExperimentOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "labeled-ratio sweep over several seeds");
  add_common(sweep_cmd, sweep.common, "report JSON", "sweep_report.json");
  sweep_cmd->add_option("--table", sweep.table_out, "also write the text table here");

  crygcn_gradcheck_options gc;
  crygcn_gradcheck_defaults(&gc);
  auto* gc_cmd = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  gc_cmd->add_option("-n,--nodes", gc.nodes)->capture_default_str();
  gc_cmd->add_option("-d,--features", gc.features)->capture_default_str();
  gc_cmd->add_option("--hidden", gc.hidden)->capture_default_str();
  gc_cmd->add_option("-C,--classes", gc.classes)->capture_default_str();
  gc_cmd->add_option("-k", gc.k)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--step", gc.step)->capture_default_str();
  bool corrupt = false;
  gc_cmd->add_flag("--corrupt-gradient", corrupt, "test hook: perturb the analytic gradient")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*graph_cmd) return cmd_graph(graph);
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*cv_cmd) return cmd_cv(cv);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*gc_cmd) {
      gc.corrupt = corrupt ? 1 : 0;
      return cmd_gradcheck(gc);
    }
  } catch (const CliFailure& f) {
    std::cerr << f.name << ": " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "InternalError: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}
