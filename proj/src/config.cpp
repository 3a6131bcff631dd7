#include "crygcn/config.hpp"

#include <cmath>
#include <set>

#include "crygcn/error.hpp"

namespace crygcn {

using nlohmann::json;

std::string_view mode_name(Mode mode) noexcept {
  return mode == Mode::Supervised ? "supervised" : "semi_supervised";
}

namespace {

Mode parse_mode(const json& v) {
  const auto s = v.get<std::string>();
  if (s == "supervised") return Mode::Supervised;
  if (s == "semi_supervised" || s == "semi-supervised") return Mode::SemiSupervised;
  fail(ErrorKind::InvalidConfig, "unknown mode '" + s + "'");
}

void reject_unknown(const json& obj, std::string_view where, std::initializer_list<const char*> known) {
  if (!obj.is_object()) fail(ErrorKind::InvalidConfig, std::string(where) + " must be a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) fail(ErrorKind::InvalidConfig, "unknown field '" + key + "' in " + std::string(where));
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->template get<T>();
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
  if (auto it = obj.find(key); it != obj.end()) {
    if (it->is_null()) out.reset();
    else out = it->template get<T>();
  }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const BlobSpec& spec) {
  return json{{"classes", spec.classes},       {"per_class", spec.per_class},
              {"dims", spec.dims},             {"center_distance", spec.center_distance},
              {"noise_std", spec.noise_std},   {"seed", spec.seed}};
}

BlobSpec blob_spec_from_json(const json& doc) {
  try {
    reject_unknown(doc, "synth", {"classes", "per_class", "dims", "center_distance", "noise_std", "seed"});
    BlobSpec spec;
    read(doc, "classes", spec.classes);
    read(doc, "per_class", spec.per_class);
    read(doc, "dims", spec.dims);
    read(doc, "center_distance", spec.center_distance);
    read(doc, "noise_std", spec.noise_std);
    read(doc, "seed", spec.seed);
    return spec;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("synth spec: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json modes = json::array();
  for (Mode m : c.sweep.modes) modes.push_back(mode_name(m));
  return json{
      {"mode", mode_name(c.mode)},
      {"seed", c.seed},
      {"standardize", c.standardize},
      {"graph",
       {{"k", c.graph.k},
        {"sigma", c.graph.sigma ? json(*c.graph.sigma) : json("auto")},
        {"symmetrize", c.graph.symmetrize == SymmetrizePolicy::Max ? "max" : "none"},
        {"binary_weights", c.graph.binary_weights}}},
      {"hyper",
       {{"layers", c.hyper.layers},
        {"hidden", c.hyper.hidden},
        {"epochs", c.hyper.epochs},
        {"learning_rate", c.hyper.learning_rate},
        {"dropout", c.hyper.dropout},
        {"weight_decay", c.hyper.weight_decay},
        {"optimizer", c.hyper.optimizer == Optimizer::Adam ? "adam" : "sgd"}}},
      {"fold_count", optional_json(c.fold_count)},
      {"labeled_fraction", optional_json(c.labeled_fraction)},
      {"data",
       {{"features", optional_json(c.data.features)},
        {"labels", optional_json(c.data.labels)},
        {"synth", c.data.synth ? to_json(*c.data.synth) : json(nullptr)}}},
      {"baseline_accuracy", optional_json(c.baseline_accuracy)},
      {"record_traces", c.record_traces},
      {"sweep", {{"ratios", c.sweep.ratios}, {"seeds", c.sweep.seeds}, {"modes", modes}}},
  };
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  try {
    reject_unknown(doc, "config",
                   {"mode", "seed", "standardize", "graph", "hyper", "fold_count", "labeled_fraction", "data",
                    "baseline_accuracy", "record_traces", "sweep"});
    if (auto it = doc.find("mode"); it != doc.end()) c.mode = parse_mode(*it);
    read(doc, "seed", c.seed);
    read(doc, "standardize", c.standardize);
    read(doc, "record_traces", c.record_traces);
    read_optional(doc, "baseline_accuracy", c.baseline_accuracy);

    // Choosing the labeled-fraction protocol without mentioning fold_count
    // switches off the default cross-validation protocol.
    if (doc.contains("labeled_fraction") && !doc["labeled_fraction"].is_null() && !doc.contains("fold_count"))
      c.fold_count.reset();
    read_optional(doc, "fold_count", c.fold_count);
    read_optional(doc, "labeled_fraction", c.labeled_fraction);

    if (auto it = doc.find("graph"); it != doc.end()) {
      const json& g = *it;
      reject_unknown(g, "graph", {"k", "sigma", "symmetrize", "binary_weights"});
      read(g, "k", c.graph.k);
      read(g, "binary_weights", c.graph.binary_weights);
      if (auto s = g.find("sigma"); s != g.end()) {
        if (s->is_string()) {
          if (s->get<std::string>() != "auto") fail(ErrorKind::InvalidConfig, "sigma must be a number or \"auto\"");
          c.graph.sigma.reset();
        } else if (s->is_null()) {
          c.graph.sigma.reset();
        } else {
          c.graph.sigma = s->get<double>();
        }
      }
      if (auto s = g.find("symmetrize"); s != g.end()) {
        const auto p = s->get<std::string>();
        if (p == "max") c.graph.symmetrize = SymmetrizePolicy::Max;
        else if (p == "none") c.graph.symmetrize = SymmetrizePolicy::None;
        else fail(ErrorKind::InvalidConfig, "symmetrize must be \"max\" or \"none\"");
      }
    }
    if (auto it = doc.find("hyper"); it != doc.end()) {
      const json& h = *it;
      reject_unknown(h, "hyper",
                     {"layers", "hidden", "epochs", "learning_rate", "dropout", "weight_decay", "optimizer"});
      read(h, "layers", c.hyper.layers);
      read(h, "hidden", c.hyper.hidden);
      read(h, "epochs", c.hyper.epochs);
      read(h, "learning_rate", c.hyper.learning_rate);
      read(h, "dropout", c.hyper.dropout);
      read(h, "weight_decay", c.hyper.weight_decay);
      if (auto o = h.find("optimizer"); o != h.end()) {
        const auto name = o->get<std::string>();
        if (name == "adam") c.hyper.optimizer = Optimizer::Adam;
        else if (name == "sgd") c.hyper.optimizer = Optimizer::GradientDescent;
        else fail(ErrorKind::InvalidConfig, "optimizer must be \"adam\" or \"sgd\"");
      }
    }
    if (auto it = doc.find("data"); it != doc.end()) {
      const json& d = *it;
      reject_unknown(d, "data", {"features", "labels", "synth"});
      read_optional(d, "features", c.data.features);
      read_optional(d, "labels", c.data.labels);
      if (auto s = d.find("synth"); s != d.end() && !s->is_null()) c.data.synth = blob_spec_from_json(*s);
    }
    if (auto it = doc.find("sweep"); it != doc.end()) {
      const json& s = *it;
      reject_unknown(s, "sweep", {"ratios", "seeds", "modes"});
      read(s, "ratios", c.sweep.ratios);
      read(s, "seeds", c.sweep.seeds);
      if (auto m = s.find("modes"); m != s.end()) {
        c.sweep.modes.clear();
        for (const auto& v : *m) c.sweep.modes.push_back(parse_mode(v));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

void ExperimentConfig::validate() const {
  if (fold_count.has_value() == labeled_fraction.has_value())
    fail(ErrorKind::InvalidConfig, "exactly one of fold_count and labeled_fraction must be set");
  if (fold_count && *fold_count < 2) fail(ErrorKind::InvalidConfig, "fold_count must be >= 2");
  if (labeled_fraction && !(*labeled_fraction > 0.0 && *labeled_fraction < 1.0))
    fail(ErrorKind::InvalidConfig, "labeled_fraction must lie in (0, 1)");
  if (graph.k < 1) fail(ErrorKind::InvalidConfig, "graph.k must be >= 1");
  if (graph.sigma && !(*graph.sigma > 0.0)) fail(ErrorKind::InvalidConfig, "graph.sigma must be > 0");
  if (hyper.layers != 2) fail(ErrorKind::InvalidConfig, "hyper.layers is fixed at 2");
  if (hyper.hidden < 1) fail(ErrorKind::InvalidConfig, "hyper.hidden must be >= 1");
  if (hyper.epochs < 0) fail(ErrorKind::InvalidConfig, "hyper.epochs must be >= 0");
  if (!(hyper.learning_rate > 0.0)) fail(ErrorKind::InvalidConfig, "hyper.learning_rate must be > 0");
  if (!(hyper.dropout >= 0.0 && hyper.dropout < 1.0)) fail(ErrorKind::InvalidConfig, "hyper.dropout must lie in [0, 1)");
  if (!(hyper.weight_decay >= 0.0)) fail(ErrorKind::InvalidConfig, "hyper.weight_decay must be >= 0");
  for (double r : sweep.ratios)
    if (!(r > 0.0 && r < 1.0)) fail(ErrorKind::InvalidConfig, "sweep ratios must lie in (0, 1)");
  if (sweep.seeds.empty()) fail(ErrorKind::InvalidConfig, "sweep needs at least one seed");
  if (sweep.modes.empty()) fail(ErrorKind::InvalidConfig, "sweep needs at least one mode");
  if (baseline_accuracy && !(*baseline_accuracy >= 0.0 && *baseline_accuracy <= 1.0))
    fail(ErrorKind::InvalidConfig, "baseline_accuracy must lie in [0, 1]");
}

}  // namespace crygcn
