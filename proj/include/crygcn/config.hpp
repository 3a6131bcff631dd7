#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "crygcn/dataset.hpp"
#include "crygcn/gcn.hpp"
#include "crygcn/graph.hpp"

namespace crygcn {

enum class Mode { Supervised, SemiSupervised };

std::string_view mode_name(Mode mode) noexcept;

struct DataSource {
  std::optional<std::string> features;
  std::optional<std::string> labels;
  std::optional<BlobSpec> synth;
};

struct SweepSettings {
  std::vector<double> ratios{0.2, 0.5, 0.8};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<Mode> modes{Mode::Supervised, Mode::SemiSupervised};
};

/// Run description. Defaults: 2-layer GCN with 32
/// hidden units, 2000 epochs, learning rate 0.001, dropout 0.1, k = 3 and
/// 5-fold cross validation.
struct ExperimentConfig {
  Mode mode = Mode::SemiSupervised;
  GraphConfig graph;
  Hyperparams hyper;  // hyper.seed is ignored; run seeds derive from `seed`
  std::optional<int> fold_count = 5;
  std::optional<double> labeled_fraction;
  std::uint64_t seed = 0;
  bool standardize = false;
  DataSource data;
  std::optional<double> baseline_accuracy;
  bool record_traces = false;
  SweepSettings sweep;

  /// Throws InvalidConfig when a field is out of range or both/neither of
  /// fold_count and labeled_fraction are set.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const BlobSpec& spec);

/// Missing fields take their defaults; unknown fields are rejected.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig parse_config(std::string_view text);
BlobSpec blob_spec_from_json(const nlohmann::json& doc);

}  // namespace crygcn
