#pragma once

#include "json.hpp"

#include "crygcn/dataset.hpp"
#include "crygcn/experiment.hpp"
#include "crygcn/gcn.hpp"
#include "crygcn/graph.hpp"

// JSON forms of the on-disk artifacts. Doubles are written in their shortest
// round-trip form, so reading a document back reproduces every bit.
namespace crygcn {

nlohmann::json to_json(const SplitPlan& plan);
nlohmann::json to_json(const LabelMask& mask);
nlohmann::json to_json(const SimilarityGraph& graph);
nlohmann::json to_json(const GcnModel& model);
nlohmann::json to_json(const TrainingTrace& trace, bool include_wall_time = false);
nlohmann::json to_json(const ExperimentReport& report);
nlohmann::json to_json(const SweepReport& report);

SplitPlan split_from_json(const nlohmann::json& doc);
LabelMask mask_from_json(const nlohmann::json& doc);
SimilarityGraph graph_from_json(const nlohmann::json& doc);
GcnModel model_from_json(const nlohmann::json& doc);

/// Canonical text: two-space indent, sorted keys, trailing newline.
std::string dump(const nlohmann::json& doc);

}  // namespace crygcn
