#pragma once

#include "dcnar/discovery.hpp"
#include "dcnar/nar.hpp"
#include "dcnar/panel.hpp"
#include "dcnar/synthetic.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace dcnar {

using Json = nlohmann::ordered_json;

/// Pretty-printed with a trailing newline; doubles round-trip exactly.
void write_json(const std::string& path, const Json& doc);
Json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);

Json to_json(const std::vector<IndicatorSpec>& specs);
std::vector<IndicatorSpec> specs_from_json(const Json& doc);

Json to_json(const NormStats& stats);
NormStats norm_stats_from_json(const Json& doc);

Json to_json(const CausalScoreMatrix& scores);
CausalScoreMatrix scores_from_json(const Json& doc);

Json to_json(const AdjacencyMatrix& graph);
AdjacencyMatrix adjacency_from_json(const Json& doc);

Json to_json(const NarModel& model);
NarModel nar_model_from_json(const Json& doc);

Json to_json(const GroundTruthSystem& system);
GroundTruthSystem system_from_json(const Json& doc);

/// `source,target,score` for every edge of `graph`, rows ordered by (target, source).
void write_edge_list(const std::string& path, const AdjacencyMatrix& graph, const CausalScoreMatrix& scores);
/// `source,target,lag,coefficient` ground-truth sidecar.
void write_truth_edges(const std::string& path, const GroundTruthSystem& system);
void write_lambda_selection(const std::string& path, const LambdaSelection& selection);

} // namespace dcnar
