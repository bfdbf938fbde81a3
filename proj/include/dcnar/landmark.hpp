#pragma once

#include "dcnar/panel.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace dcnar {

/// Which origins count as "at risk" for an indicator.
enum class AtRiskRule {
    currently_healthy, ///< indicator is above its threshold at the origin
    never_failed,      ///< indicator has not been at or below its threshold at any observed period up to the origin
};

std::string to_string(AtRiskRule rule);
AtRiskRule at_risk_rule_from_string(const std::string& text);

struct LandmarkOptions {
    std::size_t horizon = 5;
    /// Number of fully observed states required ending at the origin.
    std::size_t history = 1;
    std::optional<int> origin_min;
    std::optional<int> origin_max;
    AtRiskRule rule = AtRiskRule::currently_healthy;
};

/// A scored (unit, origin, indicator) cell with its observed outcome: 1 iff the
/// indicator is at or below its threshold somewhere in origin+1..origin+h.
struct Landmark {
    std::size_t unit = 0;
    std::size_t position = 0;
    std::size_t indicator = 0;
    bool outcome = false;
};

/// Every eligible cell: the history is fully observed, the outcome window
/// is fully observed for the indicator, and the at-risk rule holds.
std::vector<Landmark> landmark_origins(const PanelDataset& data, const FailureLabels& labels,
                                       const LandmarkOptions& options);

} // namespace dcnar
