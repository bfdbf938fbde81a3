#pragma once

#include "dcnar/discovery.hpp"
#include "dcnar/landmark.hpp"
#include "dcnar/metrics.hpp"
#include "dcnar/nar.hpp"
#include "dcnar/panel.hpp"
#include "dcnar/serialize.hpp"
#include "dcnar/survival.hpp"
#include "dcnar/synthetic.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dcnar {

/// Every option of every command. Defaults are materialized into the output
/// directory as `config_<command>.json` so a run can be reproduced exactly.
struct RunConfig {
    std::string data;
    std::optional<int> cutoff; ///< default: period at 70% of the observed range
    double quantile = 0.2;
    std::string out = "out";
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    struct Discovery {
        std::size_t max_lag = 3;
        std::size_t hidden = 8;
        std::vector<double> lambda_grid{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
        double output_ridge = 1e-2;
        std::size_t max_epochs = 5000;
        double tolerance = 1e-6;
        std::size_t validation_periods = 5;
        std::string binarize = "top_fraction"; ///< top_fraction | top_k | absolute
        double edge_fraction = 0.2;
        std::size_t edge_k = 1;
        double edge_threshold = 0.0;
    } discovery;

    struct Dynamics {
        std::string graph; ///< default: <out>/adjacency.json
        std::size_t lags = 1;
        std::size_t basis_size = 3;
        double ridge = 1e-3;
    } dynamics;

    struct Risk {
        std::string model; ///< default: <out>/model.json
        std::size_t horizon = 5;
        std::size_t draws = 2000;
        std::string noise = "gaussian";
        std::string at_risk = "currently_healthy";
    } risk;

    struct Baselines {
        double hazard_ridge = 1e-4;
        std::string cox_mode = "average";
    } baselines;

    struct Evaluation {
        std::size_t bins = 10;
        std::string reference = "dcnar";
        /// model name -> risk table; default: dcnar, cox and hazard tables in <out>.
        std::map<std::string, std::string> tables;
    } evaluation;

    struct Synthetic {
        std::string regime = "propagation_driven";
        std::size_t indicators = 15;
        std::size_t units = 139;
        std::size_t periods = 35;
        std::size_t burn_in = 50;
        int first_period = 1;
        bool nonlinear = false;
        double drift = 0.0;
        double noise_sd = 1.0;
        double unit_offset_sd = 0.1;
    } synthetic;

    std::string graph_path() const;
    std::string model_path() const;
    std::map<std::string, std::string> table_paths() const;

    /// Throws InputError naming the first invalid field.
    void validate() const;
};

/// Unknown keys and wrong types are InputErrors. Missing keys keep defaults.
RunConfig config_from_json(const Json& doc);
Json to_json(const RunConfig& config);
/// File (if any) with `overrides` merged on top.
RunConfig resolve_config(const std::string& config_path, const Json& overrides);

/// Inputs shared by the data-driven commands.
struct PreparedData {
    PanelDataset panel;        ///< native scale, all periods
    int cutoff = 0;
    std::vector<IndicatorSpec> specs;
    NormStats norm;
    PanelDataset train_normalized;
    PanelDataset panel_normalized;
    FailureLabels labels;       ///< over the full panel
    FailureLabels train_labels;
};

PreparedData prepare_data(RunConfig& config);

/// Landmark cells scored by every model: origins at or after the cutoff with
/// `history` observed states and an observed outcome window.
LandmarkOptions evaluation_landmarks(const RunConfig& config, int cutoff, std::size_t history);

struct DiscoverOutput {
    DiscoveryRun run;
    BinarizeResult graph;
};

DiscoverOutput cmd_discover(RunConfig config);
NarModel cmd_fit(RunConfig config);
RiskTable cmd_risk(RunConfig config);
BaselineRun cmd_baselines(RunConfig config);
ComparisonResult cmd_evaluate(RunConfig config);
SyntheticPanel cmd_generate(RunConfig config);

/// discover, fit, risk, baselines and evaluate in one process; writes the same
/// files as the individual commands.
ComparisonResult run_pipeline(const RunConfig& config);

} // namespace dcnar
