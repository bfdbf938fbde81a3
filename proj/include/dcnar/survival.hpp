#pragma once

#include "dcnar/landmark.hpp"
#include "dcnar/metrics.hpp"
#include "dcnar/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace dcnar {

/// Person-period rows for one target indicator. Row r of a spell carries the
/// state X_t at period t and the event flag F_{t+1} for the target, over the
/// spell-time interval (start, stop] = (k - 1, k] where k is the row's index
/// within its spell (1-based). A spell ends at the first event or, without an
/// event, at the first period whose state or next-period label is missing.
struct SurvivalFrame {
    std::size_t target = 0;
    std::vector<std::string> covariates;
    Eigen::MatrixXd x;                ///< rows x covariates
    std::vector<std::uint8_t> event;
    std::vector<double> start, stop;
    std::vector<std::size_t> unit;
    std::vector<int> period;          ///< covariate period t
    std::size_t event_spells = 0;
    std::size_t censored_spells = 0;
    /// Units already failed at their first observed period: immediate-event
    /// spells with no pre-event state, so they contribute no rows.
    std::size_t immediate_events = 0;

    std::size_t rows() const { return event.size(); }
    std::size_t events() const;
};

SurvivalFrame build_survival_frame(const PanelDataset& data, const FailureLabels& labels, std::size_t target);

struct CoxModel {
    std::vector<std::string> covariates;
    Eigen::VectorXd beta;
    /// Breslow baseline hazard: increments at the distinct event times.
    std::vector<double> event_times;
    std::vector<double> hazard_increments;
    double max_time = 0.0; ///< largest spell time in the training frame
    std::size_t iterations = 0;
    double gradient_norm = 0.0;

    double cumulative_hazard(double time) const;
    double total_hazard() const;
};

struct CoxOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-8;
};

CoxModel fit_cox(const SurvivalFrame& frame, const CoxOptions& options = {});

/// Breslow log partial likelihood, gradient and Hessian at beta.
struct PartialLikelihood {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};
PartialLikelihood cox_partial_likelihood(const SurvivalFrame& frame, const Eigen::VectorXd& beta);

struct DiscreteHazardModel {
    std::vector<std::string> covariates;
    double intercept = 0.0;
    Eigen::VectorXd beta;
    double ridge = 0.0;
    std::size_t iterations = 0;
    double gradient_norm = 0.0;

    /// Per-period event probability given the state x.
    double hazard(const Eigen::VectorXd& x) const;
};

struct HazardOptions {
    double ridge = 1e-4;
    std::size_t max_iterations = 100;
    double tolerance = 1e-8;
};

/// Maximizes mean log-likelihood - (ridge / 2) * |beta|^2 (intercept unpenalized).
DiscreteHazardModel fit_discrete_hazard(const SurvivalFrame& frame, const HazardOptions& options = {});

/// h-period risk 1 - (1 - q)^h with covariates held at x.
double horizon_risk(const DiscreteHazardModel& model, const Eigen::VectorXd& x, std::size_t h);

enum class CoxHorizonMode {
    average, ///< h times the mean per-period Breslow increment over the training range
    window,  ///< H0(s + h) - H0(s) from spell time s, extrapolating the last increment
};
std::string to_string(CoxHorizonMode mode);
CoxHorizonMode cox_horizon_mode_from_string(const std::string& text);

struct CoxRisk {
    double risk = 0.0;
    bool extrapolated = false; ///< window reached past the last event time
};

CoxRisk horizon_risk(const CoxModel& model, const Eigen::VectorXd& x, std::size_t h,
                     CoxHorizonMode mode = CoxHorizonMode::average, double spell_time = 0.0);

struct BaselineOptions {
    HazardOptions hazard;
    CoxOptions cox;
    CoxHorizonMode cox_mode = CoxHorizonMode::average;
    std::size_t workers = 1;
};

struct BaselineRun {
    std::vector<CoxModel> cox;
    std::vector<DiscreteHazardModel> hazard;
    RiskTable cox_risk;
    RiskTable hazard_risk;
    std::size_t extrapolated = 0;
};

/// Fits one Cox and one discrete-hazard model per target indicator on
/// `train` and scores every landmark cell of `eval`. Both panels must be
/// normalized; labels come from the native-scale thresholds.
BaselineRun run_baselines(const PanelDataset& train, const FailureLabels& train_labels, const PanelDataset& eval,
                          const FailureLabels& eval_labels, const LandmarkOptions& landmarks,
                          const BaselineOptions& options = {});

} // namespace dcnar
