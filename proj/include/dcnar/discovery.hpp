#pragma once

#include "dcnar/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dcnar {

/// Training settings for one additive lag model.
struct DiscoveryOptions {
    std::size_t max_lag = 3;      ///< L
    std::size_t hidden = 8;       ///< H, hidden units of each lag function
    double lambda = 0.0;          ///< hierarchical group-lasso weight on cross-indicator input weights
    double output_ridge = 1e-2;   ///< L2 weight on output-layer weights
    std::size_t max_epochs = 5000;
    double tolerance = 1e-6;      ///< relative objective change over `patience` epochs
    std::size_t patience = 10;
    std::uint64_t seed = 0;
};

/// Additive nonlinear autoregression for one target indicator:
///
///   x_{i,t} = c_u + sum_j sum_l f_{ijl}(x_{j,t-l})
///   f_{ijl}(x) = sum_h v_h * act(w_h * x + b_h),  act(a) = a / sqrt(1 + a^2)
///
/// c_u is a per-unit intercept. The group norm of f_{ijl} is the Euclidean
/// norm of its input weights w.
class AdditiveLagModel {
public:
    AdditiveLagModel() = default;
    /// All-zero parameters.
    AdditiveLagModel(std::size_t target, std::size_t num_indicators, std::size_t max_lag, std::size_t hidden,
                     std::size_t num_units);

    std::size_t target() const { return target_; }
    std::size_t num_indicators() const { return n_; }
    std::size_t max_lag() const { return lags_; }
    std::size_t hidden() const { return hidden_; }
    std::size_t num_units() const { return unit_intercepts_.size(); }

    /// Flat offset of function (source, lag) in the weight arrays; lag is 1-based.
    std::size_t term_offset(std::size_t source, std::size_t lag) const
    {
        return (source * lags_ + (lag - 1)) * hidden_;
    }
    std::span<double> input_weights(std::size_t source, std::size_t lag)
    {
        return {w_.data() + term_offset(source, lag), hidden_};
    }
    std::span<const double> input_weights(std::size_t source, std::size_t lag) const
    {
        return {w_.data() + term_offset(source, lag), hidden_};
    }
    std::span<double> input_biases(std::size_t source, std::size_t lag)
    {
        return {b_.data() + term_offset(source, lag), hidden_};
    }
    std::span<double> output_weights(std::size_t source, std::size_t lag)
    {
        return {v_.data() + term_offset(source, lag), hidden_};
    }

    /// f_{ijl}(x) for source j and lag l.
    double term(std::size_t source, std::size_t lag, double x) const;
    /// Group norm of f_{ijl}: Euclidean norm of its input weights.
    double term_norm(std::size_t source, std::size_t lag) const;

    double unit_intercept(std::size_t u) const { return unit_intercepts_[u]; }
    std::vector<double>& unit_intercepts() { return unit_intercepts_; }
    const std::vector<double>& unit_intercepts() const { return unit_intercepts_; }

    /// `lagged[(j * L) + (l - 1)]` holds x_{j,t-l}.
    double predict(std::size_t unit, std::span<const double> lagged) const;

    std::vector<double>& raw_input_weights() { return w_; }
    std::vector<double>& raw_input_biases() { return b_; }
    std::vector<double>& raw_output_weights() { return v_; }
    const std::vector<double>& raw_input_weights() const { return w_; }
    const std::vector<double>& raw_input_biases() const { return b_; }
    const std::vector<double>& raw_output_weights() const { return v_; }

    bool all_finite() const;

private:
    std::size_t target_ = 0, n_ = 0, lags_ = 0, hidden_ = 0;
    std::vector<double> w_, b_, v_;
    std::vector<double> unit_intercepts_;
};

struct FitDiagnostics {
    bool converged = false;
    std::size_t epochs = 0;
    double objective = 0.0;
    double mse = 0.0;
    /// Norm of the proximal gradient mapping at the final iterate.
    double gradient_norm = 0.0;
    std::size_t samples = 0;
};

struct FittedLagModel {
    AdditiveLagModel model;
    FitDiagnostics diagnostics;
};

/// Pooled one-step samples for one target: rows (unit, t) whose lags 1..L
/// are fully observed and whose target cell is observed.
struct LagDesign {
    std::size_t target = 0;
    std::size_t num_indicators = 0;
    std::size_t max_lag = 0;
    std::vector<std::size_t> unit;     ///< per sample
    std::vector<std::size_t> position; ///< per sample, time position of the target
    std::vector<double> response;      ///< per sample
    /// Column-major inputs: column (j * L + l - 1) holds x_{j,t-l} for every sample.
    std::vector<double> inputs;

    std::size_t size() const { return response.size(); }
    const double* column(std::size_t source, std::size_t lag) const
    {
        return inputs.data() + (source * max_lag + lag - 1) * size();
    }
    /// Samples whose target period satisfies the predicate.
    template <class Pred>
    LagDesign filter(Pred&& keep) const;
};

LagDesign build_lag_design(const PanelDataset& data, std::size_t target, std::size_t max_lag);

/// Penalized objective pieces for a model on a design.
struct LossParts {
    double mse = 0.0;
    double ridge = 0.0;
    double penalty = 0.0;
    double smooth() const { return mse + ridge; }
    double total() const { return mse + ridge + penalty; }
};
LossParts evaluate_loss(const AdditiveLagModel& model, const LagDesign& design, const DiscoveryOptions& options);

/// Gradient of the smooth part (mean squared error plus output ridge), laid out
/// as [w | b | v | unit intercepts].
std::vector<double> smooth_gradient(const AdditiveLagModel& model, const LagDesign& design,
                                    const DiscoveryOptions& options);

/// Seeded symmetric-uniform initialization scaled by fan-in.
AdditiveLagModel initialize_model(std::size_t target, std::size_t num_indicators, std::size_t num_units,
                                  const DiscoveryOptions& options);

/// Full-batch proximal gradient with Barzilai-Borwein steps and nonmonotone backtracking.
FittedLagModel fit_additive_model(const LagDesign& design, std::size_t num_units, const DiscoveryOptions& options,
                                  const AdditiveLagModel* warm_start = nullptr);
FittedLagModel fit_additive_model(const PanelDataset& train, std::size_t target, const DiscoveryOptions& options);

/// S[i][j] = sum_l ||f_{ijl}||. The diagonal holds self-dependence and is kept
/// apart from the off-diagonal causal scores.
struct CausalScoreMatrix {
    std::vector<std::string> indicators;
    Eigen::MatrixXd scores;

    std::size_t size() const { return indicators.size(); }
    Eigen::VectorXd self_dependence() const { return scores.diagonal(); }
};

/// G[i][j] true when j influences i. Diagonal always false.
struct AdjacencyMatrix {
    std::vector<std::string> indicators;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> edges;

    std::size_t size() const { return indicators.size(); }
    std::size_t edge_count() const;
    static AdjacencyMatrix empty(std::vector<std::string> indicators);
};

CausalScoreMatrix extract_scores(const std::vector<AdditiveLagModel>& models, std::vector<std::string> indicators);

struct BinarizeRule {
    enum class Kind { top_fraction, top_k, absolute };
    Kind kind = Kind::top_fraction;
    double fraction = 0.2;
    std::size_t k = 1;
    double threshold = 0.0;
};

struct BinarizeResult {
    AdjacencyMatrix graph;
    double cutoff = 0.0;
    bool degenerate = false;
};

/// Keeps off-diagonal entries with S >= cutoff and S > 0.
BinarizeResult binarize(const CausalScoreMatrix& scores, const BinarizeRule& rule);

/// AUROC of off-diagonal scores against the true edge labels.
double edge_recovery_score(const CausalScoreMatrix& scores, const AdjacencyMatrix& truth);

struct LambdaSelection {
    std::vector<double> grid;
    std::vector<double> validation_mse; ///< summed over targets, per grid value
    std::vector<std::size_t> active_edges;
    double chosen = 0.0;
};

struct DiscoveryRun {
    std::vector<FittedLagModel> models;
    CausalScoreMatrix scores;
    LambdaSelection selection;
};

struct NetworkDiscoveryOptions {
    DiscoveryOptions fit;
    std::vector<double> lambda_grid{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
    /// Trailing training periods held out for lambda selection.
    std::size_t validation_periods = 5;
    std::size_t workers = 1;
};

/// Fits one model per target. With more than one grid value, lambda is chosen
/// by held-out one-step error summed over targets; the final models are refit
/// on all training periods at the chosen lambda.
DiscoveryRun discover_network(const PanelDataset& train, const NetworkDiscoveryOptions& options);

template <class Pred>
LagDesign LagDesign::filter(Pred&& keep) const
{
    LagDesign out;
    out.target = target;
    out.num_indicators = num_indicators;
    out.max_lag = max_lag;
    std::vector<std::size_t> rows;
    for (std::size_t s = 0; s < size(); ++s)
        if (keep(unit[s], position[s]))
            rows.push_back(s);
    for (std::size_t s : rows) {
        out.unit.push_back(unit[s]);
        out.position.push_back(position[s]);
        out.response.push_back(response[s]);
    }
    const std::size_t cols = num_indicators * max_lag;
    out.inputs.resize(cols * rows.size());
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < rows.size(); ++r)
            out.inputs[c * rows.size() + r] = inputs[c * size() + rows[r]];
    return out;
}

} // namespace dcnar
