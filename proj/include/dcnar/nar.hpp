#pragma once

#include "dcnar/discovery.hpp"
#include "dcnar/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dcnar {

/// Clamped B-spline basis with `size` functions on the scaled time axis
/// s = (period - t_min) / (t_max - t_min) in [0, 1]. Degree is min(3, size - 1)
/// with uniformly spaced interior knots. Periods outside the range are clamped,
/// so every basis combination extrapolates as a constant.
class SplineBasis {
public:
    SplineBasis() = default;
    SplineBasis(std::size_t size, double t_min, double t_max);

    std::size_t size() const { return size_; }
    std::size_t degree() const { return degree_; }
    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }
    /// Full knot vector on the scaled axis, boundary knots repeated degree + 1 times.
    const std::vector<double>& knots() const { return knots_; }

    double scaled(double period) const;
    std::vector<double> evaluate(double period) const;
    void evaluate(double period, std::span<double> out) const;

    /// Smallest spacing between distinct knots on the scaled axis.
    double min_knot_spacing() const;

private:
    std::size_t size_ = 1;
    std::size_t degree_ = 0;
    double t_min_ = 0.0, t_max_ = 0.0;
    std::vector<double> knots_{0.0, 1.0};
};

struct NarOptions {
    std::size_t lags = 1;       ///< p
    std::size_t basis_size = 3; ///< B
    double ridge = 1e-3;
    std::size_t workers = 1;
};

/// Time-varying network autoregression in normalized space:
///   X_t = sum_l ((G + I) o Lambda_l(t)) X_{t-l} + eps_t
/// where Lambda_l(t)[i][j] = sum_b theta[l][i][j][b] * phi_b(t) and entries
/// outside the support of G + I are structural zeros.
struct NarModel {
    std::vector<std::string> indicators;
    AdjacencyMatrix graph;
    std::size_t lags = 1;
    SplineBasis basis;
    double ridge = 0.0;
    /// theta laid out [(l - 1)][i][j][b]; zero outside the support.
    std::vector<double> coefficients;
    /// Per-indicator residual standard deviation (normalized scale).
    std::vector<double> sigma;
    NormStats norm;
    /// Residual covariance over periods where every indicator has a residual.
    Eigen::MatrixXd residual_covariance;
    /// Complete training residual vectors, for bootstrap noise.
    std::vector<std::vector<double>> residuals;

    std::size_t size() const { return indicators.size(); }
    bool in_support(std::size_t i, std::size_t j) const { return i == j || graph.edges(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
    std::size_t coefficient_index(std::size_t lag, std::size_t i, std::size_t j, std::size_t b) const
    {
        const std::size_t n = size();
        return (((lag - 1) * n + i) * n + j) * basis.size() + b;
    }
    double coefficient(std::size_t lag, std::size_t i, std::size_t j, std::size_t b) const
    {
        return coefficients[coefficient_index(lag, i, j, b)];
    }
    /// Lambda_l(t) with the support mask applied.
    Eigen::MatrixXd lambda(std::size_t lag, double period) const;
    /// Lambda_l(t) mapped back to native units: entry (i, j) scaled by sd_i / sd_j.
    Eigen::MatrixXd native_lambda(std::size_t lag, double period) const;
    /// True when G has no edges, i.e. the model is n independent AR(p) fits.
    bool independent_rows() const { return graph.edge_count() == 0; }
};

/// `train` must already be normalized with `norm`.
NarModel fit_nar(const PanelDataset& train, const NormStats& norm, const AdjacencyMatrix& graph,
                 const NarOptions& options = {});

/// Noise-free conditional mean of X_t given `history` = [X_{t-p}, ..., X_{t-1}]
/// (oldest first, normalized scale).
Eigen::VectorXd predict_one_step(const NarModel& model, std::span<const Eigen::VectorXd> history, double period);

struct IndicatorFitSummary {
    std::string indicator;
    std::size_t count = 0;
    double mse = 0.0;
    double residual_mean = 0.0;
    double variance = 0.0; ///< mean square of the targets (variance around the normalized-scale mean of 0)
};

struct InSampleReport {
    std::vector<IndicatorFitSummary> indicators;
    bool independent_rows = false;
};

/// One-step-ahead errors over every cell with a complete p-period history.
/// `data` must be normalized with the model's statistics.
InSampleReport in_sample_report(const NarModel& model, const PanelDataset& data);

} // namespace dcnar
