#pragma once

#include "dcnar/landmark.hpp"
#include "dcnar/metrics.hpp"
#include "dcnar/nar.hpp"
#include "dcnar/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dcnar {

enum class NoiseMode {
    gaussian,   ///< independent N(0, sigma_i^2) per indicator
    covariance, ///< multivariate normal with the residual covariance
    bootstrap,  ///< resample complete training residual vectors
    none,       ///< conditional-mean path
};

std::string to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& text);

struct SimulationOptions {
    std::size_t horizon = 5;
    std::size_t draws = 2000;
    std::uint64_t seed = 0;
    NoiseMode noise = NoiseMode::gaussian;
};

/// M simulated paths of h native-scale states each, stored [draw][step][indicator].
struct TrajectoryEnsemble {
    std::string unit;
    int origin = 0;
    std::size_t horizon = 0;
    std::size_t draws = 0;
    std::size_t indicators = 0;
    std::uint64_t seed = 0;
    std::vector<double> values;

    /// step is 1-based: step k is period origin + k.
    double value(std::size_t draw, std::size_t step, std::size_t indicator) const
    {
        return values[(draw * horizon + (step - 1)) * indicators + indicator];
    }
};

struct RiskScore {
    std::string unit;
    int origin = 0;
    std::size_t horizon = 0;
    std::size_t draws = 0;
    std::vector<double> risk; ///< per indicator, fraction of paths crossing
};

/// Reusable simulator: noise factors and validation are prepared once per model.
class TrajectorySimulator {
public:
    TrajectorySimulator(const NarModel& model, const SimulationOptions& options);

    /// `history` holds the last p native-scale states, oldest first, ending at
    /// `origin`. The per-draw stream is derived from (seed, unit, origin, draw).
    TrajectoryEnsemble simulate(std::span<const Eigen::VectorXd> history, int origin, const std::string& unit) const;

    const SimulationOptions& options() const { return options_; }

private:
    const NarModel* model_;
    SimulationOptions options_;
    Eigen::MatrixXd noise_factor_; ///< covariance mode: L with L L^T = Sigma
};

TrajectoryEnsemble simulate(const NarModel& model, std::span<const Eigen::VectorXd> history, int origin,
                            const SimulationOptions& options, const std::string& unit = {});

/// r_i = fraction of paths with min over steps 1..horizon of indicator i <= tau_i.
/// `horizon` = 0 means the full ensemble horizon; a smaller value uses a prefix.
RiskScore risk_from_ensemble(const TrajectoryEnsemble& ensemble, const std::vector<IndicatorSpec>& specs,
                             std::size_t horizon = 0);

struct RiskSweepOptions {
    SimulationOptions simulation;
    AtRiskRule rule = AtRiskRule::currently_healthy;
    std::optional<int> origin_min;
    std::optional<int> origin_max;
    std::size_t workers = 1;
};

/// Risk for every eligible (unit, origin, indicator) cell of `data` (native scale):
/// the last p states are observed, the outcome window is observed, and the
/// indicator is at risk under the chosen rule.
RiskTable risk_sweep(const NarModel& model, const PanelDataset& data, const std::vector<IndicatorSpec>& specs,
                     const RiskSweepOptions& options);

} // namespace dcnar
