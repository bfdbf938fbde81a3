#pragma once

#include "dcnar/discovery.hpp"
#include "dcnar/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dcnar {

enum class Regime { custom, state_driven, propagation_driven, chain, hub };
std::string to_string(Regime regime);
Regime regime_from_string(const std::string& text);

/// Directed lagged effect source -> target.
struct TrueEdge {
    std::size_t source = 0;
    std::size_t target = 0;
    std::size_t lag = 1;
    double coefficient = 0.0;
};

/// Known generative system on deviations y from per-unit offsets:
///   y_{i,t} = a_i y_{i,t-1} + sum_{edges j->i} c(t) g(y_{j,t-lag}) + e_{i,t},  e ~ N(0, noise_sd^2)
///   x_{i,t} = level + scale * (mu_{u,i} + y_{i,t})
/// with g = tanh when `nonlinear`, identity otherwise, and
/// c(t) = c * (1 + drift * (s_t - 1/2)), s_t in [0, 1] across the output periods.
struct GroundTruthSystem {
    Regime regime = Regime::custom;
    std::vector<std::string> indicators;
    std::vector<double> self;     ///< a_i
    std::vector<TrueEdge> edges;
    double noise_sd = 1.0;
    double unit_offset_sd = 0.1;
    double drift = 0.0;
    bool nonlinear = false;
    bool unit_root = false;
    double level = 0.5;
    double scale = 0.15;

    std::size_t size() const { return indicators.size(); }
    std::size_t max_lag() const;
    AdjacencyMatrix adjacency() const;
    double edge_coefficient(const TrueEdge& e, double s) const { return e.coefficient * (1.0 + drift * (s - 0.5)); }
    /// Spectral radius of the linear companion matrix at drift position s.
    double spectral_radius(double s = 0.5) const;
    /// Throws InputError on malformed edges or an unstable system without `unit_root`.
    void validate() const;
};

std::vector<std::string> default_indicator_names(std::size_t n);

/// n >= 3. Propagation-driven: delayed cycle 0 -> 1 -> ... -> n-1 -> 0 at lag 2
/// with weak own dynamics. State-driven: strong own persistence with weak lag-1 chain links.
GroundTruthSystem make_regime(Regime regime, std::size_t n, std::uint64_t seed = 0);
/// 0 -> 1 -> ... -> n-1 at `lag`.
GroundTruthSystem make_chain(std::size_t n, double coefficient = 0.8, double self = 0.3, std::size_t lag = 1);
/// Indicator 0 drives every other indicator.
GroundTruthSystem make_hub(std::size_t n, double coefficient = 0.6, double self = 0.3, std::size_t lag = 1);

struct GenerateOptions {
    std::size_t units = 139;
    std::size_t periods = 35;
    std::size_t burn_in = 50;
    int first_period = 1;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct SyntheticPanel {
    PanelDataset data;
    GroundTruthSystem system;
    GenerateOptions options;
    /// mu_{u,i}, [unit][indicator]
    std::vector<std::vector<double>> unit_offsets;
};

SyntheticPanel generate(const GroundTruthSystem& system, const GenerateOptions& options);

/// E[x_{t+1} | states up to position t] under the true system, native scale.
/// Needs t + 1 >= max_lag.
Eigen::VectorXd true_conditional_mean(const SyntheticPanel& panel, std::size_t unit, std::size_t t);

/// One-step AUROC of two ideal rankings over currently-healthy origins:
/// own-state ranks by -x_{i,t}, full-state by -E[x_{i,t+1} | history].
struct OracleAuroc {
    double own_state = 0.0;
    double full_state = 0.0;
};
OracleAuroc oracle_auroc(const SyntheticPanel& panel, double quantile = 0.2);

} // namespace dcnar
