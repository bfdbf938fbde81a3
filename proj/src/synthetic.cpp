#include "dcnar/synthetic.hpp"

#include "dcnar/error.hpp"
#include "dcnar/metrics.hpp"
#include "dcnar/parallel.hpp"
#include "dcnar/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace dcnar {

std::string to_string(Regime regime)
{
    switch (regime) {
    case Regime::custom: return "custom";
    case Regime::state_driven: return "state_driven";
    case Regime::propagation_driven: return "propagation_driven";
    case Regime::chain: return "chain";
    case Regime::hub: return "hub";
    }
    return "custom";
}

Regime regime_from_string(const std::string& text)
{
    for (Regime r : {Regime::custom, Regime::state_driven, Regime::propagation_driven, Regime::chain, Regime::hub})
        if (to_string(r) == text)
            return r;
    throw InputError("unknown regime '" + text + "' (expected state_driven, propagation_driven, chain or hub)");
}

std::size_t GroundTruthSystem::max_lag() const
{
    std::size_t L = 1;
    for (const auto& e : edges)
        L = std::max(L, e.lag);
    return L;
}

AdjacencyMatrix GroundTruthSystem::adjacency() const
{
    AdjacencyMatrix g = AdjacencyMatrix::empty(indicators);
    for (const auto& e : edges)
        if (e.source != e.target)
            g.edges(static_cast<Eigen::Index>(e.target), static_cast<Eigen::Index>(e.source)) = true;
    return g;
}

double GroundTruthSystem::spectral_radius(double s) const
{
    const std::size_t n = size();
    const std::size_t L = max_lag();
    const auto N = static_cast<Eigen::Index>(n * L);
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t i = 0; i < n; ++i)
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = self[i];
    for (const auto& e : edges)
        companion(static_cast<Eigen::Index>(e.target), static_cast<Eigen::Index>((e.lag - 1) * n + e.source)) +=
            edge_coefficient(e, s);
    for (Eigen::Index k = static_cast<Eigen::Index>(n); k < N; ++k)
        companion(k, k - static_cast<Eigen::Index>(n)) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> eig(companion, false);
    if (eig.info() != Eigen::Success)
        throw ComputeError("companion eigenvalue computation failed");
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

void GroundTruthSystem::validate() const
{
    const std::size_t n = size();
    if (n == 0)
        throw InputError("system has no indicators");
    if (self.size() != n)
        throw InputError("system needs one self coefficient per indicator");
    for (const auto& e : edges) {
        if (e.source >= n || e.target >= n)
            throw InputError("edge references an indicator outside the system");
        if (e.lag == 0)
            throw InputError("edge lag must be at least 1");
    }
    if (!(noise_sd >= 0.0) || !(unit_offset_sd >= 0.0) || !(scale > 0.0))
        throw InputError("noise, offset and scale parameters must be nonnegative (scale positive)");
    if (unit_root)
        return;
    const double rho = std::max(spectral_radius(0.0), spectral_radius(1.0));
    if (rho >= 1.0)
        throw InputError("system is not stationary (companion spectral radius " + std::to_string(rho) +
                         "); set the unit-root flag to allow it");
}

std::vector<std::string> default_indicator_names(std::size_t n)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "x%02zu", i + 1);
        out.emplace_back(buf);
    }
    return out;
}

GroundTruthSystem make_chain(std::size_t n, double coefficient, double self, std::size_t lag)
{
    if (n < 2)
        throw InputError("a chain needs at least 2 indicators");
    GroundTruthSystem sys;
    sys.regime = Regime::chain;
    sys.indicators = default_indicator_names(n);
    sys.self.assign(n, self);
    for (std::size_t i = 0; i + 1 < n; ++i)
        sys.edges.push_back({i, i + 1, lag, coefficient});
    return sys;
}

GroundTruthSystem make_hub(std::size_t n, double coefficient, double self, std::size_t lag)
{
    if (n < 2)
        throw InputError("a hub needs at least 2 indicators");
    GroundTruthSystem sys;
    sys.regime = Regime::hub;
    sys.indicators = default_indicator_names(n);
    sys.self.assign(n, self);
    for (std::size_t i = 1; i < n; ++i)
        sys.edges.push_back({0, i, lag, coefficient});
    return sys;
}

GroundTruthSystem make_regime(Regime regime, std::size_t n, std::uint64_t /*seed*/)
{
    if (n < 3)
        throw InputError("regimes need at least 3 indicators");
    GroundTruthSystem sys;
    sys.regime = regime;
    sys.indicators = default_indicator_names(n);
    switch (regime) {
    case Regime::propagation_driven:
        // Weak own memory; each indicator is driven by its upstream neighbour two periods back.
        sys.self.assign(n, 0.2);
        for (std::size_t i = 0; i < n; ++i)
            sys.edges.push_back({i, (i + 1) % n, 2, 0.7});
        break;
    case Regime::state_driven:
        sys.self.assign(n, 0.85);
        for (std::size_t i = 0; i + 1 < n; ++i)
            sys.edges.push_back({i, i + 1, 1, 0.05});
        break;
    case Regime::chain: return make_chain(n);
    case Regime::hub: return make_hub(n);
    case Regime::custom: throw InputError("the custom regime has no template");
    }
    return sys;
}

namespace {

double link(const GroundTruthSystem& sys, double v) { return sys.nonlinear ? std::tanh(v) : v; }

// Drift position of output position t; burn-in uses s = 0.
double drift_position(std::size_t t, std::size_t periods)
{
    return periods > 1 ? static_cast<double>(t) / static_cast<double>(periods - 1) : 0.0;
}

// Mean of y_{t} given y up to t-1 (deviation scale). `y` is indexed [time][indicator].
void deviation_mean(const GroundTruthSystem& sys, const std::vector<std::vector<double>>& y, std::size_t t, double s,
                    std::vector<double>& out)
{
    const std::size_t n = sys.size();
    for (std::size_t i = 0; i < n; ++i)
        out[i] = sys.self[i] * y[t - 1][i];
    for (const auto& e : sys.edges)
        out[e.target] += sys.edge_coefficient(e, s) * link(sys, y[t - e.lag][e.source]);
}

} // namespace

SyntheticPanel generate(const GroundTruthSystem& system, const GenerateOptions& options)
{
    system.validate();
    if (options.periods < 5)
        throw InputError("periods must be at least 5");
    if (options.burn_in < 10)
        throw InputError("burn-in must be at least 10");
    if (options.units == 0)
        throw InputError("units must be at least 1");

    const std::size_t n = system.size();
    const std::size_t T = options.periods;
    const std::size_t L = system.max_lag();
    const std::size_t total = options.burn_in + T;

    SyntheticPanel out;
    out.system = system;
    out.options = options;
    out.unit_offsets.assign(options.units, std::vector<double>(n, 0.0));
    std::vector<double> values(options.units * T * n, 0.0);

    parallel_for(options.units, options.workers, [&](std::size_t u) {
        Rng rng(derive_seed({options.seed, static_cast<std::uint64_t>(u), 0x5e7ULL}));
        std::normal_distribution<double> normal(0.0, 1.0);
        auto& mu = out.unit_offsets[u];
        for (std::size_t i = 0; i < n; ++i)
            mu[i] = system.unit_offset_sd * normal(rng);
        // L zero states precede the first simulated step.
        std::vector<std::vector<double>> y(L + total, std::vector<double>(n, 0.0));
        std::vector<double> mean(n);
        for (std::size_t step = 0; step < total; ++step) {
            const std::size_t t = L + step;
            const double s = step < options.burn_in ? 0.0 : drift_position(step - options.burn_in, T);
            deviation_mean(system, y, t, s, mean);
            for (std::size_t i = 0; i < n; ++i)
                y[t][i] = mean[i] + system.noise_sd * normal(rng);
        }
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t i = 0; i < n; ++i)
                values[(u * T + t) * n + i] = system.level + system.scale * (mu[i] + y[L + options.burn_in + t][i]);
    });

    std::vector<std::string> units;
    for (std::size_t u = 0; u < options.units; ++u) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "u%03zu", u + 1);
        units.emplace_back(buf);
    }
    for (double v : values)
        if (!std::isfinite(v))
            throw ComputeError("generated panel contains non-finite values (unstable unit-root system?)");
    out.data = PanelDataset(std::move(units), options.first_period, T, system.indicators, std::move(values),
                            std::vector<std::uint8_t>(options.units * T * n, 1));
    return out;
}

Eigen::VectorXd true_conditional_mean(const SyntheticPanel& panel, std::size_t unit, std::size_t t)
{
    const auto& sys = panel.system;
    const std::size_t n = sys.size();
    const std::size_t L = sys.max_lag();
    if (t + 1 < L || t + 1 >= panel.data.num_periods() + 1)
        throw InputError("position lacks the history the true system needs");
    const auto& mu = panel.unit_offsets[unit];
    // Deviations for positions t-L+1 .. t, stored so index L is "t + 1".
    std::vector<std::vector<double>> y(L + 1, std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < L; ++k) {
        const std::size_t pos = t + 1 - L + k;
        for (std::size_t i = 0; i < n; ++i)
            y[k][i] = (panel.data.value(unit, pos, i) - sys.level) / sys.scale - mu[i];
    }
    std::vector<double> mean(n);
    deviation_mean(sys, y, L, drift_position(t + 1, panel.data.num_periods()), mean);
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        out[static_cast<Eigen::Index>(i)] = sys.level + sys.scale * (mu[i] + mean[i]);
    return out;
}

OracleAuroc oracle_auroc(const SyntheticPanel& panel, double quantile)
{
    const auto& data = panel.data;
    const std::size_t n = data.num_indicators();
    const auto specs = compute_thresholds(data, quantile);
    const std::size_t L = panel.system.max_lag();
    std::vector<ScoredOutcomes> own(n), full(n);
    for (std::size_t u = 0; u < data.num_units(); ++u)
        for (std::size_t t = L - 1; t + 1 < data.num_periods(); ++t) {
            const Eigen::VectorXd m = true_conditional_mean(panel, u, t);
            for (std::size_t i = 0; i < n; ++i) {
                if (specs[i].is_failure(data.value(u, t, i)))
                    continue;
                const std::uint8_t y = specs[i].is_failure(data.value(u, t + 1, i)) ? 1 : 0;
                own[i].predictions.push_back(-data.value(u, t, i));
                own[i].outcomes.push_back(y);
                full[i].predictions.push_back(-m[static_cast<Eigen::Index>(i)]);
                full[i].outcomes.push_back(y);
            }
        }
    OracleAuroc out;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t pos = own[i].positives();
        if (pos == 0 || pos == own[i].size())
            continue;
        out.own_state += auroc(own[i]);
        out.full_state += auroc(full[i]);
        ++used;
    }
    if (used == 0)
        throw ComputeError("no indicator has both outcomes among healthy origins");
    out.own_state /= static_cast<double>(used);
    out.full_state /= static_cast<double>(used);
    return out;
}

} // namespace dcnar
