#include "dcnar/risk.hpp"

#include "dcnar/error.hpp"
#include "dcnar/parallel.hpp"
#include "dcnar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace dcnar {

std::string to_string(NoiseMode mode)
{
    switch (mode) {
    case NoiseMode::gaussian: return "gaussian";
    case NoiseMode::covariance: return "covariance";
    case NoiseMode::bootstrap: return "bootstrap";
    case NoiseMode::none: return "none";
    }
    return "gaussian";
}

NoiseMode noise_mode_from_string(const std::string& text)
{
    for (NoiseMode m : {NoiseMode::gaussian, NoiseMode::covariance, NoiseMode::bootstrap, NoiseMode::none})
        if (to_string(m) == text)
            return m;
    throw InputError("unknown noise mode '" + text + "' (expected gaussian, covariance, bootstrap or none)");
}

TrajectorySimulator::TrajectorySimulator(const NarModel& model, const SimulationOptions& options)
    : model_(&model), options_(options)
{
    if (options.horizon == 0)
        throw InputError("horizon must be at least 1");
    if (options.draws == 0)
        throw InputError("draw count must be at least 1");
    const std::size_t n = model.size();
    if (model.norm.mean.size() != n || model.norm.sd.size() != n || model.sigma.size() != n)
        throw InputError("model normalization or noise scale does not match its indicator count");

    if (options.noise == NoiseMode::covariance) {
        const auto& cov = model.residual_covariance;
        if (cov.rows() != static_cast<Eigen::Index>(n) || cov.cols() != static_cast<Eigen::Index>(n))
            throw InputError("model has no residual covariance");
        // Eigen factor tolerates a semi-definite covariance.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success)
            throw ComputeError("residual covariance decomposition failed");
        const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        noise_factor_ = eig.eigenvectors() * root.asDiagonal();
    }
    if (options.noise == NoiseMode::bootstrap && model.residuals.empty())
        throw InputError("bootstrap noise needs stored training residuals; the model has none");
}

TrajectoryEnsemble TrajectorySimulator::simulate(std::span<const Eigen::VectorXd> history, int origin,
                                                 const std::string& unit) const
{
    const NarModel& model = *model_;
    const std::size_t n = model.size();
    const std::size_t p = model.lags;
    const std::size_t h = options_.horizon;
    const std::size_t M = options_.draws;
    const auto N = static_cast<Eigen::Index>(n);

    if (history.size() != p)
        throw InputError("history has " + std::to_string(history.size()) + " states; the model needs " +
                         std::to_string(p));
    const Eigen::Map<const Eigen::VectorXd> mean(model.norm.mean.data(), N);
    const Eigen::Map<const Eigen::VectorXd> sd(model.norm.sd.data(), N);
    const Eigen::Map<const Eigen::VectorXd> sigma(model.sigma.data(), N);

    // Normalized history, newest last.
    std::vector<Eigen::VectorXd> start(p);
    for (std::size_t l = 0; l < p; ++l) {
        if (history[l].size() != N)
            throw InputError("history state has the wrong dimension");
        if (!history[l].allFinite())
            throw InputError("history contains missing or non-finite values");
        start[l] = (history[l] - mean).cwiseQuotient(sd);
    }

    // Lambda_l(origin + k) for every step and lag.
    std::vector<Eigen::MatrixXd> lambda(h * p);
    for (std::size_t k = 1; k <= h; ++k)
        for (std::size_t l = 1; l <= p; ++l)
            lambda[(k - 1) * p + (l - 1)] = model.lambda(l, static_cast<double>(origin) + static_cast<double>(k));

    TrajectoryEnsemble ens;
    ens.unit = unit;
    ens.origin = origin;
    ens.horizon = h;
    ens.draws = M;
    ens.indicators = n;
    ens.seed = options_.seed;
    ens.values.resize(M * h * n);

    const std::uint64_t unit_key = stable_hash(unit);
    // Ring of the last p states: index (head + l) % p is lag p - l.
    std::vector<Eigen::VectorXd> ring(p);
    Eigen::VectorXd next(N), z(N);
    for (std::size_t d = 0; d < M; ++d) {
        Rng rng(derive_seed({options_.seed, unit_key, static_cast<std::uint64_t>(static_cast<std::int64_t>(origin)),
                             static_cast<std::uint64_t>(d)}));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t l = 0; l < p; ++l)
            ring[l] = start[l];
        std::size_t head = 0; // oldest state
        for (std::size_t k = 1; k <= h; ++k) {
            next.setZero();
            for (std::size_t l = 1; l <= p; ++l)
                next.noalias() += lambda[(k - 1) * p + (l - 1)] * ring[(head + p - l) % p];
            switch (options_.noise) {
            case NoiseMode::gaussian:
                for (Eigen::Index i = 0; i < N; ++i)
                    next[i] += sigma[i] * normal(rng);
                break;
            case NoiseMode::covariance:
                for (Eigen::Index i = 0; i < N; ++i)
                    z[i] = normal(rng);
                next.noalias() += noise_factor_ * z;
                break;
            case NoiseMode::bootstrap: {
                std::uniform_int_distribution<std::size_t> pick(0, model.residuals.size() - 1);
                const auto& r = model.residuals[pick(rng)];
                for (Eigen::Index i = 0; i < N; ++i)
                    next[i] += r[static_cast<std::size_t>(i)];
                break;
            }
            case NoiseMode::none: break;
            }
            ring[head] = next;
            head = (head + 1) % p;
            double* out = ens.values.data() + (d * h + (k - 1)) * n;
            for (Eigen::Index i = 0; i < N; ++i)
                out[i] = next[i] * sd[i] + mean[i];
        }
    }
    return ens;
}

TrajectoryEnsemble simulate(const NarModel& model, std::span<const Eigen::VectorXd> history, int origin,
                            const SimulationOptions& options, const std::string& unit)
{
    return TrajectorySimulator(model, options).simulate(history, origin, unit);
}

RiskScore risk_from_ensemble(const TrajectoryEnsemble& ensemble, const std::vector<IndicatorSpec>& specs,
                             std::size_t horizon)
{
    const std::size_t n = ensemble.indicators;
    if (specs.size() != n)
        throw InputError("specs cover " + std::to_string(specs.size()) + " indicators; the ensemble has " +
                         std::to_string(n));
    if (horizon == 0)
        horizon = ensemble.horizon;
    if (horizon > ensemble.horizon)
        throw InputError("requested horizon exceeds the ensemble horizon");

    RiskScore score;
    score.unit = ensemble.unit;
    score.origin = ensemble.origin;
    score.horizon = horizon;
    score.draws = ensemble.draws;
    std::vector<std::size_t> hits(n, 0);
    for (std::size_t d = 0; d < ensemble.draws; ++d)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 1; k <= horizon; ++k)
                if (specs[i].is_failure(ensemble.value(d, k, i))) {
                    ++hits[i];
                    break;
                }
    score.risk.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        score.risk[i] = static_cast<double>(hits[i]) / static_cast<double>(ensemble.draws);
    return score;
}

RiskTable risk_sweep(const NarModel& model, const PanelDataset& data, const std::vector<IndicatorSpec>& specs,
                     const RiskSweepOptions& options)
{
    if (data.indicator_names() != model.indicators)
        throw InputError("panel indicators do not match the model");
    const auto aligned = align_specs(data.indicator_names(), specs);
    const auto labels = label_failures(data, aligned);

    LandmarkOptions lm;
    lm.horizon = options.simulation.horizon;
    lm.history = model.lags;
    lm.origin_min = options.origin_min;
    lm.origin_max = options.origin_max;
    lm.rule = options.rule;
    const auto cells = landmark_origins(data, labels, lm);
    if (cells.empty())
        throw InputError("no valid origin: no unit has " + std::to_string(model.lags) +
                         " observed periods followed by an observed " + std::to_string(lm.horizon) + "-period window");

    // One simulation per (unit, origin); cells are sorted so groups are contiguous.
    std::vector<std::pair<std::size_t, std::size_t>> groups; // [begin, end) into cells
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c == 0 || cells[c].unit != cells[c - 1].unit || cells[c].position != cells[c - 1].position)
            groups.emplace_back(c, c);
        groups.back().second = c + 1;
    }

    const TrajectorySimulator simulator(model, options.simulation);
    const std::size_t n = model.size();
    const std::size_t p = model.lags;
    std::vector<RiskScore> scores(groups.size());
    parallel_for(groups.size(), options.workers, [&](std::size_t g) {
        const Landmark& first = cells[groups[g].first];
        std::vector<Eigen::VectorXd> history(p);
        for (std::size_t l = 0; l < p; ++l) {
            const auto s = data.state(first.unit, first.position + 1 - p + l);
            history[l] = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(n));
        }
        const auto ens = simulator.simulate(history, data.period(first.position), data.units()[first.unit]);
        scores[g] = risk_from_ensemble(ens, aligned);
    });

    RiskTable table;
    table.reserve(cells.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t c = groups[g].first; c < groups[g].second; ++c) {
            const Landmark& cell = cells[c];
            table.push_back({data.units()[cell.unit], data.period(cell.position), data.indicator_names()[cell.indicator],
                             scores[g].risk[cell.indicator], options.simulation.horizon, options.simulation.draws});
        }
    return table;
}

} // namespace dcnar
