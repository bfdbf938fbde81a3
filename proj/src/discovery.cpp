#include "dcnar/discovery.hpp"

#include "dcnar/error.hpp"
#include "dcnar/log.hpp"
#include "dcnar/metrics.hpp"
#include "dcnar/parallel.hpp"
#include "dcnar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace dcnar {

AdditiveLagModel::AdditiveLagModel(std::size_t target, std::size_t num_indicators, std::size_t max_lag,
                                   std::size_t hidden, std::size_t num_units)
    : target_(target), n_(num_indicators), lags_(max_lag), hidden_(hidden),
      w_(num_indicators * max_lag * hidden, 0.0), b_(w_.size(), 0.0), v_(w_.size(), 0.0),
      unit_intercepts_(num_units, 0.0)
{
    if (target >= num_indicators)
        throw InputError("target index out of range");
    if (max_lag == 0 || hidden == 0)
        throw InputError("lag count and hidden size must be at least 1");
}

double AdditiveLagModel::term(std::size_t source, std::size_t lag, double x) const
{
    const std::size_t off = term_offset(source, lag);
    double out = 0.0;
    for (std::size_t h = 0; h < hidden_; ++h) {
        const double a = w_[off + h] * x + b_[off + h];
        out += v_[off + h] * (a / std::sqrt(1.0 + a * a));
    }
    return out;
}

double AdditiveLagModel::term_norm(std::size_t source, std::size_t lag) const
{
    const auto w = input_weights(source, lag);
    double ss = 0.0;
    for (double x : w)
        ss += x * x;
    return std::sqrt(ss);
}

double AdditiveLagModel::predict(std::size_t unit, std::span<const double> lagged) const
{
    if (lagged.size() != n_ * lags_)
        throw InputError("lagged input has the wrong length");
    double out = unit < unit_intercepts_.size() ? unit_intercepts_[unit] : 0.0;
    for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t l = 1; l <= lags_; ++l)
            out += term(j, l, lagged[j * lags_ + l - 1]);
    return out;
}

bool AdditiveLagModel::all_finite() const
{
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(w_) && finite(b_) && finite(v_) && finite(unit_intercepts_);
}

LagDesign build_lag_design(const PanelDataset& data, std::size_t target, std::size_t max_lag)
{
    if (target >= data.num_indicators())
        throw InputError("target index out of range");
    if (max_lag == 0)
        throw InputError("lag count must be at least 1");
    const std::size_t n = data.num_indicators();
    LagDesign d;
    d.target = target;
    d.num_indicators = n;
    d.max_lag = max_lag;
    std::vector<std::size_t> units_without_samples;
    for (std::size_t u = 0; u < data.num_units(); ++u) {
        const std::size_t before = d.unit.size();
        for (std::size_t t = max_lag; t < data.num_periods(); ++t) {
            if (!data.observed(u, t, target) || !data.history_observed(u, t - 1, max_lag))
                continue;
            d.unit.push_back(u);
            d.position.push_back(t);
            d.response.push_back(data.value(u, t, target));
        }
        if (d.unit.size() == before)
            units_without_samples.push_back(u);
    }
    if (!units_without_samples.empty())
        log::warn(std::to_string(units_without_samples.size()) + " unit(s) lack " + std::to_string(max_lag + 1) +
                  " consecutive observed periods and are dropped from fitting '" + data.indicator_names()[target] + "'");

    const std::size_t N = d.size();
    d.inputs.resize(n * max_lag * N);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t l = 1; l <= max_lag; ++l) {
            double* col = d.inputs.data() + (j * max_lag + l - 1) * N;
            for (std::size_t s = 0; s < N; ++s)
                col[s] = data.value(d.unit[s], d.position[s] - l, j);
        }
    return d;
}

namespace {

using Eigen::ArrayXd;

/// Smooth part of the training objective over a flat parameter vector
/// [w | b | v | c].
class LagObjective {
public:
    LagObjective(const LagDesign& design, std::size_t num_units, std::size_t hidden, double ridge)
        : d_(design), units_(num_units), hidden_(hidden), ridge_(ridge),
          groups_(design.num_indicators * design.max_lag), nw_(groups_ * hidden), N_(design.size()),
          pred_(N_), act_(N_), q_(N_), resid_(N_), scaled_(N_)
    {
    }

    std::size_t size() const { return 3 * nw_ + units_; }
    std::size_t weight_count() const { return nw_; }

    /// Mean squared error plus output ridge; caches predictions for gradient().
    double value(const std::vector<double>& theta)
    {
        const double* w = theta.data();
        const double* b = w + nw_;
        const double* v = b + nw_;
        const double* c = v + nw_;
        for (std::size_t s = 0; s < N_; ++s)
            pred_[static_cast<Eigen::Index>(s)] = c[d_.unit[s]];
        for (std::size_t g = 0; g < groups_; ++g) {
            Eigen::Map<const ArrayXd> x(d_.inputs.data() + g * N_, static_cast<Eigen::Index>(N_));
            for (std::size_t h = 0; h < hidden_; ++h) {
                const std::size_t k = g * hidden_ + h;
                if (v[k] == 0.0)
                    continue;
                act_ = w[k] * x + b[k];
                pred_ += v[k] * (act_ * (1.0 + act_.square()).rsqrt());
            }
        }
        Eigen::Map<const ArrayXd> y(d_.response.data(), static_cast<Eigen::Index>(N_));
        resid_ = pred_ - y;
        mse_ = N_ ? resid_.square().sum() / static_cast<double>(N_) : 0.0;
        double ridge = 0.0;
        for (std::size_t k = 0; k < nw_; ++k)
            ridge += v[k] * v[k];
        return mse_ + ridge_ * ridge;
    }

    double last_mse() const { return mse_; }

    /// Gradient at the parameters last passed to value().
    void gradient(const std::vector<double>& theta, std::vector<double>& grad)
    {
        grad.assign(theta.size(), 0.0);
        const double* w = theta.data();
        const double* b = w + nw_;
        const double* v = b + nw_;
        double* gw = grad.data();
        double* gb = gw + nw_;
        double* gv = gb + nw_;
        double* gc = gv + nw_;
        if (N_ == 0) {
            for (std::size_t k = 0; k < nw_; ++k)
                gv[k] = 2.0 * ridge_ * v[k];
            return;
        }
        const double scale = 2.0 / static_cast<double>(N_);
        scaled_ = resid_ * scale;
        for (std::size_t s = 0; s < N_; ++s)
            gc[d_.unit[s]] += scaled_[static_cast<Eigen::Index>(s)];
        for (std::size_t g = 0; g < groups_; ++g) {
            Eigen::Map<const ArrayXd> x(d_.inputs.data() + g * N_, static_cast<Eigen::Index>(N_));
            for (std::size_t h = 0; h < hidden_; ++h) {
                const std::size_t k = g * hidden_ + h;
                act_ = w[k] * x + b[k];
                q_ = (1.0 + act_.square()).rsqrt();
                gv[k] = (scaled_ * act_ * q_).sum() + 2.0 * ridge_ * v[k];
                if (v[k] == 0.0)
                    continue;
                q_ = scaled_ * q_.cube();
                gb[k] = v[k] * q_.sum();
                gw[k] = v[k] * (q_ * x).sum();
            }
        }
    }

private:
    const LagDesign& d_;
    std::size_t units_, hidden_;
    double ridge_;
    std::size_t groups_, nw_, N_;
    ArrayXd pred_, act_, q_, resid_, scaled_;
    double mse_ = 0.0;
};

/// Hierarchical group structure over input weights: for each penalized source
/// j and lag l, the group is w[j, l..L, :]. Groups are contiguous.
struct PenaltyLayout {
    std::size_t target, n, lags, hidden;
    double lambda;

    double value(const double* w) const
    {
        if (lambda == 0.0)
            return 0.0;
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == target)
                continue;
            for (std::size_t l = 1; l <= lags; ++l) {
                const double* g = w + (j * lags + l - 1) * hidden;
                const std::size_t len = (lags - l + 1) * hidden;
                double ss = 0.0;
                for (std::size_t k = 0; k < len; ++k)
                    ss += g[k] * g[k];
                total += std::sqrt(ss);
            }
        }
        return lambda * total;
    }

    /// Proximal map of step * penalty; nested groups are shrunk from the
    /// innermost (lag L only) to the outermost (lags 1..L).
    void prox(double* w, double step) const
    {
        if (lambda == 0.0)
            return;
        const double thresh = step * lambda;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == target)
                continue;
            for (std::size_t l = lags; l >= 1; --l) {
                double* g = w + (j * lags + l - 1) * hidden;
                const std::size_t len = (lags - l + 1) * hidden;
                double ss = 0.0;
                for (std::size_t k = 0; k < len; ++k)
                    ss += g[k] * g[k];
                const double norm = std::sqrt(ss);
                const double factor = norm > thresh ? 1.0 - thresh / norm : 0.0;
                for (std::size_t k = 0; k < len; ++k)
                    g[k] *= factor;
            }
        }
    }
};

std::vector<double> pack(const AdditiveLagModel& m)
{
    std::vector<double> theta;
    theta.reserve(3 * m.raw_input_weights().size() + m.num_units());
    theta.insert(theta.end(), m.raw_input_weights().begin(), m.raw_input_weights().end());
    theta.insert(theta.end(), m.raw_input_biases().begin(), m.raw_input_biases().end());
    theta.insert(theta.end(), m.raw_output_weights().begin(), m.raw_output_weights().end());
    theta.insert(theta.end(), m.unit_intercepts().begin(), m.unit_intercepts().end());
    return theta;
}

void unpack(const std::vector<double>& theta, AdditiveLagModel& m)
{
    const std::size_t nw = m.raw_input_weights().size();
    auto it = theta.begin();
    std::copy_n(it, nw, m.raw_input_weights().begin());
    std::copy_n(it + static_cast<std::ptrdiff_t>(nw), nw, m.raw_input_biases().begin());
    std::copy_n(it + static_cast<std::ptrdiff_t>(2 * nw), nw, m.raw_output_weights().begin());
    std::copy(it + static_cast<std::ptrdiff_t>(3 * nw), theta.end(), m.unit_intercepts().begin());
}

} // namespace

LossParts evaluate_loss(const AdditiveLagModel& model, const LagDesign& design, const DiscoveryOptions& options)
{
    LagObjective obj(design, model.num_units(), model.hidden(), options.output_ridge);
    const auto theta = pack(model);
    LossParts parts;
    const double smooth = obj.value(theta);
    parts.mse = obj.last_mse();
    parts.ridge = smooth - parts.mse;
    PenaltyLayout pen{model.target(), model.num_indicators(), model.max_lag(), model.hidden(), options.lambda};
    parts.penalty = pen.value(theta.data());
    return parts;
}

std::vector<double> smooth_gradient(const AdditiveLagModel& model, const LagDesign& design,
                                    const DiscoveryOptions& options)
{
    LagObjective obj(design, model.num_units(), model.hidden(), options.output_ridge);
    const auto theta = pack(model);
    obj.value(theta);
    std::vector<double> grad;
    obj.gradient(theta, grad);
    return grad;
}

AdditiveLagModel initialize_model(std::size_t target, std::size_t num_indicators, std::size_t num_units,
                                  const DiscoveryOptions& options)
{
    AdditiveLagModel m(target, num_indicators, options.max_lag, options.hidden, num_units);
    Rng rng(derive_seed({options.seed, target, 0x1a9u}));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    // Hidden units see one scalar input; the additive output sums n * L * H units.
    const double out_scale = 1.0 / std::sqrt(static_cast<double>(num_indicators * options.max_lag * options.hidden));
    for (double& x : m.raw_input_weights())
        x = unit(rng);
    for (double& x : m.raw_input_biases())
        x = unit(rng);
    for (double& x : m.raw_output_weights())
        x = out_scale * unit(rng);
    return m;
}

FittedLagModel fit_additive_model(const LagDesign& design, std::size_t num_units, const DiscoveryOptions& options,
                                  const AdditiveLagModel* warm_start)
{
    if (options.lambda < 0.0 || options.output_ridge < 0.0)
        throw InputError("penalty weights must be nonnegative");
    if (options.max_lag != design.max_lag)
        throw InputError("design lag count does not match options");
    for (std::size_t u : design.unit)
        if (u >= num_units)
            throw InputError("design references a unit outside the model");

    AdditiveLagModel model = warm_start ? *warm_start
                                        : initialize_model(design.target, design.num_indicators, num_units, options);
    if (model.num_units() != num_units || model.hidden() != options.hidden || model.max_lag() != options.max_lag)
        throw InputError("warm-start model shape does not match options");
    if (!warm_start && design.size() > 0) {
        std::vector<double> sum(num_units, 0.0), count(num_units, 0.0);
        for (std::size_t s = 0; s < design.size(); ++s) {
            sum[design.unit[s]] += design.response[s];
            count[design.unit[s]] += 1.0;
        }
        for (std::size_t u = 0; u < num_units; ++u)
            model.unit_intercepts()[u] = count[u] > 0 ? sum[u] / count[u] : 0.0;
    }

    LagObjective obj(design, num_units, options.hidden, options.output_ridge);
    PenaltyLayout pen{design.target, design.num_indicators, options.max_lag, options.hidden, options.lambda};

    // Proximal gradient with Barzilai-Borwein steps and a nonmonotone
    // backtracking acceptance test over the last few objective values.
    constexpr std::size_t memory = 5;
    constexpr double sigma = 1e-4;
    std::vector<double> x = pack(model);
    std::vector<double> grad, x_new, grad_new;
    double smooth = obj.value(x);
    double mse = obj.last_mse();
    double objective = smooth + pen.value(x.data());
    if (!std::isfinite(objective))
        throw ComputeError("NaN loss at epoch 0");
    obj.gradient(x, grad);

    std::deque<double> recent{objective};
    std::vector<double> history{objective};
    double step = 1.0;
    bool converged = false;
    std::size_t epoch = 0;
    for (epoch = 1; epoch <= options.max_epochs; ++epoch) {
        double new_smooth = 0.0, new_objective = 0.0;
        const double reference = *std::max_element(recent.begin(), recent.end());
        for (int attempt = 0;; ++attempt) {
            x_new.resize(x.size());
            for (std::size_t k = 0; k < x.size(); ++k)
                x_new[k] = x[k] - step * grad[k];
            pen.prox(x_new.data(), step);
            double dist2 = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k)
                dist2 += (x_new[k] - x[k]) * (x_new[k] - x[k]);
            new_smooth = obj.value(x_new);
            new_objective = new_smooth + pen.value(x_new.data());
            if (std::isfinite(new_objective) && new_objective <= reference - 0.5 * sigma * dist2 / step)
                break;
            if (attempt > 60 || dist2 == 0.0) {
                new_smooth = obj.value(x);
                new_objective = objective;
                x_new = x;
                break;
            }
            step *= 0.5;
        }
        if (!std::isfinite(new_objective))
            throw ComputeError("NaN loss at epoch " + std::to_string(epoch));
        mse = obj.last_mse();
        obj.gradient(x_new, grad_new);

        double ss = 0.0, sy = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double dx = x_new[k] - x[k];
            ss += dx * dx;
            sy += dx * (grad_new[k] - grad[k]);
        }
        x.swap(x_new);
        grad.swap(grad_new);
        objective = new_objective;
        step = (sy > 0.0) ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(step * 2.0, 1e10);

        recent.push_back(objective);
        if (recent.size() > memory)
            recent.pop_front();
        history.push_back(objective);
        if (history.size() > options.patience) {
            const double old = history[history.size() - 1 - options.patience];
            if (std::abs(old - objective) <= options.tolerance * std::max(std::abs(objective), 1e-12)) {
                converged = true;
                break;
            }
        }
        if (ss == 0.0) {
            converged = true;
            break;
        }
    }

    // Proximal gradient mapping at the final iterate with a unit-scale step.
    double gnorm = 0.0;
    {
        const double s = 1e-3;
        x_new.resize(x.size());
        for (std::size_t k = 0; k < x.size(); ++k)
            x_new[k] = x[k] - s * grad[k];
        pen.prox(x_new.data(), s);
        for (std::size_t k = 0; k < x.size(); ++k)
            gnorm += ((x[k] - x_new[k]) / s) * ((x[k] - x_new[k]) / s);
        gnorm = std::sqrt(gnorm);
    }

    unpack(x, model);
    if (!model.all_finite())
        throw ComputeError("non-finite parameters after training");
    FittedLagModel out{std::move(model), {}};
    out.diagnostics.converged = converged;
    out.diagnostics.epochs = std::min(epoch, options.max_epochs);
    out.diagnostics.objective = objective;
    out.diagnostics.mse = mse;
    out.diagnostics.gradient_norm = gnorm;
    out.diagnostics.samples = design.size();
    if (!converged)
        log::warn("discovery fit for target " + std::to_string(design.target) + " stopped at max epochs (gradient norm " +
                  std::to_string(gnorm) + ")");
    return out;
}

FittedLagModel fit_additive_model(const PanelDataset& train, std::size_t target, const DiscoveryOptions& options)
{
    const auto design = build_lag_design(train, target, options.max_lag);
    if (design.size() == 0)
        throw InputError("no unit has " + std::to_string(options.max_lag + 1) + " consecutive observed periods");
    return fit_additive_model(design, train.num_units(), options);
}

std::size_t AdjacencyMatrix::edge_count() const
{
    std::size_t c = 0;
    for (Eigen::Index i = 0; i < edges.rows(); ++i)
        for (Eigen::Index j = 0; j < edges.cols(); ++j)
            c += (i != j) && edges(i, j);
    return c;
}

AdjacencyMatrix AdjacencyMatrix::empty(std::vector<std::string> indicators)
{
    AdjacencyMatrix g;
    const auto n = static_cast<Eigen::Index>(indicators.size());
    g.indicators = std::move(indicators);
    g.edges.setConstant(n, n, false);
    return g;
}

CausalScoreMatrix extract_scores(const std::vector<AdditiveLagModel>& models, std::vector<std::string> indicators)
{
    const std::size_t n = indicators.size();
    if (models.size() != n)
        throw InputError("need exactly one model per indicator");
    CausalScoreMatrix S;
    S.indicators = std::move(indicators);
    S.scores.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const std::size_t lags = models.front().max_lag();
    std::vector<bool> seen(n, false);
    for (const auto& m : models) {
        if (m.max_lag() != lags)
            throw InputError("models disagree on the lag count (" + std::to_string(lags) + " vs " +
                             std::to_string(m.max_lag()) + ")");
        if (m.num_indicators() != n || seen[m.target()])
            throw InputError("models do not form one model per target indicator");
        seen[m.target()] = true;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 1; l <= lags; ++l)
                s += m.term_norm(j, l);
            S.scores(static_cast<Eigen::Index>(m.target()), static_cast<Eigen::Index>(j)) = s;
        }
    }
    return S;
}

BinarizeResult binarize(const CausalScoreMatrix& S, const BinarizeRule& rule)
{
    const auto n = static_cast<Eigen::Index>(S.size());
    std::vector<double> off;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) {
                if (!(S.scores(i, j) >= 0.0))
                    throw InputError("causal scores must be nonnegative");
                off.push_back(S.scores(i, j));
            }

    BinarizeResult out;
    out.graph = AdjacencyMatrix::empty(S.indicators);
    if (off.empty())
        return out;
    std::sort(off.begin(), off.end());
    switch (rule.kind) {
    case BinarizeRule::Kind::top_fraction:
        if (!(rule.fraction > 0.0 && rule.fraction <= 1.0))
            throw InputError("edge fraction must lie in (0, 1]");
        out.cutoff = empirical_quantile(off, 1.0 - rule.fraction);
        break;
    case BinarizeRule::Kind::top_k:
        if (rule.k == 0)
            throw InputError("top-k rule needs k >= 1");
        out.cutoff = off[off.size() - std::min(rule.k, off.size())];
        break;
    case BinarizeRule::Kind::absolute:
        out.cutoff = rule.threshold;
        break;
    }
    out.degenerate = off.front() == off.back();
    if (out.degenerate)
        log::warn(off.back() > 0.0 && off.back() >= out.cutoff
                      ? "all causal scores are equal; every edge is kept"
                      : "all causal scores are equal; every edge is dropped");
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out.graph.edges(i, j) = i != j && S.scores(i, j) > 0.0 && S.scores(i, j) >= out.cutoff;
    return out;
}

double edge_recovery_score(const CausalScoreMatrix& S, const AdjacencyMatrix& truth)
{
    if (S.size() != truth.size())
        throw InputError("score matrix and truth graph differ in dimension");
    ScoredOutcomes so;
    const auto n = static_cast<Eigen::Index>(S.size());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) {
                so.predictions.push_back(S.scores(i, j));
                so.outcomes.push_back(truth.edges(i, j) ? 1 : 0);
            }
    const auto positives = std::count(so.outcomes.begin(), so.outcomes.end(), 1);
    if (positives == 0 || positives == static_cast<long>(so.outcomes.size()))
        throw InputError("edge recovery needs both present and absent true edges");
    return auroc(so);
}

namespace {

std::size_t active_cross_groups(const AdditiveLagModel& m, double tol = 1e-3)
{
    std::size_t c = 0;
    for (std::size_t j = 0; j < m.num_indicators(); ++j)
        if (j != m.target())
            for (std::size_t l = 1; l <= m.max_lag(); ++l)
                c += m.term_norm(j, l) > tol;
    return c;
}

double design_mse(const AdditiveLagModel& m, const LagDesign& d)
{
    if (d.size() == 0)
        return 0.0;
    std::vector<double> lagged(d.num_indicators * d.max_lag);
    double ss = 0.0;
    for (std::size_t s = 0; s < d.size(); ++s) {
        for (std::size_t c = 0; c < lagged.size(); ++c)
            lagged[c] = d.inputs[c * d.size() + s];
        const double r = m.predict(d.unit[s], lagged) - d.response[s];
        ss += r * r;
    }
    return ss / static_cast<double>(d.size());
}

} // namespace

DiscoveryRun discover_network(const PanelDataset& train, const NetworkDiscoveryOptions& options)
{
    const std::size_t n = train.num_indicators();
    const std::size_t U = train.num_units();
    if (options.lambda_grid.empty())
        throw InputError("lambda grid is empty");
    for (double l : options.lambda_grid)
        if (!(l >= 0.0))
            throw InputError("lambda values must be nonnegative");

    std::vector<double> grid = options.lambda_grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());
    const bool select = grid.size() > 1;

    std::vector<LagDesign> designs;
    designs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        designs.push_back(build_lag_design(train, i, options.fit.max_lag));
        if (designs.back().size() == 0)
            throw InputError("no unit has " + std::to_string(options.fit.max_lag + 1) +
                             " consecutive observed periods for '" + train.indicator_names()[i] + "'");
    }

    const std::size_t T = train.num_periods();
    if (select && (options.validation_periods == 0 || options.validation_periods + options.fit.max_lag + 2 > T))
        throw InputError("training range too short for the lambda validation holdout");
    const std::size_t split = T - options.validation_periods;

    std::vector<std::vector<double>> val_mse(grid.size(), std::vector<double>(n, 0.0));
    std::vector<std::vector<std::size_t>> val_active(grid.size(), std::vector<std::size_t>(n, 0));
    std::vector<std::vector<AdditiveLagModel>> paths(n);
    std::vector<FittedLagModel> fitted(n);

    if (!select) {
        parallel_for(n, options.workers, [&](std::size_t i) {
            DiscoveryOptions opt = options.fit;
            opt.lambda = grid.front();
            fitted[i] = fit_additive_model(designs[i], U, opt);
        });
    } else {
        // Warm-started path from the largest lambda down, fit on the leading
        // training periods and scored on the held-out trailing ones.
        parallel_for(n, options.workers, [&](std::size_t i) {
            DiscoveryOptions opt = options.fit;
            const auto fit_part = designs[i].filter([&](std::size_t, std::size_t t) { return t < split; });
            const auto val_part = designs[i].filter([&](std::size_t, std::size_t t) { return t >= split; });
            for (std::size_t g = 0; g < grid.size(); ++g) {
                opt.lambda = grid[g];
                auto r = fit_additive_model(fit_part, U, opt, paths[i].empty() ? nullptr : &paths[i].back());
                val_mse[g][i] = design_mse(r.model, val_part);
                val_active[g][i] = active_cross_groups(r.model);
                paths[i].push_back(std::move(r.model));
            }
        });
    }

    DiscoveryRun run;
    run.selection.grid = grid;
    std::size_t best = 0;
    if (select) {
        for (std::size_t g = 0; g < grid.size(); ++g) {
            run.selection.validation_mse.push_back(std::accumulate(val_mse[g].begin(), val_mse[g].end(), 0.0));
            run.selection.active_edges.push_back(
                std::accumulate(val_active[g].begin(), val_active[g].end(), std::size_t{0}));
            if (run.selection.validation_mse[g] < run.selection.validation_mse[best])
                best = g;
        }
        parallel_for(n, options.workers, [&](std::size_t i) {
            DiscoveryOptions opt = options.fit;
            opt.lambda = grid[best];
            fitted[i] = fit_additive_model(designs[i], U, opt, &paths[i][best]);
        });
    }
    run.selection.chosen = grid[best];

    std::vector<AdditiveLagModel> models;
    for (const auto& f : fitted)
        models.push_back(f.model);
    run.scores = extract_scores(models, train.indicator_names());
    run.models = std::move(fitted);
    return run;
}

} // namespace dcnar
