#include "dcnar/survival.hpp"

#include "dcnar/error.hpp"
#include "dcnar/log.hpp"
#include "dcnar/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace dcnar {

namespace {

// |beta_k| * sd_k beyond this means the likelihood keeps increasing along k.
constexpr double divergence_limit = 25.0;

Eigen::VectorXd column_sd(const Eigen::MatrixXd& x)
{
    Eigen::VectorXd sd(x.cols());
    const double rows = static_cast<double>(x.rows());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const double m = x.col(k).mean();
        sd[k] = std::sqrt((x.col(k).array() - m).square().sum() / rows);
    }
    return sd;
}

void require_variation(const SurvivalFrame& frame, const Eigen::VectorXd& sd)
{
    for (Eigen::Index k = 0; k < sd.size(); ++k)
        if (!(sd[k] > 0.0))
            throw InputError("covariate '" + frame.covariates[static_cast<std::size_t>(k)] +
                             "' has zero variance in the survival frame");
}

Eigen::Index most_divergent(const Eigen::VectorXd& beta, const Eigen::VectorXd& sd)
{
    Eigen::Index k = 0;
    (beta.cwiseAbs().cwiseProduct(sd)).maxCoeff(&k);
    return k;
}

std::vector<double> distinct_event_times(const SurvivalFrame& frame)
{
    std::vector<double> times;
    for (std::size_t r = 0; r < frame.rows(); ++r)
        if (frame.event[r])
            times.push_back(frame.stop[r]);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    return times;
}

} // namespace

std::size_t SurvivalFrame::events() const
{
    return static_cast<std::size_t>(std::count(event.begin(), event.end(), std::uint8_t{1}));
}

SurvivalFrame build_survival_frame(const PanelDataset& data, const FailureLabels& labels, std::size_t target)
{
    const std::size_t n = data.num_indicators();
    if (target >= n)
        throw InputError("target indicator index out of range");
    if (labels.num_units() != data.num_units() || labels.num_periods() != data.num_periods() ||
        labels.num_indicators() != n)
        throw InputError("failure labels do not match the panel shape");

    SurvivalFrame frame;
    frame.target = target;
    frame.covariates = data.indicator_names();
    std::vector<double> values;
    const std::size_t T = data.num_periods();
    for (std::size_t u = 0; u < data.num_units(); ++u) {
        std::size_t t = 0;
        while (t < T && !data.state_observed(u, t))
            ++t;
        if (t == T)
            continue;
        if (labels.failed(u, t, target)) {
            ++frame.immediate_events;
            continue;
        }
        std::size_t k = 0;
        bool event = false;
        for (; t + 1 < T; ++t) {
            if (!data.state_observed(u, t) || !labels.defined(u, t + 1, target))
                break;
            ++k;
            event = labels.failed(u, t + 1, target);
            const auto s = data.state(u, t);
            values.insert(values.end(), s.begin(), s.end());
            frame.event.push_back(event ? 1 : 0);
            frame.start.push_back(static_cast<double>(k - 1));
            frame.stop.push_back(static_cast<double>(k));
            frame.unit.push_back(u);
            frame.period.push_back(data.period(t));
            if (event)
                break;
        }
        if (k == 0)
            continue;
        if (event)
            ++frame.event_spells;
        else
            ++frame.censored_spells;
    }
    frame.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(frame.event.size()), static_cast<Eigen::Index>(n));
    return frame;
}

// ---------------------------------------------------------------- Cox

PartialLikelihood cox_partial_likelihood(const SurvivalFrame& frame, const Eigen::VectorXd& beta)
{
    const Eigen::Index p = frame.x.cols();
    const auto times = distinct_event_times(frame);
    const std::size_t E = times.size();
    std::vector<double> s0(E, 0.0), deaths(E, 0.0);
    std::vector<Eigen::VectorXd> s1(E, Eigen::VectorXd::Zero(p)), xsum(E, Eigen::VectorXd::Zero(p));
    std::vector<Eigen::MatrixXd> s2(E, Eigen::MatrixXd::Zero(p, p));

    // Centering keeps exp() in range without changing the likelihood.
    const Eigen::RowVectorXd center = frame.x.colwise().mean();
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        const Eigen::VectorXd xr = (frame.x.row(static_cast<Eigen::Index>(r)) - center).transpose();
        const double w = std::exp(beta.dot(xr));
        // Risk sets at event times in (start, stop].
        auto it = std::upper_bound(times.begin(), times.end(), frame.start[r]);
        for (; it != times.end() && *it <= frame.stop[r]; ++it) {
            const auto e = static_cast<std::size_t>(it - times.begin());
            s0[e] += w;
            s1[e] += w * xr;
            s2[e].noalias() += w * xr * xr.transpose();
        }
        if (frame.event[r]) {
            const auto e = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), frame.stop[r]) -
                                                    times.begin());
            deaths[e] += 1.0;
            xsum[e] += xr;
        }
    }

    PartialLikelihood pl;
    pl.gradient = Eigen::VectorXd::Zero(p);
    pl.hessian = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t e = 0; e < E; ++e) {
        const double d = deaths[e];
        const Eigen::VectorXd mean = s1[e] / s0[e];
        pl.value += beta.dot(xsum[e]) - d * std::log(s0[e]);
        pl.gradient += xsum[e] - d * mean;
        pl.hessian -= d * (s2[e] / s0[e] - mean * mean.transpose());
    }
    return pl;
}

CoxModel fit_cox(const SurvivalFrame& frame, const CoxOptions& options)
{
    if (frame.events() == 0)
        throw InputError("Cox fit needs at least one event");
    const Eigen::Index p = frame.x.cols();
    const Eigen::VectorXd sd = column_sd(frame.x);
    require_variation(frame, sd);

    auto divergence = [&](const Eigen::VectorXd& beta) {
        const Eigen::Index k = most_divergent(beta, sd);
        return ComputeError("monotone likelihood: the coefficient of covariate '" +
                            frame.covariates[static_cast<std::size_t>(k)] +
                            "' diverges (the covariate perfectly separates events)");
    };

    CoxModel model;
    model.covariates = frame.covariates;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    PartialLikelihood pl = cox_partial_likelihood(frame, beta);
    const Eigen::VectorXd info0 = -pl.hessian.diagonal();
    bool converged = pl.gradient.norm() < options.tolerance;
    std::size_t iter = 0;
    while (!converged && iter < options.max_iterations) {
        ++iter;
        Eigen::LDLT<Eigen::MatrixXd> info(-pl.hessian);
        if (info.info() != Eigen::Success || !info.isPositive() || info.rcond() < 1e-12) {
            if ((beta.cwiseAbs().cwiseProduct(sd)).maxCoeff() > 0.4 * divergence_limit)
                throw divergence(beta);
            throw ComputeError("singular information matrix in the Cox fit (collinear covariates?)");
        }
        const Eigen::VectorXd step = info.solve(pl.gradient);
        double scale = 1.0;
        PartialLikelihood trial;
        Eigen::VectorXd candidate;
        for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
            candidate = beta + scale * step;
            trial = cox_partial_likelihood(frame, candidate);
            if (std::isfinite(trial.value) && trial.value >= pl.value - 1e-12 * std::abs(pl.value))
                break;
        }
        beta = candidate;
        pl = trial;
        if ((beta.cwiseAbs().cwiseProduct(sd)).maxCoeff() > divergence_limit)
            throw divergence(beta);
        converged = pl.gradient.norm() < options.tolerance;
    }
    if (!converged) {
        if ((beta.cwiseAbs().cwiseProduct(sd)).maxCoeff() > 0.4 * divergence_limit)
            throw divergence(beta);
        throw ComputeError("Cox fit did not converge in " + std::to_string(options.max_iterations) +
                           " iterations (gradient norm " + std::to_string(pl.gradient.norm()) + ")");
    }
    // The gradient can vanish numerically while a coefficient runs off to
    // infinity; the information for that coefficient collapses with it.
    for (Eigen::Index k = 0; k < p; ++k)
        if (-pl.hessian(k, k) < 1e-6 * info0[k] && std::abs(beta[k]) * sd[k] > 5.0)
            throw ComputeError("monotone likelihood: the coefficient of covariate '" +
                               frame.covariates[static_cast<std::size_t>(k)] +
                               "' diverges (the covariate perfectly separates events)");
    model.beta = beta;
    model.iterations = iter;
    model.gradient_norm = pl.gradient.norm();

    // Breslow increments with uncentered covariates.
    const auto times = distinct_event_times(frame);
    std::vector<double> s0(times.size(), 0.0), deaths(times.size(), 0.0);
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        const double w = std::exp(frame.x.row(static_cast<Eigen::Index>(r)).dot(beta));
        auto it = std::upper_bound(times.begin(), times.end(), frame.start[r]);
        for (; it != times.end() && *it <= frame.stop[r]; ++it)
            s0[static_cast<std::size_t>(it - times.begin())] += w;
        if (frame.event[r])
            deaths[static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), frame.stop[r]) -
                                            times.begin())] += 1.0;
        model.max_time = std::max(model.max_time, frame.stop[r]);
    }
    model.event_times = times;
    model.hazard_increments.resize(times.size());
    for (std::size_t e = 0; e < times.size(); ++e)
        model.hazard_increments[e] = deaths[e] / s0[e];
    return model;
}

double CoxModel::cumulative_hazard(double time) const
{
    double h = 0.0;
    for (std::size_t e = 0; e < event_times.size() && event_times[e] <= time; ++e)
        h += hazard_increments[e];
    return h;
}

double CoxModel::total_hazard() const
{
    double h = 0.0;
    for (double v : hazard_increments)
        h += v;
    return h;
}

std::string to_string(CoxHorizonMode mode)
{
    return mode == CoxHorizonMode::average ? "average" : "window";
}

CoxHorizonMode cox_horizon_mode_from_string(const std::string& text)
{
    if (text == "average")
        return CoxHorizonMode::average;
    if (text == "window")
        return CoxHorizonMode::window;
    throw InputError("unknown Cox horizon mode '" + text + "' (expected average or window)");
}

CoxRisk horizon_risk(const CoxModel& model, const Eigen::VectorXd& x, std::size_t h, CoxHorizonMode mode,
                     double spell_time)
{
    if (h == 0)
        throw InputError("horizon must be at least 1");
    if (x.size() != model.beta.size())
        throw InputError("covariate vector has the wrong dimension");
    const double relative = std::exp(model.beta.dot(x));
    const auto H = static_cast<double>(h);
    CoxRisk out;
    double base = 0.0;
    if (mode == CoxHorizonMode::average) {
        base = model.max_time > 0.0 ? H * model.total_hazard() / model.max_time : 0.0;
    } else {
        const double last_time = model.event_times.empty() ? 0.0 : model.event_times.back();
        const double end = spell_time + H;
        base = model.cumulative_hazard(end) - model.cumulative_hazard(spell_time);
        if (end > last_time && !model.hazard_increments.empty()) {
            out.extrapolated = true;
            const double from = std::max(spell_time, last_time);
            base += (end - from) * model.hazard_increments.back();
        }
    }
    out.risk = -std::expm1(-base * relative);
    return out;
}

// ---------------------------------------------------------------- discrete hazard

double DiscreteHazardModel::hazard(const Eigen::VectorXd& x) const
{
    if (x.size() != beta.size())
        throw InputError("covariate vector has the wrong dimension");
    const double eta = intercept + beta.dot(x);
    return 1.0 / (1.0 + std::exp(-eta));
}

DiscreteHazardModel fit_discrete_hazard(const SurvivalFrame& frame, const HazardOptions& options)
{
    const std::size_t N = frame.rows();
    const std::size_t events = frame.events();
    if (events == 0 || events == N)
        throw InputError("discrete hazard fit needs at least one event row and one non-event row");
    if (options.ridge < 0.0)
        throw InputError("ridge must be nonnegative");
    const Eigen::Index p = frame.x.cols();
    const Eigen::VectorXd sd = p > 0 ? column_sd(frame.x) : Eigen::VectorXd();
    if (p > 0)
        require_variation(frame, sd);

    // Design with a leading intercept column.
    Eigen::MatrixXd X(static_cast<Eigen::Index>(N), p + 1);
    X.col(0).setOnes();
    X.rightCols(p) = frame.x;
    Eigen::VectorXd y(static_cast<Eigen::Index>(N));
    for (std::size_t r = 0; r < N; ++r)
        y[static_cast<Eigen::Index>(r)] = frame.event[r];
    const double inv_n = 1.0 / static_cast<double>(N);
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, options.ridge);
    penalty[0] = 0.0;

    auto objective = [&](const Eigen::VectorXd& theta) {
        const Eigen::ArrayXd eta = X * theta;
        // log(1 + e^eta) computed stably
        const Eigen::ArrayXd softplus = eta.max(0.0) + (-eta.abs()).exp().log1p();
        return inv_n * ((y.array() * eta) - softplus).sum() - 0.5 * (penalty.array() * theta.array().square()).sum();
    };

    // Start at the empirical rate so intercept-only fits converge immediately.
    const double rate = static_cast<double>(events) / static_cast<double>(N);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
    theta[0] = std::log(rate / (1.0 - rate));
    double value = objective(theta);
    bool converged = false;
    std::size_t iter = 0;
    Eigen::VectorXd grad;
    for (;; ++iter) {
        const Eigen::ArrayXd mu = 1.0 / (1.0 + (-(X * theta).array()).exp());
        grad = inv_n * (X.transpose() * (y.array() - mu).matrix()) - penalty.cwiseProduct(theta);
        if (grad.norm() < options.tolerance) {
            converged = true;
            break;
        }
        if (iter >= options.max_iterations)
            break;
        const Eigen::ArrayXd w = mu * (1.0 - mu);
        Eigen::MatrixXd info = inv_n * (X.transpose() * (X.array().colwise() * w).matrix());
        info.diagonal() += penalty;
        Eigen::LDLT<Eigen::MatrixXd> solver(info);
        if (solver.info() != Eigen::Success || !solver.isPositive() || solver.rcond() < 1e-14) {
            if (p > 0 && (theta.tail(p).cwiseAbs().cwiseProduct(sd)).maxCoeff() > 0.4 * divergence_limit)
                break;
            throw ComputeError("singular information matrix in the discrete hazard fit (collinear covariates?)");
        }
        const Eigen::VectorXd step = solver.solve(grad);
        double scale = 1.0;
        Eigen::VectorXd candidate;
        double trial = value;
        for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
            candidate = theta + scale * step;
            trial = objective(candidate);
            if (std::isfinite(trial) && trial >= value - 1e-15 * std::abs(value))
                break;
        }
        theta = candidate;
        value = trial;
        if (p > 0 && (theta.tail(p).cwiseAbs().cwiseProduct(sd)).maxCoeff() > divergence_limit)
            break;
    }
    if (!converged) {
        if (p > 0 && (theta.tail(p).cwiseAbs().cwiseProduct(sd)).maxCoeff() > 0.4 * divergence_limit) {
            const Eigen::Index k = most_divergent(theta.tail(p), sd);
            throw ComputeError("perfect separation in the discrete hazard fit: the coefficient of covariate '" +
                               frame.covariates[static_cast<std::size_t>(k)] + "' diverges; use a positive ridge");
        }
        throw ComputeError("discrete hazard fit did not converge in " + std::to_string(options.max_iterations) +
                           " iterations (gradient norm " + std::to_string(grad.norm()) + ")");
    }

    DiscreteHazardModel model;
    model.covariates = frame.covariates;
    model.intercept = theta[0];
    model.beta = theta.tail(p);
    model.ridge = options.ridge;
    model.iterations = iter;
    model.gradient_norm = grad.norm();
    return model;
}

double horizon_risk(const DiscreteHazardModel& model, const Eigen::VectorXd& x, std::size_t h)
{
    if (h == 0)
        throw InputError("horizon must be at least 1");
    const double q = model.hazard(x);
    return -std::expm1(static_cast<double>(h) * std::log1p(-q));
}

// ---------------------------------------------------------------- scoring

BaselineRun run_baselines(const PanelDataset& train, const FailureLabels& train_labels, const PanelDataset& eval,
                          const FailureLabels& eval_labels, const LandmarkOptions& landmarks,
                          const BaselineOptions& options)
{
    if (train.indicator_names() != eval.indicator_names())
        throw InputError("training and evaluation panels have different indicators");
    const std::size_t n = train.num_indicators();
    BaselineRun run;
    run.cox.resize(n);
    run.hazard.resize(n);
    parallel_for(n, options.workers, [&](std::size_t k) {
        const auto frame = build_survival_frame(train, train_labels, k);
        const std::string& name = train.indicator_names()[k];
        try {
            run.cox[k] = fit_cox(frame, options.cox);
            run.hazard[k] = fit_discrete_hazard(frame, options.hazard);
        } catch (const ComputeError& e) {
            throw ComputeError("indicator '" + name + "': " + e.what());
        } catch (const InputError& e) {
            throw InputError("indicator '" + name + "': " + e.what());
        }
    });

    const auto cells = landmark_origins(eval, eval_labels, landmarks);
    if (cells.empty())
        throw InputError("no valid origin in the evaluation panel");

    // Spell time at an origin: positions since the unit's first fully observed period.
    std::vector<std::size_t> first_seen(eval.num_units(), 0);
    for (std::size_t u = 0; u < eval.num_units(); ++u)
        while (first_seen[u] < eval.num_periods() && !eval.state_observed(u, first_seen[u]))
            ++first_seen[u];

    for (const Landmark& cell : cells) {
        const auto s = eval.state(cell.unit, cell.position);
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(n));
        const std::string& unit = eval.units()[cell.unit];
        const int origin = eval.period(cell.position);
        const std::string& indicator = eval.indicator_names()[cell.indicator];
        const double spell = static_cast<double>(cell.position - first_seen[cell.unit]);
        const auto cox = horizon_risk(run.cox[cell.indicator], x, landmarks.horizon, options.cox_mode, spell);
        run.extrapolated += cox.extrapolated ? 1 : 0;
        run.cox_risk.push_back({unit, origin, indicator, cox.risk, landmarks.horizon, 0});
        run.hazard_risk.push_back(
            {unit, origin, indicator, horizon_risk(run.hazard[cell.indicator], x, landmarks.horizon), landmarks.horizon, 0});
    }
    if (run.extrapolated > 0)
        log::warn(std::to_string(run.extrapolated) +
                  " Cox risk windows extended past the last training event time; the last hazard increment was extrapolated");
    return run;
}

} // namespace dcnar
