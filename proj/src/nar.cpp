#include "dcnar/nar.hpp"

#include "dcnar/error.hpp"
#include "dcnar/log.hpp"
#include "dcnar/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace dcnar {

SplineBasis::SplineBasis(std::size_t size, double t_min, double t_max)
    : size_(size), degree_(size == 0 ? 0 : std::min<std::size_t>(3, size - 1)), t_min_(t_min), t_max_(t_max)
{
    if (size == 0)
        throw InputError("basis size must be at least 1");
    if (!(t_max >= t_min))
        throw InputError("basis time range is empty");
    const std::size_t interior = size - degree_ - 1;
    knots_.assign(degree_ + 1, 0.0);
    for (std::size_t k = 1; k <= interior; ++k)
        knots_.push_back(static_cast<double>(k) / static_cast<double>(interior + 1));
    knots_.insert(knots_.end(), degree_ + 1, 1.0);
}

double SplineBasis::scaled(double period) const
{
    if (t_max_ == t_min_)
        return 0.0;
    return std::clamp((period - t_min_) / (t_max_ - t_min_), 0.0, 1.0);
}

std::vector<double> SplineBasis::evaluate(double period) const
{
    std::vector<double> out(size_);
    evaluate(period, out);
    return out;
}

void SplineBasis::evaluate(double period, std::span<double> out) const
{
    const double s = scaled(period);
    const std::size_t d = degree_;
    // Knot span with knots_[span] <= s < knots_[span + 1]; s == 1 uses the last span.
    std::size_t span = d;
    while (span + 1 < size_ && s >= knots_[span + 1])
        ++span;

    // Cox-de Boor on the d + 1 nonzero functions of this span.
    std::vector<double> N(d + 1, 0.0), left(d + 1), right(d + 1);
    N[0] = 1.0;
    for (std::size_t r = 1; r <= d; ++r) {
        left[r] = s - knots_[span + 1 - r];
        right[r] = knots_[span + r] - s;
        double saved = 0.0;
        for (std::size_t k = 0; k < r; ++k) {
            const double denom = right[k + 1] + left[r - k];
            const double temp = denom == 0.0 ? 0.0 : N[k] / denom;
            N[k] = saved + right[k + 1] * temp;
            saved = left[r - k] * temp;
        }
        N[r] = saved;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k <= d; ++k)
        out[span - d + k] = N[k];
}

double SplineBasis::min_knot_spacing() const
{
    double best = 1.0;
    for (std::size_t k = 1; k < knots_.size(); ++k)
        if (knots_[k] > knots_[k - 1])
            best = std::min(best, knots_[k] - knots_[k - 1]);
    return best;
}

Eigen::MatrixXd NarModel::lambda(std::size_t lag, double period) const
{
    if (lag == 0 || lag > lags)
        throw InputError("lag out of range");
    const std::size_t n = size();
    const auto phi = basis.evaluate(period);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (!in_support(i, j))
                continue;
            double v = 0.0;
            for (std::size_t b = 0; b < basis.size(); ++b)
                v += coefficient(lag, i, j, b) * phi[b];
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    return out;
}

Eigen::MatrixXd NarModel::native_lambda(std::size_t lag, double period) const
{
    Eigen::MatrixXd out = lambda(lag, period);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            out(i, j) *= norm.sd[static_cast<std::size_t>(i)] / norm.sd[static_cast<std::size_t>(j)];
    return out;
}

namespace {

struct RowFit {
    std::vector<double> theta; ///< [(l - 1)][jj][b] over the support columns
    std::vector<std::size_t> support;
    double sigma = 0.0;
    std::size_t samples = 0;
};

RowFit fit_row(const PanelDataset& train, const NarModel& model, std::size_t i, double ridge)
{
    const std::size_t p = model.lags;
    const std::size_t B = model.basis.size();
    RowFit fit;
    for (std::size_t j = 0; j < model.size(); ++j)
        if (model.in_support(i, j))
            fit.support.push_back(j);
    const std::size_t J = fit.support.size();
    const auto cols = static_cast<Eigen::Index>(p * J * B);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(cols, cols);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cols);
    Eigen::VectorXd z(cols);
    std::vector<double> phi(B);
    std::vector<std::pair<std::size_t, std::size_t>> rows;
    for (std::size_t u = 0; u < train.num_units(); ++u)
        for (std::size_t t = p; t < train.num_periods(); ++t) {
            if (!train.observed(u, t, i) || !train.history_observed(u, t - 1, p))
                continue;
            model.basis.evaluate(train.period(t), phi);
            for (std::size_t l = 1; l <= p; ++l)
                for (std::size_t jj = 0; jj < J; ++jj) {
                    const double x = train.value(u, t - l, fit.support[jj]);
                    for (std::size_t b = 0; b < B; ++b)
                        z[static_cast<Eigen::Index>(((l - 1) * J + jj) * B + b)] = phi[b] * x;
                }
            const double y = train.value(u, t, i);
            A.selfadjointView<Eigen::Lower>().rankUpdate(z);
            rhs += y * z;
            rows.emplace_back(u, t);
        }
    fit.samples = rows.size();
    if (rows.empty())
        throw InputError("no unit has " + std::to_string(p + 1) + " consecutive observed periods for '" +
                         model.indicators[i] + "'");
    A = Eigen::MatrixXd(A.selfadjointView<Eigen::Lower>());
    A.diagonal().array() += ridge;

    Eigen::VectorXd theta;
    if (ridge > 0.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success)
            throw ComputeError("ridge normal equations are not positive definite for '" + model.indicators[i] + "'");
        theta = llt.solve(rhs);
    } else {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13)
            throw ComputeError("singular normal equations for '" + model.indicators[i] +
                               "'; use a positive ridge");
        theta = ldlt.solve(rhs);
    }
    fit.theta.assign(theta.data(), theta.data() + theta.size());

    double ss = 0.0;
    for (auto [u, t] : rows) {
        model.basis.evaluate(train.period(t), phi);
        double pred = 0.0;
        for (std::size_t l = 1; l <= p; ++l)
            for (std::size_t jj = 0; jj < J; ++jj) {
                const double x = train.value(u, t - l, fit.support[jj]);
                for (std::size_t b = 0; b < B; ++b)
                    pred += fit.theta[((l - 1) * J + jj) * B + b] * phi[b] * x;
            }
        const double r = train.value(u, t, i) - pred;
        ss += r * r;
    }
    fit.sigma = std::sqrt(ss / static_cast<double>(rows.size()));
    return fit;
}

} // namespace

NarModel fit_nar(const PanelDataset& train, const NormStats& norm, const AdjacencyMatrix& graph,
                 const NarOptions& options)
{
    const std::size_t n = train.num_indicators();
    if (graph.size() != n || static_cast<std::size_t>(graph.edges.rows()) != n ||
        static_cast<std::size_t>(graph.edges.cols()) != n)
        throw InputError("adjacency is " + std::to_string(graph.size()) + "x" + std::to_string(graph.size()) +
                         " but the panel has " + std::to_string(n) + " indicators");
    if (graph.indicators != train.indicator_names())
        throw InputError("adjacency indicator names do not match the panel");
    if (norm.indicators != train.indicator_names())
        throw InputError("normalization statistics do not match the panel");
    if (options.lags == 0)
        throw InputError("lag order must be at least 1");
    if (options.basis_size == 0)
        throw InputError("basis size must be at least 1");
    if (!(options.ridge >= 0.0))
        throw InputError("ridge must be nonnegative");

    std::size_t dropped = 0;
    for (std::size_t u = 0; u < train.num_units(); ++u) {
        bool any = false;
        for (std::size_t t = options.lags; t < train.num_periods() && !any; ++t)
            any = train.history_observed(u, t, options.lags + 1);
        dropped += !any;
    }
    if (dropped > 0)
        log::warn(std::to_string(dropped) + " unit(s) lack " + std::to_string(options.lags + 1) +
                  " consecutive fully observed periods and are dropped from the dynamic fit");

    NarModel model;
    model.indicators = train.indicator_names();
    model.graph = graph;
    for (Eigen::Index i = 0; i < model.graph.edges.rows(); ++i)
        model.graph.edges(i, i) = false;
    model.lags = options.lags;
    model.basis = SplineBasis(options.basis_size, train.first_period(), train.last_period());
    model.ridge = options.ridge;
    model.norm = norm;
    model.coefficients.assign(options.lags * n * n * options.basis_size, 0.0);
    model.sigma.assign(n, 0.0);

    std::vector<RowFit> rows(n);
    parallel_for(n, options.workers, [&](std::size_t i) { rows[i] = fit_row(train, model, i, options.ridge); });

    const std::size_t B = options.basis_size;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = rows[i];
        const std::size_t J = f.support.size();
        for (std::size_t l = 1; l <= options.lags; ++l)
            for (std::size_t jj = 0; jj < J; ++jj)
                for (std::size_t b = 0; b < B; ++b)
                    model.coefficients[model.coefficient_index(l, i, f.support[jj], b)] =
                        f.theta[((l - 1) * J + jj) * B + b];
        model.sigma[i] = f.sigma;
    }

    // Full residual vectors where the whole state and its history are observed.
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<Eigen::VectorXd> history(options.lags);
    for (std::size_t u = 0; u < train.num_units(); ++u)
        for (std::size_t t = options.lags; t < train.num_periods(); ++t) {
            if (!train.history_observed(u, t, options.lags + 1))
                continue;
            for (std::size_t l = 0; l < options.lags; ++l) {
                const auto s = train.state(u, t - options.lags + l);
                history[l] = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(n));
            }
            const auto x = train.state(u, t);
            Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n)) -
                                predict_one_step(model, history, train.period(t));
            cov += r * r.transpose();
            model.residuals.emplace_back(r.data(), r.data() + r.size());
        }
    if (!model.residuals.empty())
        cov /= static_cast<double>(model.residuals.size());
    model.residual_covariance = cov;
    return model;
}

Eigen::VectorXd predict_one_step(const NarModel& model, std::span<const Eigen::VectorXd> history, double period)
{
    if (history.size() != model.lags)
        throw InputError("history has " + std::to_string(history.size()) + " states; the model needs " +
                         std::to_string(model.lags));
    const auto n = static_cast<Eigen::Index>(model.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (std::size_t l = 1; l <= model.lags; ++l) {
        const auto& x = history[model.lags - l];
        if (x.size() != n)
            throw InputError("history state has the wrong dimension");
        out += model.lambda(l, period) * x;
    }
    return out;
}

InSampleReport in_sample_report(const NarModel& model, const PanelDataset& data)
{
    const std::size_t n = model.size();
    if (data.indicator_names() != model.indicators)
        throw InputError("panel indicators do not match the model");
    const std::size_t p = model.lags;
    std::vector<double> ss(n, 0.0), sum_r(n, 0.0), sum_yy(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    std::vector<Eigen::VectorXd> history(p);
    for (std::size_t u = 0; u < data.num_units(); ++u)
        for (std::size_t t = p; t < data.num_periods(); ++t) {
            if (!data.history_observed(u, t - 1, p))
                continue;
            for (std::size_t l = 0; l < p; ++l) {
                const auto s = data.state(u, t - p + l);
                history[l] = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(n));
            }
            const Eigen::VectorXd pred = predict_one_step(model, history, data.period(t));
            for (std::size_t i = 0; i < n; ++i) {
                if (!data.observed(u, t, i))
                    continue;
                const double y = data.value(u, t, i);
                const double r = y - pred[static_cast<Eigen::Index>(i)];
                ss[i] += r * r;
                sum_r[i] += r;
                sum_yy[i] += y * y;
                ++count[i];
            }
        }
    InSampleReport report;
    report.independent_rows = model.independent_rows();
    for (std::size_t i = 0; i < n; ++i) {
        IndicatorFitSummary s;
        s.indicator = model.indicators[i];
        s.count = count[i];
        if (count[i] > 0) {
            const double c = static_cast<double>(count[i]);
            s.mse = ss[i] / c;
            s.residual_mean = sum_r[i] / c;
            s.variance = sum_yy[i] / c;
        }
        report.indicators.push_back(s);
    }
    return report;
}

} // namespace dcnar
