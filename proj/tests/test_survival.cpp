#include "doctest.h"
#include "helpers.hpp"

#include "dcnar/error.hpp"
#include "dcnar/survival.hpp"

#include <cmath>
#include <random>

using namespace dcnar;

namespace {

SurvivalFrame manual_frame(std::vector<std::vector<double>> x, std::vector<int> event, std::vector<double> start,
                           std::vector<double> stop)
{
    SurvivalFrame f;
    const std::size_t p = x.empty() ? 0 : x[0].size();
    for (std::size_t k = 0; k < p; ++k)
        f.covariates.push_back("z" + std::to_string(k));
    f.x.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (std::size_t k = 0; k < p; ++k)
            f.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = x[r][k];
        f.event.push_back(static_cast<std::uint8_t>(event[r]));
        f.unit.push_back(r);
        f.period.push_back(0);
    }
    f.start = std::move(start);
    f.stop = std::move(stop);
    return f;
}

// Random frame with hazard depending on two covariates.
SurvivalFrame random_frame(std::uint64_t seed, std::size_t rows = 400)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::vector<double>> x;
    std::vector<int> ev;
    std::vector<double> start, stop;
    for (std::size_t r = 0; r < rows; ++r) {
        const double a = g(rng), b = g(rng);
        const double k = 1 + double(r % 6);
        x.push_back({a, b});
        ev.push_back(u(rng) < 1 / (1 + std::exp(-(-1.0 + 0.8 * a - 0.5 * b))) ? 1 : 0);
        start.push_back(k - 1);
        stop.push_back(k);
    }
    return manual_frame(x, ev, start, stop);
}

} // namespace

TEST_CASE("survival frame: censoring, first-event truncation and immediate events")
{
    // Indicator 0 fails (value <= 0) at position 3 for unit 0, never for unit 1,
    // at its first period for unit 2.
    const auto panel = testing::make_panel(3, 10, 2, [](std::size_t u, std::size_t t, std::size_t k) {
        if (k == 1)
            return double(t % 3);
        if (u == 0)
            return t == 3 ? -1.0 : 1.0;
        if (u == 2)
            return t == 0 ? -1.0 : 1.0;
        return 1.0;
    });
    const auto labels = label_failures(panel, {{"k0", 0.0}, {"k1", -5.0}});
    const auto f = build_survival_frame(panel, labels, 0);
    CHECK(f.immediate_events == 1);
    CHECK(f.event_spells == 1);
    CHECK(f.censored_spells == 1);
    // unit 0: rows for covariate periods 1,2,3 (event at 4 = position 3); unit 1: 9 rows.
    CHECK(f.rows() == 3 + 9);
    CHECK(f.events() == 1);
    CHECK(f.event[2] == 1);
    CHECK(f.stop[2] == 3.0);
    CHECK(f.period[2] == 3);
    CHECK(f.x(2, 0) == 1.0); // covariates are the state before the event
}

TEST_CASE("two-subject Cox fit matches the closed form")
{
    // Subjects with z in {0, 1} swap covariate values over time; z = 1 fails at
    // two of three event times while both are at risk:
    //   l(b) = 2b - 3 log(1 + e^b)  =>  e^b / (1 + e^b) = 2/3  =>  b = log 2
    const auto f = manual_frame({{1}, {0}, {1}, {0}, {0}, {1}}, {1, 0, 1, 0, 1, 0}, {0, 0, 1, 1, 2, 2},
                                {1, 1, 2, 2, 3, 3});
    const auto m = fit_cox(f);
    CHECK(std::abs(m.beta[0] - std::log(2.0)) < 1e-6);
    // Score at an arbitrary beta: 2 - 3 e^b / (1 + e^b).
    const double b = 0.3;
    const auto pl = cox_partial_likelihood(f, Eigen::VectorXd::Constant(1, b));
    CHECK(pl.gradient[0] == doctest::Approx(2 - 3 * std::exp(b) / (1 + std::exp(b))).epsilon(1e-12));
    CHECK(pl.value == doctest::Approx(2 * b - 3 * std::log(1 + std::exp(b))).epsilon(1e-12));
    // Breslow increments: each event time has risk set {e^b, 1}.
    REQUIRE(m.hazard_increments.size() == 3);
    CHECK(m.hazard_increments[0] == doctest::Approx(1 / 3.0));
}

TEST_CASE("Cox optimality, symmetry and rank invariance")
{
    const auto f = random_frame(1);
    const auto m = fit_cox(f);
    const auto pl = cox_partial_likelihood(f, m.beta);
    CHECK(pl.gradient.norm() < 1e-8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pl.hessian);
    CHECK(eig.eigenvalues().maxCoeff() < 0);

    auto neg = f;
    neg.x.col(0) *= -1;
    const auto mn = fit_cox(neg);
    CHECK(mn.beta[0] == doctest::Approx(-m.beta[0]).epsilon(1e-9));
    CHECK(mn.beta[1] == doctest::Approx(m.beta[1]).epsilon(1e-9));

    // Monotone relabeling of times t -> t^2 + 3t.
    auto stretched = f;
    for (std::size_t r = 0; r < f.rows(); ++r) {
        stretched.start[r] = f.start[r] * f.start[r] + 3 * f.start[r];
        stretched.stop[r] = f.stop[r] * f.stop[r] + 3 * f.stop[r];
    }
    CHECK(fit_cox(stretched).beta.isApprox(m.beta, 1e-9));
}

TEST_CASE("Cox errors")
{
    auto flat = manual_frame({{1}, {1}, {1}}, {1, 0, 0}, {0, 0, 0}, {1, 1, 1});
    CHECK_THROWS_WITH_AS(fit_cox(flat), doctest::Contains("zero variance"), InputError);
    auto none = manual_frame({{1}, {0}}, {0, 0}, {0, 0}, {1, 1});
    CHECK_THROWS_AS(fit_cox(none), InputError);
    // z perfectly orders events: monotone likelihood.
    auto sep = manual_frame({{1}, {0}, {1}, {0}}, {1, 0, 1, 0}, {0, 0, 1, 1}, {1, 1, 2, 2});
    CHECK_THROWS_WITH_AS(fit_cox(sep), doctest::Contains("'z0'"), ComputeError);
}

TEST_CASE("discrete hazard estimator properties")
{
    SUBCASE("intercept-only fit reproduces the event fraction")
    {
        auto f = manual_frame(std::vector<std::vector<double>>(8), {1, 0, 0, 1, 0, 1, 0, 0}, std::vector<double>(8, 0),
                              std::vector<double>(8, 1));
        const auto m = fit_discrete_hazard(f, {0.0});
        CHECK(m.hazard(Eigen::VectorXd()) == doctest::Approx(3.0 / 8.0).epsilon(1e-12));
    }
    SUBCASE("covariates independent of events")
    {
        // Each covariate value sees the same event rate 1/4.
        std::vector<std::vector<double>> x;
        std::vector<int> ev;
        for (int r = 0; r < 40; ++r) {
            x.push_back({double(r % 5)});
            ev.push_back((r / 5) % 4 == 0 ? 1 : 0);
        }
        auto f = manual_frame(x, ev, std::vector<double>(40, 0), std::vector<double>(40, 1));
        const auto m = fit_discrete_hazard(f, {0.0});
        CHECK(std::abs(m.beta[0]) < 1e-8);
        CHECK(std::abs(m.intercept - std::log(0.25 / 0.75)) < 1e-4);
    }
    SUBCASE("score equation, replication invariance and ridge effect")
    {
        const auto f = random_frame(3);
        const auto m = fit_discrete_hazard(f);
        double mean = 0;
        for (Eigen::Index r = 0; r < f.x.rows(); ++r)
            mean += m.hazard(f.x.row(r).transpose());
        CHECK(std::abs(mean / double(f.rows()) - double(f.events()) / double(f.rows())) < 1e-8);
        CHECK(m.gradient_norm < 1e-8);

        auto twice = f;
        twice.x.resize(2 * f.x.rows(), f.x.cols());
        twice.x << f.x, f.x;
        twice.event.insert(twice.event.end(), f.event.begin(), f.event.end());
        twice.start.insert(twice.start.end(), f.start.begin(), f.start.end());
        twice.stop.insert(twice.stop.end(), f.stop.begin(), f.stop.end());
        const auto m2 = fit_discrete_hazard(twice);
        CHECK(m2.beta.isApprox(m.beta, 1e-9));
        CHECK(m2.intercept == doctest::Approx(m.intercept).epsilon(1e-9));
    }
    SUBCASE("separation fails without a ridge and converges with one")
    {
        auto sep = manual_frame({{1}, {2}, {3}, {4}}, {0, 0, 1, 1}, {0, 0, 0, 0}, {1, 1, 1, 1});
        CHECK_THROWS_WITH_AS(fit_discrete_hazard(sep, {0.0}), doctest::Contains("'z0'"), ComputeError);
        CHECK_NOTHROW(fit_discrete_hazard(sep, {1e-4}));
    }
    SUBCASE("needs both outcomes")
    {
        auto all = manual_frame({{1}, {2}}, {1, 1}, {0, 0}, {1, 1});
        CHECK_THROWS_AS(fit_discrete_hazard(all), InputError);
    }
}

TEST_CASE("horizon risk")
{
    DiscreteHazardModel m;
    m.beta = Eigen::VectorXd::Zero(1);
    m.intercept = std::log(0.1 / 0.9);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    CHECK(horizon_risk(m, x, 5) == doctest::Approx(0.40951).epsilon(1e-12));
    CHECK(horizon_risk(m, x, 1) == doctest::Approx(0.1).epsilon(1e-12));
    m.intercept = -1000;
    CHECK(horizon_risk(m, x, 5) == 0.0);
    CHECK_THROWS_AS(horizon_risk(m, x, 0), InputError);

    const auto f = random_frame(4);
    const auto cox = fit_cox(f);
    const Eigen::VectorXd z = Eigen::VectorXd::Constant(2, 0.3);
    double prev = 0;
    for (std::size_t h = 1; h <= 10; ++h) {
        const auto avg = horizon_risk(cox, z, h);
        const auto win = horizon_risk(cox, z, h, CoxHorizonMode::window, 2.0);
        CHECK(avg.risk >= prev);
        CHECK(win.risk >= 0.0);
        CHECK(win.extrapolated == (2.0 + double(h) > 6.0));
        prev = avg.risk;
    }
    // Average mode: h * (H0 / max time) * exp(beta z).
    const double expected = -std::expm1(-5 * cox.total_hazard() / cox.max_time * std::exp(cox.beta.dot(z)));
    CHECK(horizon_risk(cox, z, 5).risk == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("baseline scoring covers the landmark cells")
{
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    const auto panel = testing::make_panel(30, 20, 3, [&](auto, auto, auto) { return g(rng); });
    const auto labels = label_failures(panel, {{"k0", -0.8}, {"k1", -0.8}, {"k2", -0.8}});
    const auto [train, test] = temporal_split(panel, 12);
    const auto train_labels = label_failures(train, {{"k0", -0.8}, {"k1", -0.8}, {"k2", -0.8}});
    LandmarkOptions lm;
    lm.horizon = 3;
    lm.origin_min = 12;
    const auto run = run_baselines(train, train_labels, panel, labels, lm);
    const auto cells = landmark_origins(panel, labels, lm);
    CHECK(run.cox_risk.size() == cells.size());
    CHECK(run.hazard_risk.size() == cells.size());
    for (const auto& r : run.hazard_risk) {
        CHECK(r.risk > 0.0);
        CHECK(r.risk < 1.0);
        CHECK(r.draws == 0);
    }
}
