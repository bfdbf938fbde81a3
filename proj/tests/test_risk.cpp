#include "doctest.h"
#include "helpers.hpp"

#include "dcnar/error.hpp"
#include "dcnar/risk.hpp"

#include <cmath>
#include <limits>

using namespace dcnar;

namespace {

// Model with Lambda = `coef` * I, unit normalization and noise sigma.
NarModel diagonal_model(std::size_t n, double coef, double sigma, std::size_t lags = 1)
{
    NarModel m;
    m.indicators.clear();
    for (std::size_t i = 0; i < n; ++i)
        m.indicators.push_back("k" + std::to_string(i));
    m.graph = AdjacencyMatrix::empty(m.indicators);
    m.lags = lags;
    m.basis = SplineBasis(1, 0, 10);
    m.coefficients.assign(lags * n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        m.coefficients[m.coefficient_index(1, i, i, 0)] = coef;
    m.sigma.assign(n, sigma);
    m.norm = {m.indicators, std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
    m.residual_covariance = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) *
                            sigma * sigma;
    return m;
}

std::vector<Eigen::VectorXd> state(std::initializer_list<double> v)
{
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double a : v)
        x[k++] = a;
    return {x};
}

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

TEST_CASE("noise-free simulation is the conditional-mean path")
{
    const auto m = diagonal_model(2, 0.5, 1.0);
    SimulationOptions opt;
    opt.noise = NoiseMode::none;
    opt.draws = 3;
    opt.horizon = 3;
    const auto e = simulate(m, state({4.0, -2.0}), 0, opt, "u");
    for (std::size_t d = 0; d < 3; ++d) {
        CHECK(e.value(d, 1, 0) == 2.0);
        CHECK(e.value(d, 3, 0) == 0.5);
        CHECK(e.value(d, 2, 1) == -0.5);
    }
}

TEST_CASE("zero dynamics: step-one marginal is Gaussian around zero")
{
    const auto m = diagonal_model(1, 0.0, 1.0);
    SimulationOptions opt;
    opt.draws = 10000;
    opt.horizon = 1;
    opt.seed = 5;
    const auto e = simulate(m, state({3.0}), 0, opt, "u");
    double mean = 0, sq = 0;
    for (std::size_t d = 0; d < opt.draws; ++d) {
        mean += e.value(d, 1, 0);
        sq += e.value(d, 1, 0) * e.value(d, 1, 0);
    }
    mean /= double(opt.draws);
    CHECK(std::abs(mean) < 3.0 / std::sqrt(double(opt.draws)));
    CHECK(sq / double(opt.draws) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("Monte Carlo risk matches the Gaussian CDF")
{
    const double sigma = 0.8;
    auto m = diagonal_model(1, 0.0, sigma);
    SimulationOptions opt;
    opt.draws = 10000;
    opt.horizon = 1;
    opt.seed = 42;
    for (double tau : {-1.0, -0.2, 0.0, 0.5, 1.3}) {
        const auto e = simulate(m, state({0.7}), 0, opt, "u");
        const auto r = risk_from_ensemble(e, {{"k0", tau}});
        CHECK(std::abs(r.risk[0] - phi(tau / sigma)) < 0.02);
    }
    // Native scale: thresholds are compared after denormalization.
    m.norm.mean = {10.0};
    m.norm.sd = {2.0};
    const auto e = simulate(m, state({11.0}), 0, opt, "u");
    const auto r = risk_from_ensemble(e, {{"k0", 10.0}});
    CHECK(std::abs(r.risk[0] - 0.5) < 0.02);
}

TEST_CASE("boundary and no-crossing cases")
{
    const auto m = diagonal_model(1, 1.0, 0.0);
    SimulationOptions opt;
    opt.noise = NoiseMode::none;
    opt.draws = 1;
    const auto e = simulate(m, state({2.0}), 0, opt, "u");
    CHECK(risk_from_ensemble(e, {{"k0", 2.0}}).risk[0] == 1.0); // closed boundary
    CHECK(risk_from_ensemble(e, {{"k0", 1.0}}).risk[0] == 0.0);
}

TEST_CASE("risk is monotone in threshold and horizon on a fixed ensemble")
{
    const auto m = diagonal_model(1, 0.6, 1.0);
    SimulationOptions opt;
    opt.draws = 2000;
    opt.horizon = 6;
    const auto e = simulate(m, state({1.0}), 0, opt, "u");
    double prev = -1;
    for (double tau = -2; tau <= 2; tau += 0.25) {
        const double r = risk_from_ensemble(e, {{"k0", tau}}).risk[0];
        CHECK(r >= prev);
        prev = r;
    }
    prev = -1;
    for (std::size_t h = 1; h <= 6; ++h) {
        const double r = risk_from_ensemble(e, {{"k0", 0.0}}, h).risk[0];
        CHECK(r >= prev);
        prev = r;
    }
    CHECK_THROWS_AS(risk_from_ensemble(e, {{"k0", 0.0}}, 7), InputError);
    CHECK_THROWS_AS(risk_from_ensemble(e, {}), InputError);
}

TEST_CASE("seeded streams: reproducible, independent across seeds")
{
    const auto m = diagonal_model(2, 0.5, 1.0);
    SimulationOptions opt;
    opt.draws = 4000;
    opt.seed = 1;
    const auto a = simulate(m, state({0.5, 0.5}), 3, opt, "u");
    const auto b = simulate(m, state({0.5, 0.5}), 3, opt, "u");
    CHECK(a.values == b.values);
    opt.seed = 2;
    const auto c = simulate(m, state({0.5, 0.5}), 3, opt, "u");
    CHECK(a.values != c.values);
    const std::vector<IndicatorSpec> specs{{"k0", 0.0}, {"k1", 0.0}};
    const double ra = risk_from_ensemble(a, specs).risk[0];
    const double rc = risk_from_ensemble(c, specs).risk[0];
    CHECK(std::abs(ra - rc) < 3 * std::sqrt(2 * ra * (1 - ra) / double(opt.draws)) + 1e-9);
}

TEST_CASE("covariance and bootstrap noise modes")
{
    auto m = diagonal_model(2, 0.0, 1.0);
    m.residual_covariance << 1.0, 0.9, 0.9, 1.0;
    SimulationOptions opt;
    opt.draws = 5000;
    opt.horizon = 1;
    opt.noise = NoiseMode::covariance;
    const auto e = simulate(m, state({0, 0}), 0, opt, "u");
    double cross = 0;
    for (std::size_t d = 0; d < opt.draws; ++d)
        cross += e.value(d, 1, 0) * e.value(d, 1, 1);
    CHECK(cross / double(opt.draws) == doctest::Approx(0.9).epsilon(0.08));

    opt.noise = NoiseMode::bootstrap;
    CHECK_THROWS_AS(simulate(m, state({0, 0}), 0, opt, "u"), InputError);
    m.residuals = {{1.0, -1.0}, {2.0, -2.0}};
    const auto b = simulate(m, state({0, 0}), 0, opt, "u");
    for (std::size_t d = 0; d < opt.draws; ++d)
        CHECK(b.value(d, 1, 0) == -b.value(d, 1, 1));
    CHECK(noise_mode_from_string("bootstrap") == NoiseMode::bootstrap);
    CHECK_THROWS_AS(noise_mode_from_string("pink"), InputError);
}

TEST_CASE("simulation preconditions")
{
    const auto m = diagonal_model(1, 0.5, 1.0);
    SimulationOptions opt;
    opt.horizon = 0;
    CHECK_THROWS_AS(simulate(m, state({0}), 0, opt), InputError);
    opt.horizon = 1;
    opt.draws = 0;
    CHECK_THROWS_AS(simulate(m, state({0}), 0, opt), InputError);
    opt.draws = 1;
    CHECK_THROWS_AS(simulate(m, state({std::numeric_limits<double>::quiet_NaN()}), 0, opt), InputError);
    CHECK_THROWS_AS(simulate(m, {}, 0, opt), InputError);
}

TEST_CASE("risk sweep: one row per eligible cell, parallel equals serial")
{
    const auto m = diagonal_model(2, 0.7, 0.5);
    const auto panel = testing::make_panel(3, 8, 2, [](std::size_t u, std::size_t t, std::size_t k) {
        return 1.0 + 0.1 * double(u) - 0.05 * double(t) + 0.2 * double(k);
    });
    const std::vector<IndicatorSpec> specs{{"k0", 0.5}, {"k1", 0.5}};
    RiskSweepOptions opt;
    opt.simulation.draws = 300;
    opt.simulation.horizon = 2;
    opt.origin_min = 3;
    const auto serial = risk_sweep(m, panel, specs, opt);
    opt.workers = 4;
    const auto parallel = risk_sweep(m, panel, specs, opt);
    REQUIRE(serial.size() == parallel.size());
    CHECK(serial.size() == 3 * 4 * 2); // origins at positions 2..5 (periods 3..6), 2 indicators
    for (std::size_t r = 0; r < serial.size(); ++r) {
        CHECK(serial[r].risk == parallel[r].risk);
        CHECK(serial[r].unit == parallel[r].unit);
        CHECK(serial[r].draws == 300);
    }

    const auto single = testing::make_panel(1, 3, 2, [](auto, auto, auto) { return 1.0; });
    opt.origin_min.reset();
    opt.simulation.horizon = 2;
    CHECK(risk_sweep(m, single, specs, opt).size() == 2); // one origin, two indicators
    opt.simulation.horizon = 5;
    CHECK_THROWS_WITH_AS(risk_sweep(m, single, specs, opt), doctest::Contains("no valid origin"), InputError);
}
