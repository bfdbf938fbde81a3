#include "doctest.h"
#include "helpers.hpp"

#include "dcnar/error.hpp"
#include "dcnar/panel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace dcnar;

namespace {

PanelDataset parse(const std::string& text)
{
    std::istringstream in(text);
    return load_panel(in);
}

// Sort-and-index oracle for the type-7 quantile.
double brute_quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const double lo = std::floor(pos);
    const double hi = std::ceil(pos);
    return v[static_cast<std::size_t>(lo)] + (pos - lo) * (v[static_cast<std::size_t>(hi)] - v[static_cast<std::size_t>(lo)]);
}

} // namespace

TEST_CASE("long-format loading builds a dense tensor with a mask")
{
    const auto p = parse("unit,period,indicator,value\n"
                         "A,2000,x,1.5\nA,2002,x,2.5\nB,2001,y,-1\nB,2000,x,0.25\n");
    CHECK(p.num_units() == 2);
    CHECK(p.num_indicators() == 2);
    CHECK(p.first_period() == 2000);
    CHECK(p.num_periods() == 3); // 2000..2002, 2001 missing for A
    const auto a = *p.unit_index("A");
    const auto x = *p.indicator_index("x");
    CHECK(p.observed(a, 0, x));
    CHECK_FALSE(p.observed(a, 1, x));
    CHECK(p.value(a, 2, x) == 2.5);
    CHECK(p.position(2001) == 1u);
    CHECK_FALSE(p.position(1999).has_value());
}

TEST_CASE("loader rejects malformed input with row numbers")
{
    CHECK_THROWS_AS(parse("a,b,c,d\n"), InputError);
    CHECK_THROWS_WITH_AS(parse("unit,period,indicator,value\nA,2000,x,1\nA,2000,x,2\n"),
                         doctest::Contains("row 3: duplicate record"), InputError);
    CHECK_THROWS_WITH_AS(parse("unit,period,indicator,value\nA,20x0,x,1\n"), doctest::Contains("row 2"), InputError);
    CHECK_THROWS_WITH_AS(parse("unit,period,indicator,value\nA,2000,x,abc\n"), doctest::Contains("not numeric"),
                         InputError);
    CHECK_THROWS_AS(parse("unit,period,indicator,value\nA,2000,x,nan\n"), InputError);
    CHECK_THROWS_AS(parse(""), InputError);
    CHECK_THROWS_WITH_AS(load_panel(std::filesystem::path("/nonexistent/panel.csv")),
                         doctest::Contains("/nonexistent/panel.csv"), InputError);
}

TEST_CASE("loader accepts a byte-order mark and CRLF line endings")
{
    const auto p = parse("\xEF\xBB\xBFunit,period,indicator,value\r\nA,1,x,1\r\nA,2,x,2\r\n");
    CHECK(p.num_periods() == 2);
    CHECK(p.value(0, 1, 0) == 2.0);
}

TEST_CASE("write then load round-trips exactly")
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    const auto p = testing::make_panel(3, 6, 2, [&](auto, auto, auto) { return n(rng); }, 1990);
    std::ostringstream out;
    write_panel(out, p);
    const auto q = parse(out.str());
    CHECK(q.values() == p.values());
    CHECK(q.units() == p.units());
    CHECK(q.first_period() == 1990);
}

TEST_CASE("type-7 quantile matches the sort-and-index oracle")
{
    const std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(empirical_quantile(ten, 0.2) == doctest::Approx(2.8).epsilon(1e-15));
    CHECK(empirical_quantile(ten, 0.0) == 1.0);
    CHECK(empirical_quantile(ten, 1.0) == 10.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng() % 40);
        for (auto& x : v)
            x = u(rng);
        const double q = u(rng) / 10 + 0.5;
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        CHECK(empirical_quantile(sorted, q) == doctest::Approx(brute_quantile(v, q)).epsilon(1e-14));
    }
}

TEST_CASE("thresholds come from training data only and labels use a closed boundary")
{
    // Values 1..10 over periods 1..10 for one unit, then very low values after.
    const auto p = testing::make_panel(1, 14, 1, [](auto, std::size_t t, auto) { return t < 10 ? t + 1.0 : -100.0; });
    const auto [train, test] = temporal_split(p, 10);
    CHECK(train.num_periods() == 10);
    CHECK(test.first_period() == 11);
    const auto specs = compute_thresholds(train, 0.2);
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].threshold == doctest::Approx(2.8));
    CHECK(specs[0].is_failure(2.8));
    CHECK_FALSE(specs[0].is_failure(2.8000001));

    const auto labels = label_failures(p, specs);
    CHECK(labels.failed(0, 0, 0));
    CHECK(labels.failed(0, 1, 0));
    CHECK_FALSE(labels.failed(0, 2, 0));
    CHECK(labels.failed(0, 12, 0));
}

TEST_CASE("split and threshold preconditions")
{
    const auto p = testing::make_panel(1, 10, 1, [](auto, std::size_t t, auto) { return double(t); });
    CHECK_THROWS_AS(temporal_split(p, 10), InputError); // nothing after the cutoff
    CHECK_THROWS_AS(temporal_split(p, 0), InputError);
    CHECK_THROWS_AS(compute_thresholds(p, 0.0), InputError);
    const auto small = testing::make_panel(1, 4, 1, [](auto, std::size_t t, auto) { return double(t); });
    CHECK_THROWS_WITH_AS(compute_thresholds(small, 0.2), doctest::Contains("at least 5"), InputError);
}

TEST_CASE("unmatched specs are rejected by name")
{
    const std::vector<std::string> names{"a", "b"};
    CHECK_THROWS_WITH_AS(align_specs(names, {{"a", 0.0}}), doctest::Contains("'b'"), InputError);
    CHECK_THROWS_WITH_AS(align_specs(names, {{"a", 0.0}, {"b", 0.0}, {"c", 0.0}}), doctest::Contains("'c'"),
                         InputError);
    const auto aligned = align_specs(names, {{"b", 2.0}, {"a", 1.0}});
    CHECK(aligned[0].name == "a");
    CHECK(aligned[1].threshold == 2.0);
}

TEST_CASE("normalization uses the sample standard deviation and inverts exactly")
{
    const auto p = testing::make_panel(2, 5, 2, [](std::size_t u, std::size_t t, std::size_t k) {
        return double(u * 5 + t) * (k + 1) + 0.5;
    });
    const auto stats = compute_norm_stats(p);
    // k0 values 0.5..9.5: mean 5, sample sd sqrt(110/12 * 12/ ... ) computed directly
    double m = 0, ss = 0;
    for (int v = 0; v < 10; ++v)
        m += v + 0.5;
    m /= 10;
    for (int v = 0; v < 10; ++v)
        ss += (v + 0.5 - m) * (v + 0.5 - m);
    CHECK(stats.mean[0] == doctest::Approx(m));
    CHECK(stats.sd[0] == doctest::Approx(std::sqrt(ss / 9)));
    const auto z = normalize(p, stats);
    const auto back = denormalize(z, stats);
    for (std::size_t c = 0; c < p.values().size(); ++c)
        CHECK(back.values()[c] == doctest::Approx(p.values()[c]).epsilon(1e-14));

    const auto flat = testing::make_panel(1, 5, 1, [](auto, auto, auto) { return 3.0; });
    CHECK_THROWS_WITH_AS(compute_norm_stats(flat), doctest::Contains("zero variance"), InputError);
}

TEST_CASE("history checks respect the mask")
{
    const auto p = parse("unit,period,indicator,value\n"
                         "A,1,x,1\nA,2,x,2\nA,4,x,4\nA,5,x,5\n");
    CHECK(p.history_observed(0, 1, 2));
    CHECK_FALSE(p.history_observed(0, 3, 2)); // period 3 missing
    CHECK(p.history_observed(0, 4, 2));
    CHECK_FALSE(p.history_observed(0, 0, 2)); // not enough periods
}
