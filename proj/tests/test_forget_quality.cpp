#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ulbench/errors.hpp"
#include "ulbench/forget_quality.hpp"
#include "ulbench/rng.hpp"

using namespace ulbench;

namespace {

// Oracle 1: evaluate |F_a - F_b| on the merged sample points via the
// EmpiricalCDF lookups (independent of the merge-walk implementation).
double ks_grid_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    EmpiricalCDF fa(a), fb(b);
    std::vector<double> grid = a;
    grid.insert(grid.end(), b.begin(), b.end());
    double d = 0.0;
    for (double x : grid) d = std::max(d, std::abs(fa.at(x) - fb.at(x)));
    return d;
}

// Oracle 2: exact permutation null by brute-force enumeration of all
// interleavings (feasible for n + m <= 12).
double ks_p_enumeration(double d_obs, std::size_t n, std::size_t m) {
    const std::size_t total = n + m;
    std::vector<bool> mask(total, false);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n), true);
    std::sort(mask.begin(), mask.end());
    // iterate all permutations of the multiset via std::next_permutation
    std::size_t extreme = 0, count = 0;
    do {
        ++count;
        double i = 0, j = 0, d = 0;
        for (bool is_a : mask) {
            if (is_a)
                ++i;
            else
                ++j;
            d = std::max(d, std::abs(i / static_cast<double>(n) - j / static_cast<double>(m)));
        }
        if (d >= d_obs - 1e-12) ++extreme;
    } while (std::next_permutation(mask.begin(), mask.end()));
    return static_cast<double>(extreme) / static_cast<double>(count);
}

// Oracle 3: the full alternating Kolmogorov series; the closed-form
// asymptotic p-value is its leading term.
double kolmogorov_series(double d, std::size_t n, std::size_t m) {
    const double lambda =
        d * std::sqrt(static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m));
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
    }
    return std::min(1.0, std::max(0.0, sum));
}

}  // namespace

TEST_CASE("ks_statistic basics") {
    CHECK(ks_statistic({0.1, 0.2, 0.3}, {0.3, 0.1, 0.2}) == 0.0);
    CHECK(ks_statistic({0.0, 0.1, 0.2}, {0.8, 0.9, 1.0}) == 1.0);
    CHECK_THROWS_AS(ks_statistic({}, {1.0}), InvalidArgumentError);
    // ties across samples
    CHECK(ks_statistic({1.0, 1.0, 2.0}, {1.0, 2.0, 2.0}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ks_statistic equals the grid oracle on random small samples") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng.below(8), m = 1 + rng.below(8);
        std::vector<double> a, b;
        // small discrete support to exercise ties
        for (std::size_t i = 0; i < n; ++i) a.push_back(static_cast<double>(rng.below(5)) / 4.0);
        for (std::size_t i = 0; i < m; ++i) b.push_back(static_cast<double>(rng.below(5)) / 4.0);
        CHECK(ks_statistic(a, b) == doctest::Approx(ks_grid_oracle(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("ks_statistic is symmetric and invariant under monotone transforms") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a, b;
        for (int i = 0; i < 9; ++i) a.push_back(rng.uniform());
        for (int i = 0; i < 7; ++i) b.push_back(rng.uniform());
        double d = ks_statistic(a, b);
        CHECK(ks_statistic(b, a) == d);
        std::vector<double> ta = a, tb = b;
        for (double& x : ta) x = std::exp(3.0 * x) + 1.0;  // strictly increasing
        for (double& x : tb) x = std::exp(3.0 * x) + 1.0;
        CHECK(ks_statistic(ta, tb) == doctest::Approx(d).epsilon(1e-12));
        // shifting both samples by a constant changes nothing
        for (double& x : ta) x += 17.5;
        for (double& x : tb) x += 17.5;
        CHECK(ks_statistic(ta, tb) == doctest::Approx(d).epsilon(1e-12));
    }
}

TEST_CASE("asymptotic p-value follows the critical-value inversion") {
    CHECK(ks_p_value(0.0, 10, 10) == 1.0);
    CHECK(ks_p_value(1.0, 3, 3) == doctest::Approx(2.0 * std::exp(-3.0)).epsilon(1e-12));

    // independent route: bisect the smallest alpha whose critical value
    // c(alpha) * sqrt((n+m)/(n*m)) falls below D
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        double d = 0.05 + 0.9 * rng.uniform();
        std::size_t n = 2 + rng.below(60), m = 2 + rng.below(60);
        double lo = 1e-300, hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            double mid = std::sqrt(lo * hi);  // geometric bisection
            double c = std::sqrt(-std::log(mid / 2.0) / 2.0);
            double crit = c * std::sqrt(static_cast<double>(n + m) /
                                        (static_cast<double>(n) * static_cast<double>(m)));
            if (d > crit)
                hi = mid;
            else
                lo = mid;
        }
        double want = std::min(1.0, hi);
        CHECK(ks_p_value(d, n, m) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("exact mode matches brute-force enumeration for n+m <= 12") {
    Rng rng(7);
    for (std::size_t n = 1; n <= 6; ++n) {
        for (std::size_t m = n; m + n <= 12; ++m) {
            for (int trial = 0; trial < 4; ++trial) {
                std::vector<double> a, b;
                for (std::size_t i = 0; i < n; ++i) a.push_back(rng.uniform());
                for (std::size_t i = 0; i < m; ++i) b.push_back(rng.uniform());
                double d = ks_statistic(a, b);
                double exact = ks_p_value(d, n, m, KSMode::exact_small_sample);
                double oracle = ks_p_enumeration(d, n, m);
                CHECK(exact == doctest::Approx(oracle).epsilon(1e-9));
            }
        }
    }
    CHECK_THROWS_AS(ks_p_value(0.5, 15, 15, KSMode::exact_small_sample), InvalidArgumentError);
}

TEST_CASE("asymptotic mode approaches the full Kolmogorov series for large samples") {
    // where the series' tail terms are negligible the leading term is the
    // whole story; the implementation must agree to 1e-6
    for (double d : {0.15, 0.2, 0.3}) {
        std::size_t n = 400, m = 400;
        double lambda = d * std::sqrt(n * m / static_cast<double>(n + m));
        if (lambda < 1.7) continue;
        CHECK(ks_p_value(d, n, m) == doctest::Approx(kolmogorov_series(d, n, m)).epsilon(1e-6));
    }
}

TEST_CASE("p-value monotonicity") {
    // decreasing in D for fixed (n, m)
    double prev = 2.0;
    for (double d = 0.05; d <= 1.0; d += 0.05) {
        double p = ks_p_value(d, 30, 40);
        CHECK(p < prev);
        prev = p;
    }
    // decreasing in min(n, m) for fixed D > 0
    CHECK(ks_p_value(0.4, 10, 10) > ks_p_value(0.4, 20, 20));
    CHECK(ks_p_value(0.4, 20, 40) > ks_p_value(0.4, 40, 40));
}

TEST_CASE("forget_quality is the KS p-value over matched record sets") {
    std::vector<double> x = {0.3, 0.5, 0.9, 1.2};
    CHECK(forget_quality(x, x) == 1.0);
    std::vector<double> y = {0.3, 0.5, 0.9};
    CHECK_THROWS_AS(forget_quality(x, y), InvalidArgumentError);

    std::vector<double> far = {5.0, 6.0, 7.0, 8.0};
    CHECK(forget_quality(x, far) < forget_quality(x, x));
}

TEST_CASE("KSResult invariants") {
    std::vector<double> a = {0.1, 0.4, 0.4, 0.7};
    std::vector<double> b = {0.2, 0.4, 0.8, 0.9, 1.0};
    KSResult r = ks_test(a, b);
    CHECK(r.n == 4);
    CHECK(r.m == 5);
    CHECK(r.statistic >= 0.0);
    CHECK(r.statistic <= 1.0);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
    KSResult same = ks_test(a, a);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
}

TEST_CASE("EmpiricalCDF sorts its sample and evaluates fractions at or below x") {
    EmpiricalCDF cdf({0.5, 0.1, 0.9});
    CHECK(cdf.n() == 3);
    CHECK(cdf.sorted.front() == 0.1);
    CHECK(cdf.at(0.0) == 0.0);
    CHECK(cdf.at(0.1) == doctest::Approx(1.0 / 3));
    CHECK(cdf.at(0.5) == doctest::Approx(2.0 / 3));
    CHECK(cdf.at(2.0) == 1.0);
    CHECK_THROWS_AS(EmpiricalCDF({}), InvalidArgumentError);
}
