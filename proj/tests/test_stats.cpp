#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pedflow/stats.hpp"

using namespace pedflow;

namespace {

// Independent quadrature oracle for the regularized incomplete beta:
// composite Simpson over the density, normalized by the same rule applied to
// [0, 1]. No shared code with the continued-fraction implementation.
double simpson_beta(double a, double b, double x, int panels = 200000) {
    auto f = [&](double t) { return std::pow(t, a - 1.0) * std::pow(1.0 - t, b - 1.0); };
    auto integrate = [&](double hi) {
        const double h = hi / panels;
        double s = f(hi);  // f(0) vanishes whenever a > 1
        for (int i = 1; i < panels; ++i) {
            s += f(i * h) * (i % 2 ? 4.0 : 2.0);
        }
        return s * h / 3.0;
    };
    return integrate(x) / integrate(1.0);
}

}  // namespace

TEST_CASE("mean and variance") {
    CHECK(mean({2.0, 4.0, 6.0}) == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(sample_variance({2.0, 4.0, 6.0}) == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(sample_variance({5.0, 5.0, 5.0}) == 0.0);
    CHECK_THROWS_AS(mean({}), DomainError);
    CHECK_THROWS_AS(sample_variance({1.0}), DomainError);
}

TEST_CASE("incomplete beta matches closed forms for integer shapes") {
    // I_x(1,1) = x; I_x(2,1) = x^2; I_x(1,2) = 2x - x^2; I_x(2,2) = 3x^2 - 2x^3.
    for (double x : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        CHECK(regularized_incomplete_beta(1, 1, x) == Catch::Approx(x).epsilon(1e-12));
        CHECK(regularized_incomplete_beta(2, 1, x) ==
              Catch::Approx(x * x).epsilon(1e-12));
        CHECK(regularized_incomplete_beta(1, 2, x) ==
              Catch::Approx(2 * x - x * x).epsilon(1e-12));
        CHECK(regularized_incomplete_beta(2, 2, x) ==
              Catch::Approx(3 * x * x - 2 * x * x * x).epsilon(1e-12));
    }
    // Binomial-sum closed form: I_0.7(5,2) = 6*0.7^5*0.3 + 0.7^6.
    CHECK(regularized_incomplete_beta(5, 2, 0.7) ==
          Catch::Approx(0.420175).epsilon(1e-12));
}

TEST_CASE("incomplete beta matches a quadrature oracle at fractional shapes") {
    CHECK(regularized_incomplete_beta(2.5, 3.5, 0.3) ==
          Catch::Approx(simpson_beta(2.5, 3.5, 0.3)).margin(1e-7));
    CHECK(regularized_incomplete_beta(2.5, 3.5, 0.3) ==
          Catch::Approx(0.2967529892956664).margin(1e-9));
    CHECK(regularized_incomplete_beta(4.0, 2.0, 0.6) ==
          Catch::Approx(simpson_beta(4.0, 2.0, 0.6)).margin(1e-7));
}

TEST_CASE("incomplete beta edges and monotonicity") {
    CHECK(regularized_incomplete_beta(3, 4, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(3, 4, -0.5) == 0.0);
    CHECK(regularized_incomplete_beta(3, 4, 1.0) == 1.0);
    CHECK(regularized_incomplete_beta(3, 4, 1.5) == 1.0);
    CHECK_THROWS_AS(regularized_incomplete_beta(0.0, 1.0, 0.5), DomainError);
    CHECK_THROWS_AS(regularized_incomplete_beta(1.0, -1.0, 0.5), DomainError);
    double prev = 0.0;
    for (double x = 0.05; x < 1.0; x += 0.05) {
        const double cur = regularized_incomplete_beta(3.3, 2.2, x);
        CHECK(cur >= prev);
        prev = cur;
    }
    // Reflection: I_x(a,b) = 1 - I_{1-x}(b,a).
    CHECK(regularized_incomplete_beta(3.3, 2.2, 0.4) ==
          Catch::Approx(1.0 - regularized_incomplete_beta(2.2, 3.3, 0.6))
              .epsilon(1e-12));
}

TEST_CASE("two-tailed t probabilities") {
    CHECK(students_t_two_tailed(0.0, 10.0) == Catch::Approx(1.0).epsilon(1e-12));
    // The classic 5% two-tailed critical value at 8 degrees of freedom.
    CHECK(students_t_two_tailed(2.306, 8.0) ==
          Catch::Approx(0.050000322761284229).margin(1e-9));
    CHECK(students_t_two_tailed(-2.306, 8.0) ==
          students_t_two_tailed(2.306, 8.0));
    CHECK(students_t_two_tailed(1e12, 8.0) < 1e-12);
    CHECK_THROWS_AS(students_t_two_tailed(1.0, 0.0), DomainError);
}

TEST_CASE("mean comparison reproduces frozen fixtures") {
    SECTION("shifted integer ranks") {
        const std::vector<double> a = {1, 2, 3, 4, 5};
        const std::vector<double> b = {2, 3, 4, 5, 6};
        const TTestResult r = compare_means(a, b);
        CHECK(r.t == Catch::Approx(-1.0).epsilon(1e-12));
        CHECK(r.df == Catch::Approx(8.0).epsilon(1e-12));
        CHECK(r.p == Catch::Approx(0.34659350708733425).margin(1e-9));
    }
    SECTION("unequal sizes and variances") {
        const std::vector<double> a = {1.2, 1.4, 1.1, 1.5, 1.3, 1.6};
        const std::vector<double> b = {1.0, 1.1, 0.9, 1.2};
        const TTestResult r = compare_means(a, b);
        CHECK(r.t == Catch::Approx(3.0).epsilon(1e-9));
        CHECK(r.df == Catch::Approx(7.9411764705882355).epsilon(1e-9));
        CHECK(r.p == Catch::Approx(0.017216458986319818).margin(1e-9));
    }
    SECTION("identical samples give p = 1 when variance exists") {
        const std::vector<double> a = {1.0, 2.0, 3.0};
        const TTestResult r = compare_means(a, a);
        CHECK(r.t == 0.0);
        CHECK(r.p == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("degenerate inputs") {
        CHECK_THROWS_AS(compare_means({1.0}, {1.0, 2.0}), DomainError);
        CHECK_THROWS_AS(compare_means({1.0, 1.0}, {2.0, 2.0}), DomainError);
    }
}

TEST_CASE("trend estimation") {
    SECTION("an exact line pins the slope with certainty") {
        const std::vector<double> x = {1, 2, 3, 4};
        const std::vector<double> y = {2, 4, 6, 8};
        const TrendResult r = linear_trend(x, y);
        CHECK(r.slope == Catch::Approx(2.0).epsilon(1e-12));
        CHECK(r.p == 0.0);
    }
    SECTION("a flat series has no trend") {
        const TrendResult r = linear_trend({1, 2, 3, 4}, {5, 5, 5, 5});
        CHECK(r.slope == 0.0);
        CHECK(r.p == 1.0);
    }
    SECTION("noisy fixture") {
        const std::vector<double> x = {0.5, 1.0, 1.5, 2.0, 2.5};
        const std::vector<double> y = {0.30, 0.52, 0.74, 0.80, 1.05};
        const TrendResult r = linear_trend(x, y);
        CHECK(r.slope == Catch::Approx(0.356).epsilon(1e-9));
        CHECK(r.df == Catch::Approx(3.0).epsilon(1e-12));
        CHECK(r.p == Catch::Approx(0.0016647307761212362).margin(1e-9));
    }
    SECTION("degenerate inputs") {
        CHECK_THROWS_AS(linear_trend({1, 2}, {1, 2}), DomainError);
        CHECK_THROWS_AS(linear_trend({1, 2, 3}, {1, 2}), DomainError);
        CHECK_THROWS_AS(linear_trend({2, 2, 2}, {1, 2, 3}), DomainError);
    }
}
