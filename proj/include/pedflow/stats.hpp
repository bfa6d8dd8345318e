#ifndef PEDFLOW_STATS_HPP
#define PEDFLOW_STATS_HPP

#include <cmath>
#include <vector>

#include "pedflow/core.hpp"

namespace pedflow {

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw DomainError("mean of an empty sample");
    double total = 0.0;
    for (double x : xs) total += x;
    return total / static_cast<double>(xs.size());
}

// Unbiased (n-1) sample variance.
inline double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw DomainError("variance needs at least two values");
    const double m = mean(xs);
    double total = 0.0;
    for (double x : xs) total += (x - m) * (x - m);
    return total / static_cast<double>(xs.size() - 1);
}

namespace detail {

// Continued-fraction kernel of the regularized incomplete beta (Lentz's
// algorithm with underflow guards).
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 400;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// I_x(a, b), the regularized incomplete beta function.
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw DomainError("beta parameters must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_cf(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Two-tailed survival probability of Student's t at |t| with df degrees of
// freedom: P(|T| >= |t|).
inline double students_t_two_tailed(double t, double df) {
    if (df <= 0.0) throw DomainError("degrees of freedom must be > 0");
    if (!std::isfinite(t)) return 0.0;
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Welch's unequal-variance t-test with a two-tailed p-value.
inline TTestResult compare_means(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) {
        throw DomainError("t-test needs at least two values per sample");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a);
    const double vb = sample_variance(b);
    if (va <= 0.0 && vb <= 0.0) {
        throw DomainError("t-test needs non-zero variance in at least one sample");
    }
    const double se2 = va / na + vb / nb;
    TTestResult res;
    res.t = (mean(a) - mean(b)) / std::sqrt(se2);
    res.df = se2 * se2 /
             (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    res.p = students_t_two_tailed(res.t, res.df);
    return res;
}

// Ordinary least-squares slope of y against x, with the Welch-style t and
// two-tailed p for the null hypothesis slope = 0.
struct TrendResult {
    double slope = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

inline TrendResult linear_trend(const std::vector<double>& x,
                                const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw DomainError("trend needs >= 3 paired values");
    }
    const double n = static_cast<double>(x.size());
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw DomainError("trend needs varying x");
    TrendResult res;
    res.slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double fit = my + res.slope * (x[i] - mx);
        ss_res += (y[i] - fit) * (y[i] - fit);
    }
    res.df = n - 2.0;
    const double se = std::sqrt(ss_res / res.df / sxx);
    if (se <= 0.0) {
        res.t = res.slope == 0.0 ? 0.0 : std::copysign(1e308, res.slope);
        res.p = res.slope == 0.0 ? 1.0 : 0.0;
        return res;
    }
    res.t = res.slope / se;
    res.p = students_t_two_tailed(res.t, res.df);
    return res;
}

}  // namespace pedflow

#endif
