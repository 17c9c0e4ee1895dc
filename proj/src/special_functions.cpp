#include "gafs/special_functions.hpp"

#include <cmath>
#include <limits>

#include "gafs/common.hpp"

namespace gafs::stats {
namespace {

constexpr int kMaxIterations = 10000;
constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;

double gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < kMaxIterations; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) {
            break;
        }
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x).
double gamma_continued_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) {
            break;
        }
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kMaxIterations; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) {
            break;
        }
    }
    return h;
}

}  // namespace

double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0 || std::isnan(x)) {
        throw ConfigError("gamma_p requires a > 0 and x >= 0");
    }
    if (x == 0.0) {
        return 0.0;
    }
    if (std::isinf(x)) {
        return 1.0;
    }
    if (x < a + 1.0) {
        return gamma_series(a, x);
    }
    return 1.0 - gamma_continued_fraction(a, x);
}

double beta_inc(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0 || !(x >= 0.0 && x <= 1.0)) {
        throw ConfigError("beta_inc requires a, b > 0 and x in [0, 1]");
    }
    if (x == 0.0 || x == 1.0) {
        return x;
    }
    const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                  a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double chi_square_cdf(double df, double x) {
    if (df <= 0.0) {
        throw ConfigError("chi-square degrees of freedom must be positive");
    }
    if (x <= 0.0) {
        return 0.0;
    }
    return gamma_p(0.5 * df, 0.5 * x);
}

double chi_square_quantile(double df, double p) {
    if (df < 1.0) {
        throw ConfigError("chi-square quantile requires df >= 1");
    }
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("chi-square quantile requires p in (0, 1)");
    }
    double lo = 0.0;
    double hi = df + 10.0;
    while (chi_square_cdf(df, hi) < p) {
        lo = hi;
        hi *= 2.0;
    }
    // Bisect until the bracket collapses to floating-point resolution.
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (chi_square_cdf(df, mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double f_survival(double d1, double d2, double f) {
    if (d1 <= 0.0 || d2 <= 0.0) {
        throw ConfigError("F distribution degrees of freedom must be positive");
    }
    if (std::isnan(f)) {
        throw NumericError("F statistic is NaN");
    }
    if (f <= 0.0) {
        return 1.0;
    }
    if (std::isinf(f)) {
        return 0.0;
    }
    return beta_inc(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

}  // namespace gafs::stats
