#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "gafs/special_functions.hpp"

using namespace gafs::stats;

TEST_SUITE("special_functions") {

TEST_CASE("incomplete gamma and beta agree with boost") {
    for (double a : {0.5, 1.0, 2.5, 10.0, 60.0}) {
        for (double x : {0.01, 0.5, 1.0, 3.0, 12.0, 80.0}) {
            CHECK(gamma_p(a, x) == doctest::Approx(boost::math::gamma_p(a, x)).epsilon(1e-10));
        }
    }
    for (double a : {0.5, 1.0, 3.0, 40.0}) {
        for (double b : {0.5, 2.0, 700.0}) {
            for (double x : {0.001, 0.2, 0.5, 0.9, 0.999}) {
                CHECK(beta_inc(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("chi-square quantiles") {
    CHECK(std::abs(chi_square_quantile(2, 0.975) - 7.378) < 1e-3);
    CHECK(std::abs(chi_square_quantile(1, 0.5) - 0.4549) < 1e-3);
    CHECK(std::abs(chi_square_quantile(2, 0.95) - 5.991) < 1e-3);
    CHECK(chi_square_quantile(3, 1e-12) < 1e-3);
    for (double df : {1.0, 2.0, 5.0, 50.0, 474.0}) {
        for (double p : {0.01, 0.5, 0.9, 0.975, 0.999}) {
            const double oracle = boost::math::quantile(boost::math::chi_squared(df), p);
            CHECK(std::abs(chi_square_quantile(df, p) - oracle) < 1e-3 * std::max(1.0, oracle));
        }
    }
}

TEST_CASE("F survival agrees with boost") {
    for (double d1 : {1.0, 3.0}) {
        for (double d2 : {2.0, 10.0, 1000.0}) {
            for (double f : {0.1, 1.0, 8.0, 40.0}) {
                const double oracle = boost::math::cdf(complement(boost::math::fisher_f(d1, d2), f));
                CHECK(f_survival(d1, d2, f) == doctest::Approx(oracle).epsilon(1e-9));
            }
        }
    }
    CHECK(f_survival(1, 2, 0.0) == 1.0);
}

}
