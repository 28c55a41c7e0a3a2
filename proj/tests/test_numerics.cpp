#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "nfde/errors.hpp"
#include "nfde/numerics.hpp"

namespace {

// Adaptive Simpson quadrature, used as an independent oracle for gamma().
double simpson(const std::function<double(double)>& f, double a, double b) {
    const double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

double adaptive(const std::function<double(double)>& f, double a, double b, double whole,
                double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, a, m), right = simpson(f, m, b);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, m, left, tol / 2, depth - 1) +
           adaptive(f, m, b, right, tol / 2, depth - 1);
}

double quad(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
    return adaptive(f, a, b, simpson(f, a, b), tol, 50);
}

double gamma_by_quadrature(double z) {
    // Integrand decays like e^{-t}; [0, 60] truncation error is below 1e-20.
    return quad([z](double t) { return t <= 0.0 ? 0.0 : std::pow(t, z - 1.0) * std::exp(-t); },
                0.0, 60.0);
}

} // namespace

TEST_CASE("gamma matches quadrature and frozen values") {
    const double q18 = gamma_by_quadrature(1.8);
    CHECK(q18 == doctest::Approx(0.9313837709802427).epsilon(1e-10));
    CHECK(nfde::gamma(1.8) == doctest::Approx(q18).epsilon(1e-11));
    CHECK(nfde::gamma(1.8) == doctest::Approx(0.9313837709802427).epsilon(1e-13));

    CHECK(nfde::gamma(2.4) == doctest::Approx(gamma_by_quadrature(2.4)).epsilon(1e-11));

    CHECK(nfde::gamma(0.5) == doctest::Approx(std::sqrt(std::acos(-1.0))).epsilon(1e-14));
    CHECK(nfde::gamma(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nfde::gamma(2.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nfde::gamma(5.0) == doctest::Approx(24.0).epsilon(1e-14));
    CHECK(nfde::gamma(10.0) == doctest::Approx(362880.0).epsilon(1e-14));
}

TEST_CASE("gamma agrees with the standard library implementation") {
    for (double z = 0.05; z < 12.0; z += 0.173)
        CHECK(nfde::gamma(z) == doctest::Approx(std::tgamma(z)).epsilon(1e-12));
}

TEST_CASE("gamma recurrence and domain") {
    for (double z = 0.1; z < 5.0; z += 0.2)
        CHECK(nfde::gamma(z + 1.0) == doctest::Approx(z * nfde::gamma(z)).epsilon(1e-13));

    CHECK_THROWS_AS(nfde::gamma(0.0), std::domain_error);
    CHECK_THROWS_AS(nfde::gamma(-0.5), std::domain_error);
    CHECK_THROWS_AS(nfde::gamma(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
}

TEST_CASE("digamma matches finite differences of log gamma") {
    for (double z = 0.2; z < 8.0; z += 0.37) {
        const double h = 1e-6;
        const double fd =
            (std::log(nfde::gamma(z + h)) - std::log(nfde::gamma(z - h))) / (2.0 * h);
        CHECK(nfde::digamma(z) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("digamma frozen values and recurrence") {
    // psi(1) = -euler_gamma, psi(0.5) = -euler_gamma - 2 ln 2, psi(2) = 1 - euler_gamma.
    CHECK(nfde::digamma(1.0) == doctest::Approx(-0.57721566490153286).epsilon(1e-13));
    CHECK(nfde::digamma(0.5) == doctest::Approx(-1.9635100260214235).epsilon(1e-13));
    CHECK(nfde::digamma(2.0) == doctest::Approx(0.42278433509846714).epsilon(1e-13));
    for (double z = 0.3; z < 6.0; z += 0.41)
        CHECK(nfde::digamma(z + 1.0) == doctest::Approx(nfde::digamma(z) + 1.0 / z).epsilon(1e-12));
}

TEST_CASE("mittag_leffler reduces to exp at alpha = 1") {
    for (double z = -5.0; z <= 0.0; z += 0.25)
        CHECK(nfde::mittag_leffler(1.0, z) == doctest::Approx(std::exp(z)).epsilon(1e-12));
}

TEST_CASE("mittag_leffler half order closed form") {
    // E_{1/2}(-x) = e^{x^2} erfc(x); the erfc route is an independent oracle.
    const double oracle = std::exp(1.0) * std::erfc(1.0);
    CHECK(oracle == doctest::Approx(0.42758357615580705).epsilon(1e-13));
    CHECK(nfde::mittag_leffler(0.5, -1.0) == doctest::Approx(oracle).epsilon(1e-11));

    const double oracle4 = std::exp(4.0) * std::erfc(2.0);
    CHECK(nfde::mittag_leffler(0.5, -2.0) == doctest::Approx(oracle4).epsilon(1e-10));
}

TEST_CASE("mittag_leffler basics") {
    CHECK(nfde::mittag_leffler(0.6, 0.0) == 1.0);
    // E_alpha(-t^alpha) decays monotonically from 1 for alpha in (0,1].
    double prev = 1.0;
    for (double t = 0.25; t <= 4.0; t += 0.25) {
        const double v = nfde::mittag_leffler(0.7, -std::pow(t, 0.7));
        CHECK(v < prev);
        CHECK(v > 0.0);
        prev = v;
    }
}

TEST_CASE("mittag_leffler reports truncation failure") {
    nfde::ToleranceSpec tol;
    tol.max_terms = 3;
    CHECK_THROWS_AS(nfde::mittag_leffler(0.5, -3.0, tol), nfde::NumericalError);
}

TEST_CASE("linear_interp node hits and interior points") {
    const std::vector<double> t = {0.0, 1.0, 3.0};
    const std::vector<double> v = {1.0, 5.0, 9.0};
    CHECK(nfde::linear_interp(t, v, 0.0) == 1.0);
    CHECK(nfde::linear_interp(t, v, 1.0) == 5.0);
    CHECK(nfde::linear_interp(t, v, 3.0) == 9.0);
    CHECK(nfde::linear_interp(t, v, 0.5) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(nfde::linear_interp(t, v, 2.0) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("linear_interp rejects bad input") {
    const std::vector<double> t = {0.0, 1.0, 3.0};
    const std::vector<double> v = {1.0, 5.0, 9.0};
    CHECK_THROWS_AS(nfde::linear_interp(t, v, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(nfde::linear_interp(t, v, 3.1), std::invalid_argument);
    const std::vector<double> bad_t = {0.0, 2.0, 1.0};
    CHECK_THROWS_AS(nfde::linear_interp(bad_t, v, 0.5), std::invalid_argument);
    const std::vector<double> short_v = {1.0, 5.0};
    CHECK_THROWS_AS(nfde::linear_interp(t, short_v, 0.5), std::invalid_argument);
}
