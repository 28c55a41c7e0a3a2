#pragma once

#include <cstddef>
#include <span>

namespace nfde {

// Controls series truncation for mittag_leffler.
struct ToleranceSpec {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    std::size_t max_terms = 300;
};

// Gamma function for z > 0 via the Lanczos approximation (g = 607/128,
// 15 coefficients). Relative error is below 1e-13 on (0, 4], the range the
// solver weights live in. Throws std::domain_error for z <= 0 or non-finite z.
double gamma(double z);

// Digamma psi(z) = d/dz ln Gamma(z) for z > 0, from the same Lanczos kernel.
// Used as the local derivative of the gamma tape op.
double digamma(double z);

// One-parameter Mittag-Leffler function E_alpha(z) = sum_k z^k / Gamma(alpha*k + 1)
// by direct series summation. Intended for alpha in (0, 1] and z in [-5, 0],
// where the alternating tail makes truncation at |term| < abs_tol safe.
// Throws NumericalError when max_terms is hit before the tail shrinks.
double mittag_leffler(double alpha, double z, const ToleranceSpec& tol = {});

// Piecewise-linear interpolation. times must be strictly ascending and t must
// lie within [times.front(), times.back()]; node hits return the stored value
// exactly. Throws std::invalid_argument on bad input.
double linear_interp(std::span<const double> times, std::span<const double> values, double t);

} // namespace nfde
