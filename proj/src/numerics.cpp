#include "nfde/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nfde/errors.hpp"

namespace nfde {

namespace {

// Lanczos approximation, g = 607/128, 15 terms (Godfrey's coefficient set).
// Gamma(z) = sqrt(2*pi) * t^(z-0.5) * e^{-t} * A(z), t = z + g - 0.5,
// A(z) = c0 + sum_{k=1..14} c_k / (z - 1 + k), valid for z >= 0.5.
constexpr double kLanczosG = 4.7421875; // 607/128
constexpr double kLanczos[15] = {
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
};
constexpr double kSqrtTwoPi = 2.5066282746310005024;

double lanczos_sum(double z) {
    double a = kLanczos[0];
    for (int k = 1; k < 15; ++k) a += kLanczos[k] / (z - 1.0 + k);
    return a;
}

// d/dz of lanczos_sum.
double lanczos_sum_prime(double z) {
    double a = 0.0;
    for (int k = 1; k < 15; ++k) {
        const double d = z - 1.0 + k;
        a -= kLanczos[k] / (d * d);
    }
    return a;
}

double gamma_core(double z) {
    // Requires z >= 0.5.
    const double t = z + kLanczosG - 0.5;
    return kSqrtTwoPi * std::pow(t, z - 0.5) * std::exp(-t) * lanczos_sum(z);
}

} // namespace

double gamma(double z) {
    if (!std::isfinite(z) || z <= 0.0)
        throw std::domain_error("gamma: argument must be finite and > 0, got " + std::to_string(z));
    if (z >= 0.5) return gamma_core(z);
    // Reflection for small arguments keeps the Lanczos kernel in its sweet spot.
    return M_PI / (std::sin(M_PI * z) * gamma_core(1.0 - z));
}

double digamma(double z) {
    if (!std::isfinite(z) || z <= 0.0)
        throw std::domain_error("digamma: argument must be finite and > 0, got " + std::to_string(z));
    if (z >= 0.5) {
        const double t = z + kLanczosG - 0.5;
        return std::log(t) + (z - 0.5) / t - 1.0 + lanczos_sum_prime(z) / lanczos_sum(z);
    }
    // psi(z) = psi(1-z) - pi / tan(pi z)
    return digamma(1.0 - z) - M_PI / std::tan(M_PI * z);
}

double mittag_leffler(double alpha, double z, const ToleranceSpec& tol) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::domain_error("mittag_leffler: alpha must be in (0, 1], got " + std::to_string(alpha));
    if (!std::isfinite(z))
        throw std::domain_error("mittag_leffler: z must be finite");

    double sum = 0.0;
    for (std::size_t k = 0; k < tol.max_terms; ++k) {
        const double term = std::pow(z, static_cast<double>(k)) / gamma(alpha * k + 1.0);
        sum += term;
        if (std::abs(term) < tol.abs_tol || std::abs(term) < tol.rel_tol * std::abs(sum))
            return sum;
    }
    throw NumericalError("mittag_leffler: series did not converge within " +
                         std::to_string(tol.max_terms) + " terms (alpha=" + std::to_string(alpha) +
                         ", z=" + std::to_string(z) + ")");
}

double linear_interp(std::span<const double> times, std::span<const double> values, double t) {
    if (times.size() != values.size() || times.size() < 2)
        throw std::invalid_argument("linear_interp: need matching times/values with at least 2 nodes");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("linear_interp: times must be strictly ascending");
    if (t < times.front() || t > times.back())
        throw std::invalid_argument("linear_interp: t=" + std::to_string(t) + " outside [" +
                                    std::to_string(times.front()) + ", " + std::to_string(times.back()) + "]");

    // upper_bound-style bracket; exact node hits short-circuit so stored values
    // come back untouched by rounding.
    std::size_t lo = 0, hi = times.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (times[mid] <= t) lo = mid; else hi = mid;
    }
    if (t == times[lo]) return values[lo];
    if (t == times[hi]) return values[hi];
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return values[lo] + (values[hi] - values[lo]) * w;
}

} // namespace nfde
