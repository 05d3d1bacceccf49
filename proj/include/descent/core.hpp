#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace descent {

using cplx = std::complex<double>;

// Bad input: out-of-range parameters, malformed files, inconsistent shapes.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed (non-convergence, singular system, branch jump).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double residual = std::numeric_limits<double>::quiet_NaN())
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// exp(z) - 1 without cancellation for small |z|.
inline cplx expm1(cplx z) {
    const double a = z.real(), b = z.imag();
    const double s = std::sin(0.5 * b);
    return {std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b)};
}

constexpr double pi = 3.14159265358979323846;

}  // namespace descent
