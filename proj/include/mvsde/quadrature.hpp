#pragma once

#include <functional>
#include <vector>

namespace mvsde::quad {

using Integrand = std::function<double(double)>;

// Adaptive double-exponential rule on a finite interval. Tolerates integrable
// endpoint singularities, so callers split at interior kinks.
double integrate(const Integrand& f, double a, double b, double tol = 1e-12);

// Fixed 20-point Gauss-Legendre rule, for short panels with smooth integrands.
double gauss_legendre_20(const Integrand& f, double a, double b);

// Sum of integrate() over consecutive pieces of a sorted breakpoint list.
double integrate_pieces(const Integrand& f, const std::vector<double>& breaks, double tol = 1e-12);

// Fixed 32-point Gauss-Legendre rule on [a, b].
double gauss_legendre_32(const Integrand& f, double a, double b);

}  // namespace mvsde::quad
