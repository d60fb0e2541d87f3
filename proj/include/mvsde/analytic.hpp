#pragma once

#include <span>
#include <string>
#include <vector>

namespace mvsde {

enum class FamilyTag { Heat, PorousMedium, PLaplace };

struct PdeFamily {
    FamilyTag tag = FamilyTag::Heat;
    double param = 0.0;  // m for PorousMedium, p for PLaplace
    int dim = 1;

    static PdeFamily heat(int d = 1);
    static PdeFamily porous_medium(double m, int d = 1);
    static PdeFamily p_laplace(double p, int d = 1);

    double m() const;
    double p() const;
    void validate() const;
    std::string name() const;
};

// u^z(t, x) = t^{-k} g(t^{-k/d} |x - z|). For the heat kernel k = d/2,
// g(xi) = C exp(-q xi^2) with C = (2 pi)^{-d/2} and q = 1/2.
struct SelfSimilarSolution {
    PdeFamily family;
    double k = 0.0;
    double q = 0.0;
    double C = 0.0;
    double alpha = 0.0;  // a(t, x) = t^{-alpha} h(xi) scaling of the pure-diffusion coefficient
    std::vector<double> z;

    int dim() const { return family.dim; }
    double center() const { return z.at(0); }
    bool compact() const { return family.tag != FamilyTag::Heat; }
    double k_over_d() const { return k / family.dim; }
    // Support radius of g, i.e. R(1). Infinite for the heat kernel.
    double profile_radius() const;

    double profile(double xi) const;
    double log_profile(double xi) const;
    double profile_derivative(double xi) const;

    double radial_density(double t, double r) const;
    // d/dr of u^z(t, .) along the ray, 0 outside the support.
    double radial_gradient(double t, double r) const;
};

SelfSimilarSolution build_solution(const PdeFamily& family, std::vector<double> z);
SelfSimilarSolution build_solution(const PdeFamily& family, double z = 0.0);

// Normalization integral of the profile for a trial constant C (t = 1).
double profile_mass(const PdeFamily& family, double C);

double density(const SelfSimilarSolution& sol, double t, std::span<const double> x);
double density(const SelfSimilarSolution& sol, double t, double x);

double support_radius(const SelfSimilarSolution& sol, double t);

std::vector<double> grad_density(const SelfSimilarSolution& sol, double t, std::span<const double> x);
double grad_density(const SelfSimilarSolution& sol, double t, double x);

std::vector<double> grad_density_power(const SelfSimilarSolution& sol, double t, std::span<const double> x,
                                       double exponent);
double grad_density_power(const SelfSimilarSolution& sol, double t, double x, double exponent);

// d = 1 only.
double cdf(const SelfSimilarSolution& sol, double t, double x);
double inverse_cdf(const SelfSimilarSolution& sol, double t, double u);

// Marginal family s + (.) of a solution, viewed as started at time s.
struct RebasedSolution {
    const SelfSimilarSolution* sol;
    double s;
    double density(double t, double x) const;
    double cdf(double t, double x) const;
};

RebasedSolution rebase(const SelfSimilarSolution& sol, double s);

}  // namespace mvsde
