#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/analytic.hpp"
#include "mvsde/coeffs.hpp"
#include "mvsde/sim.hpp"

namespace mvsde {

struct VerificationReport {
    std::string name;
    double observed = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::map<std::string, double> metadata;
};

// Asymptotic Kolmogorov distribution of sqrt(n) D_n.
double kolmogorov_cdf(double lambda);
double kolmogorov_survival(double lambda);
double kolmogorov_quantile(double p);

constexpr std::size_t kMinKsSamples = 500;

// Two-sided KS test against a continuous CDF. observed = D_n, target = 0,
// tolerance = the critical value at the significance level, so that
// pass <=> p-value >= significance.
VerificationReport ks_test(std::span<const double> samples, const std::function<double(double)>& cdf,
                           double significance = 0.01);
VerificationReport ks_test(std::span<const double> samples, const SelfSimilarSolution& sol, double t,
                           double significance = 0.01);

double realized_qv(std::span<const double> path, std::span<const double> times);

// E[(X_s - z)(X_t - z)] = t^{(1-beta)/2} s^{(1+beta)/2}, s <= t.
double heat_beta_covariance(double beta, double s, double t);

// One report per pair; pass when the empirical covariance is within
// `n_se` Monte-Carlo standard errors of the formula.
std::vector<VerificationReport> covariance_check(const PathEnsemble& ens, double beta,
                                                 const std::vector<std::pair<double, double>>& pairs,
                                                 double n_se = 3.0);

// phi(x) = base(x) chi(|x - c|), where chi is a C^2 cutoff equal to 1 on
// [0, plateau], decreasing on [plateau, plateau + taper] and 0 beyond.
class TestFunction {
public:
    enum class Base { GaussianBump, Linear, Constant };

    static TestFunction gaussian_bump(double center, double width);
    // x - center on the plateau, smoothly truncated.
    static TestFunction truncated_linear(double center, double plateau, double taper);
    static TestFunction truncated_constant(double center, double plateau, double taper);

    double value(double x) const;
    double d1(double x) const;
    double d2(double x) const;
    double center() const { return c_; }
    double support_lo() const { return c_ - plateau_ - taper_; }
    double support_hi() const { return c_ + plateau_ + taper_; }
    // Points where the cutoff switches pieces.
    std::vector<double> breakpoints() const;
    std::string describe() const;

private:
    TestFunction(Base base, double c, double w, double plateau, double taper)
        : base_(base), c_(c), w_(w), plateau_(plateau), taper_(taper) {}
    void base_derivs(double x, double& f, double& f1, double& f2) const;
    void cutoff_derivs(double x, double& g, double& g1, double& g2) const;

    Base base_;
    double c_;
    double w_;
    double plateau_;
    double taper_;
};

// Five Gaussian bumps at and around z, scaled to the spread of u^z(t, .).
std::vector<TestFunction> standard_test_functions(const SelfSimilarSolution& sol, double t);

// Integral of f against u^z(t, .) over [lo, hi], split at z and the support edges.
double expectation(const SelfSimilarSolution& sol, double t, const std::function<double(double)>& f, double lo,
                   double hi, double tol = 1e-10);
double expectation(const SelfSimilarSolution& sol, double t, const std::function<double(double)>& f,
                   double tol = 1e-10);

// |int phi du_t - int phi du_s - int_s^t int (a phi'' + b phi') du_r dr|.
double fpe_weak_residual(const CoefficientField& field, const TestFunction& phi, double s, double t,
                         double tol = 1e-6);

// 2 int_{t0}^{t1} int a u dx dt, the expected quadratic variation of the SDE path.
double expected_qv(const CoefficientField& field, double t0, double t1, double tol = 1e-8);

// Runs euler_maruyama_from_marginal over [s, s + t] with cfg.T = t and
// KS-compares the end positions against u^z(s + t, .).
VerificationReport flow_property_check(const CoefficientField& field, double s, double t, SimConfig cfg,
                                       double significance = 0.01);

// Raw moments E[X^k] within n_se standard errors of the quadrature value.
std::vector<VerificationReport> moment_check(std::span<const double> samples, const SelfSimilarSolution& sol,
                                             double t, const std::vector<int>& orders, double n_se = 3.0);

}  // namespace mvsde
