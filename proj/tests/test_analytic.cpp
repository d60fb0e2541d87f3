#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "mvsde/analytic.hpp"

using namespace mvsde;

namespace {

// Independent route to the normalization constants: Beta-function identities.
double pme_c_1d(double m) {
    const double gamma = 1.0 / (m - 1.0);
    const double k = 1.0 / (m + 1.0);
    const double q = k * (m - 1.0) / (2.0 * m);
    // mass = sqrt(C/q) C^gamma B(1/2, gamma+1) = 1
    const double B = boost::math::beta(0.5, gamma + 1.0);
    return std::pow(std::sqrt(q) / B, 1.0 / (gamma + 0.5));
}

double plap_c_1d(double p) {
    const double k = 1.0 / (2.0 * p - 2.0);
    const double q = ((p - 2.0) / p) * std::pow(k, 1.0 / (p - 1.0));
    const double a = (p - 1.0) / p;
    const double e = (p - 1.0) / (p - 2.0);
    // mass = 2 (C/q)^a C^e a B(a, e+1) = 1
    const double B = 2.0 * a * boost::math::beta(a, e + 1.0);
    return std::pow(std::pow(q, a) / B, 1.0 / (a + e));
}

double gk_integrate(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13);
}

std::vector<SelfSimilarSolution> shipped_solutions() {
    return {build_solution(PdeFamily::heat(), 0.0), build_solution(PdeFamily::porous_medium(3.0), 0.0),
            build_solution(PdeFamily::porous_medium(2.0), 0.3), build_solution(PdeFamily::porous_medium(1.5), 0.0),
            build_solution(PdeFamily::p_laplace(4.0), 0.0), build_solution(PdeFamily::p_laplace(3.0), -0.5)};
}

}  // namespace

TEST(Analytic, PmeExponents) {
    auto sol = build_solution(PdeFamily::porous_medium(3.0), 0.0);
    EXPECT_DOUBLE_EQ(sol.k, 0.25);
    EXPECT_DOUBLE_EQ(sol.q, 1.0 / 12.0);
    EXPECT_DOUBLE_EQ(sol.alpha, 0.5);
}

TEST(Analytic, PLaplaceExponents) {
    auto sol = build_solution(PdeFamily::p_laplace(4.0), 0.0);
    EXPECT_DOUBLE_EQ(sol.k, 1.0 / 6.0);
    EXPECT_NEAR(sol.q, 0.5 * std::cbrt(1.0 / 6.0), 1e-15);
    EXPECT_NEAR(sol.q, 0.275160, 1e-6);
    EXPECT_NEAR(sol.alpha, 2.0 / 3.0, 1e-15);
}

TEST(Analytic, NormalizationConstantsMatchClosedForms) {
    auto pme3 = build_solution(PdeFamily::porous_medium(3.0), 0.0);
    auto pme2 = build_solution(PdeFamily::porous_medium(2.0), 0.0);
    auto pl4 = build_solution(PdeFamily::p_laplace(4.0), 0.0);
    EXPECT_NEAR(pme3.C, 1.0 / (std::numbers::pi * std::sqrt(3.0)), 1e-12);
    EXPECT_NEAR(pme3.C, 0.18378, 1e-5);
    EXPECT_NEAR(pme2.C, std::pow(std::sqrt(3.0) / 8.0, 2.0 / 3.0), 1e-12);
    EXPECT_NEAR(pme2.C, 0.360562, 1e-6);
    EXPECT_NEAR(pl4.C, plap_c_1d(4.0), 1e-12);
    EXPECT_NEAR(pl4.C, 0.6628, 1e-4);
    EXPECT_NEAR(pme_c_1d(3.0), pme3.C, 1e-12);
    EXPECT_NEAR(build_solution(PdeFamily::porous_medium(1.5)).C, pme_c_1d(1.5), 1e-12);
    EXPECT_NEAR(build_solution(PdeFamily::p_laplace(3.0)).C, plap_c_1d(3.0), 1e-12);
}

TEST(Analytic, DensityValues) {
    auto heat = build_solution(PdeFamily::heat(), 0.0);
    EXPECT_NEAR(density(heat, 1.0, 0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
    EXPECT_NEAR(density(heat, 0.5, 1.0), std::exp(-1.0) / std::sqrt(std::numbers::pi), 1e-15);
    EXPECT_NEAR(density(heat, 0.5, 1.0), 0.20755, 1e-5);
    auto pme = build_solution(PdeFamily::porous_medium(3.0), 0.0);
    EXPECT_EQ(density(pme, 1.0, 2.0), 0.0);
    EXPECT_NEAR(density(pme, 1.0, 0.0), std::sqrt(pme.C), 1e-15);
    EXPECT_NEAR(density(pme, 1.0, 0.0), 0.42870, 1e-5);
}

TEST(Analytic, DensityRejectsNonPositiveTime) {
    auto heat = build_solution(PdeFamily::heat(), 0.0);
    EXPECT_THROW(density(heat, 0.0, 0.0), std::domain_error);
    EXPECT_THROW(density(heat, -1.0, 0.0), std::domain_error);
    EXPECT_THROW(grad_density(heat, 0.0, 0.0), std::domain_error);
}

TEST(Analytic, InvalidFamilies) {
    EXPECT_THROW(PdeFamily::porous_medium(1.0), std::invalid_argument);
    EXPECT_THROW(PdeFamily::porous_medium(0.5), std::invalid_argument);
    EXPECT_THROW(PdeFamily::p_laplace(2.0), std::invalid_argument);
    EXPECT_THROW(PdeFamily::heat(0), std::invalid_argument);
}

TEST(Analytic, SupportRadius) {
    auto pme = build_solution(PdeFamily::porous_medium(3.0), 0.0);
    EXPECT_NEAR(support_radius(pme, 1.0), std::sqrt(12.0 * pme.C), 1e-14);
    EXPECT_NEAR(support_radius(pme, 1.0), 1.485030, 1e-6);
    EXPECT_NEAR(support_radius(pme, 16.0), 2.0 * support_radius(pme, 1.0), 1e-14);
    EXPECT_NEAR(support_radius(pme, 16.0), 2.9701, 1e-4);
    auto pl = build_solution(PdeFamily::p_laplace(4.0), 0.0);
    EXPECT_NEAR(support_radius(pl, 1.0), std::pow(pl.C / pl.q, 0.75), 1e-14);
    EXPECT_NEAR(support_radius(pl, 1.0), 1.9335, 1e-4);
    EXPECT_THROW(support_radius(build_solution(PdeFamily::heat()), 1.0), std::invalid_argument);
}

TEST(Analytic, SupportScaling) {
    for (const auto& sol : shipped_solutions()) {
        if (!sol.compact()) continue;
        for (double t : {0.01, 0.3, 2.0, 50.0}) {
            EXPECT_NEAR(support_radius(sol, t), support_radius(sol, 1.0) * std::pow(t, sol.k_over_d()),
                        1e-15 * support_radius(sol, t));
        }
    }
}

TEST(Analytic, Gradients) {
    auto heat = build_solution(PdeFamily::heat(), 0.0);
    EXPECT_NEAR(grad_density(heat, 1.0, 1.0), -density(heat, 1.0, 1.0), 1e-16);
    EXPECT_NEAR(grad_density(heat, 1.0, 1.0), -0.24197, 1e-5);
    auto pme = build_solution(PdeFamily::porous_medium(3.0), 0.0);
    EXPECT_NEAR(grad_density_power(pme, 1.0, 0.4, 3.0) / density(pme, 1.0, 0.4), -0.1, 1e-14);
    EXPECT_EQ(grad_density(pme, 1.0, 1.6), 0.0);
    EXPECT_EQ(grad_density_power(pme, 1.0, -1.6, 3.0), 0.0);
    EXPECT_EQ(grad_density(pme, 1.0, 0.0), 0.0);
}

TEST(Analytic, PmeGradientOfPowerIdentity) {
    std::mt19937_64 gen(7);
    for (double m : {1.5, 2.0, 3.0}) {
        auto sol = build_solution(PdeFamily::porous_medium(m), 0.2);
        std::uniform_real_distribution<double> T(0.05, 5.0);
        for (int i = 0; i < 200; ++i) {
            const double t = T(gen);
            const double R = support_radius(sol, t);
            const double x = 0.2 + std::uniform_real_distribution<double>(-0.99 * R, 0.99 * R)(gen);
            const double lhs = grad_density_power(sol, t, x, m);
            const double rhs = -sol.k_over_d() * density(sol, t, x) * (x - 0.2) / t;
            EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
        }
    }
}

TEST(Analytic, GradientMatchesCentralDifferencesAtSecondOrder) {
    for (const auto& sol : shipped_solutions()) {
        const double t = 0.7;
        const double z = sol.center();
        const double R = sol.compact() ? support_radius(sol, t) : 3.0;
        for (double frac : {0.25, 0.5, 0.7}) {
            const double x = z + frac * R;
            auto fd = [&](double h) { return (density(sol, t, x + h) - density(sol, t, x - h)) / (2.0 * h); };
            const double g = grad_density(sol, t, x);
            const double e1 = std::abs(fd(1e-2) - g);
            const double e2 = std::abs(fd(5e-3) - g);
            if (e1 < 1e-11) continue;  // quadratic profile: differences are exact
            const double order = std::log2(e1 / e2);
            EXPECT_GT(order, 1.7) << sol.family.name() << " x=" << x;
            EXPECT_LT(order, 2.3) << sol.family.name() << " x=" << x;
        }
    }
}

TEST(Analytic, MassConservation) {
    for (const auto& sol : shipped_solutions()) {
        for (double t : {0.1, 1.0, 10.0}) {
            const double z = sol.center();
            auto f = [&](double x) { return density(sol, t, x); };
            double mass = 0.0;
            if (sol.compact()) {
                const double R = support_radius(sol, t);
                mass = gk_integrate(f, z - R, z) + gk_integrate(f, z, z + R);
            } else {
                const double s = std::sqrt(t);
                mass = gk_integrate(f, z - 40 * s, z) + gk_integrate(f, z, z + 40 * s);
            }
            EXPECT_NEAR(mass, 1.0, 1e-8) << sol.family.name() << " t=" << t;
        }
    }
}

TEST(Analytic, MassConservationHigherDimensions) {
    for (int d : {2, 3}) {
        for (auto fam : {PdeFamily::porous_medium(2.0, d), PdeFamily::p_laplace(4.0, d), PdeFamily::heat(d)}) {
            auto sol = build_solution(fam, 0.0);
            const double area = d == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
            for (double t : {0.1, 1.0, 10.0}) {
                std::vector<double> x(d, 0.0);
                auto f = [&](double r) {
                    x[0] = r;
                    return area * std::pow(r, d - 1) * density(sol, t, x);
                };
                const double R = sol.compact() ? support_radius(sol, t) : 40.0 * std::sqrt(t);
                EXPECT_NEAR(gk_integrate(f, 0.0, R), 1.0, 1e-8) << fam.name() << " t=" << t;
            }
        }
    }
}

TEST(Analytic, SelfSimilarity) {
    std::mt19937_64 gen(11);
    for (const auto& sol : shipped_solutions()) {
        const double z = sol.center();
        std::uniform_real_distribution<double> T(0.01, 20.0);
        std::uniform_real_distribution<double> X(-4.0, 4.0);
        for (int i = 0; i < 100; ++i) {
            const double t = T(gen);
            const double x = z + X(gen);
            const double lhs = density(sol, t, x);
            const double rhs = std::pow(t, -sol.k) * density(sol, 1.0, std::pow(t, -sol.k_over_d()) * (x - z) + z);
            EXPECT_NEAR(lhs, rhs, 1e-13 * std::max(lhs, 1e-300)) << sol.family.name();
        }
    }
}

TEST(Analytic, RebasedSolutionMatchesShiftedTime) {
    std::mt19937_64 gen(3);
    for (const auto& sol : shipped_solutions()) {
        const auto r = rebase(sol, 0.4);
        for (int i = 0; i < 50; ++i) {
            const double t = std::uniform_real_distribution<double>(0.01, 3.0)(gen);
            const double x = sol.center() + std::uniform_real_distribution<double>(-2.0, 2.0)(gen);
            EXPECT_EQ(r.density(t, x), density(sol, 0.4 + t, x));
        }
    }
}

TEST(Analytic, CdfMatchesIncompleteBeta) {
    auto pme = build_solution(PdeFamily::porous_medium(3.0), 0.0);
    auto pl = build_solution(PdeFamily::p_laplace(4.0), 0.0);
    for (double t : {0.1, 1.0}) {
        const double Rm = support_radius(pme, t);
        const double Rp = support_radius(pl, t);
        for (double v = -0.95; v <= 0.95; v += 0.1) {
            const double sgn = v < 0 ? -1.0 : 1.0;
            const double pme_ref = 0.5 + 0.5 * sgn * boost::math::ibeta(0.5, 1.5, v * v);
            EXPECT_NEAR(cdf(pme, t, v * Rm), pme_ref, 1e-12);
            const double w = std::pow(std::abs(v), 4.0 / 3.0);
            const double pl_ref = 0.5 + 0.5 * sgn * boost::math::ibeta(0.75, 2.5, w);
            EXPECT_NEAR(cdf(pl, t, v * Rp), pl_ref, 1e-12);
        }
        EXPECT_EQ(cdf(pme, t, -Rm - 0.1), 0.0);
        EXPECT_EQ(cdf(pme, t, Rm + 0.1), 1.0);
    }
}

TEST(Analytic, InverseCdfValues) {
    auto heat = build_solution(PdeFamily::heat(), 0.0);
    EXPECT_EQ(inverse_cdf(heat, 1.0, 0.5), 0.0);
    EXPECT_NEAR(inverse_cdf(heat, 1.0, 0.975), 1.959963984540054, 1e-10);
    auto pme = build_solution(PdeFamily::porous_medium(3.0), 0.25);
    EXPECT_EQ(inverse_cdf(pme, 1.0, 0.5), 0.25);
    EXPECT_THROW(inverse_cdf(heat, 1.0, 0.0), std::domain_error);
    EXPECT_THROW(inverse_cdf(heat, 1.0, 1.0), std::domain_error);
    EXPECT_THROW(inverse_cdf(heat, 1.0, 1.5), std::domain_error);
}

TEST(Analytic, InverseCdfRoundTripAndRange) {
    for (const auto& sol : shipped_solutions()) {
        for (double t : {0.1, 1.0}) {
            for (double u = 0.001; u < 0.999; u += 0.0045) {
                const double x = inverse_cdf(sol, t, u);
                EXPECT_LT(std::abs(cdf(sol, t, x) - u), 1e-10) << sol.family.name() << " u=" << u;
                if (sol.compact()) {
                    EXPECT_GT(x, sol.center() - support_radius(sol, t));
                    EXPECT_LT(x, sol.center() + support_radius(sol, t));
                }
            }
            const double lo = inverse_cdf(sol, t, 1e-12);
            const double hi = inverse_cdf(sol, t, 1 - 1e-12);
            EXPECT_TRUE(std::isfinite(lo) && std::isfinite(hi));
            EXPECT_LT(lo, hi);
        }
    }
}
