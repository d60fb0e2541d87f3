#include <gtest/gtest.h>

#include <cmath>

#include "mvsde/sampler.hpp"
#include "mvsde/verify.hpp"

using namespace mvsde;

namespace {

SimConfig config(double T, double dt, std::size_t n, std::uint64_t seed, double z = 0.0) {
    SimConfig c;
    c.T = T;
    c.dt = dt;
    c.n_paths = n;
    c.master_seed = seed;
    c.z = z;
    return c;
}

const SelfSimilarSolution& heat() {
    static const auto s = build_solution(PdeFamily::heat(), 0.0);
    return s;
}
const SelfSimilarSolution& pme3() {
    static const auto s = build_solution(PdeFamily::porous_medium(3.0), 0.0);
    return s;
}

}  // namespace

TEST(Kolmogorov, SurvivalMatchesReferenceValues) {
    // scipy.special.kolmogorov
    const std::pair<double, double> ref[] = {{0.3, 0.9999906941986655}, {0.5, 0.9639452436648751},
                                             {0.8, 0.5441424115741981}, {1.0, 0.26999967167735456},
                                             {1.2, 0.11224966667072497}, {1.6276, 0.010001537333060776}};
    for (auto [l, q] : ref) EXPECT_NEAR(kolmogorov_survival(l), q, 1e-13) << l;
    EXPECT_NEAR(kolmogorov_quantile(0.99), 1.6276236115189504, 1e-12);
    EXPECT_NEAR(kolmogorov_quantile(0.95), 1.3580986393225507, 1e-12);
    EXPECT_EQ(kolmogorov_cdf(0.0), 0.0);
}

TEST(Kolmogorov, SeriesAgreeAcrossSwitch) {
    for (double l : {0.999999, 1.0, 1.000001}) EXPECT_NEAR(kolmogorov_cdf(l) + kolmogorov_survival(l), 1.0, 1e-15);
    EXPECT_NEAR(kolmogorov_cdf(1.0 - 1e-12), kolmogorov_cdf(1.0), 1e-11);
}

TEST(KsTest, DegenerateAndWrongScaleFail) {
    std::vector<double> constant(3000, 0.0);
    EXPECT_FALSE(ks_test(constant, heat(), 1.0).pass);

    RngStream r(3, 0);
    const auto x = sample_marginal(heat(), 2.0, 3000, r);
    EXPECT_FALSE(ks_test(x, heat(), 1.0).pass);
    const auto rep = ks_test(x, heat(), 2.0);
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.pass, std::abs(rep.observed - rep.target) <= rep.tolerance);
}

TEST(KsTest, RejectsSmallOrEmptySamples) {
    EXPECT_THROW(ks_test(std::vector<double>{}, heat(), 1.0), std::invalid_argument);
    EXPECT_THROW(ks_test(std::vector<double>(499, 0.0), heat(), 1.0), std::invalid_argument);
}

TEST(KsTest, NullRejectionRateNearSignificance) {
    int rejected = 0;
    const int trials = 200;
    for (int i = 0; i < trials; ++i) {
        RngStream r(1234, i);
        rejected += !ks_test(sample_marginal(pme3(), 1.0, 500, r), pme3(), 1.0, 0.05).pass;
    }
    // Binomial(200, 0.05): mean 10, sd 3.1.
    EXPECT_LE(rejected, 22);
}

TEST(RealizedQv, Basics) {
    const std::vector<double> t{0.0, 0.5, 1.0};
    EXPECT_EQ(realized_qv(std::vector<double>{2.0, 2.0, 2.0}, t), 0.0);
    EXPECT_DOUBLE_EQ(realized_qv(std::vector<double>{0.0, 1.0, 3.0}, t), 5.0);
    EXPECT_THROW(realized_qv(std::vector<double>{0.0}, std::vector<double>{0.0}), std::invalid_argument);
    EXPECT_THROW(realized_qv(std::vector<double>{0.0, 1.0}, t), std::invalid_argument);
}

TEST(RealizedQv, HeatBetaPathAndDiscrimination) {
    const double dt = 1e-4;
    std::vector<std::pair<double, double>> ci;
    for (double beta : {0.25, 0.5, 1.5}) {
        const auto field = make_field(Interpretation::heat_beta(beta), heat());
        const auto ens = euler_maruyama(field, config(1.0, dt, 30, 77));
        const std::span<const double> grid = std::span<const double>(ens.times).subspan(1);
        double mean = 0.0, m2 = 0.0;
        for (std::size_t p = 0; p < ens.n_paths; ++p) {
            const double qv = realized_qv(ens.path(p).subspan(1), grid);
            mean += qv;
            m2 += qv * qv;
        }
        mean /= 30.0;
        const double se = std::sqrt((m2 / 30.0 - mean * mean) / 29.0);
        EXPECT_NEAR(mean, beta, 0.05 * beta);
        EXPECT_NEAR(realized_qv(ens.path(0).subspan(1), grid), beta, 0.05 * beta);
        ci.emplace_back(mean - 3.0 * se, mean + 3.0 * se);
    }
    for (std::size_t i = 0; i + 1 < ci.size(); ++i) EXPECT_LT(ci[i].second, ci[i + 1].first);
}

TEST(CovarianceCheck, BrownianTargetAndGridErrors) {
    const auto ens = exact_heat_beta(1.0, config(2.0, 0.5, 5000, 2));
    const auto reps = covariance_check(ens, 1.0, {{1.0, 2.0}});
    ASSERT_EQ(reps.size(), 1u);
    EXPECT_EQ(reps[0].target, 1.0);
    EXPECT_TRUE(reps[0].pass);
    EXPECT_NEAR(heat_beta_covariance(0.01, 1.0, 4.0), 1.9862, 5e-5);
    EXPECT_THROW(covariance_check(ens, 1.0, {{0.3, 1.0}}), std::invalid_argument);
}

TEST(TestFunction, DerivativesAndSupport) {
    const auto fns = {TestFunction::gaussian_bump(0.3, 0.2), TestFunction::truncated_linear(-1.0, 2.0, 1.5),
                      TestFunction::truncated_constant(0.0, 0.5, 0.5)};
    for (const auto& f : fns) {
        for (double x = f.support_lo() - 0.5; x <= f.support_hi() + 0.5; x += 0.01237) {
            const double h = 1e-5;
            EXPECT_NEAR(f.d1(x), (f.value(x + h) - f.value(x - h)) / (2 * h), 1e-6 * (1 + std::abs(f.d1(x))));
            EXPECT_NEAR(f.d2(x), (f.d1(x + h) - f.d1(x - h)) / (2 * h), 1e-5 * (1 + std::abs(f.d2(x))));
            if (x <= f.support_lo() || x >= f.support_hi()) {
                EXPECT_EQ(f.value(x), 0.0);
                EXPECT_EQ(f.d2(x), 0.0);
            }
        }
    }
    const auto bump = TestFunction::gaussian_bump(1.0, 0.1);
    EXPECT_DOUBLE_EQ(bump.support_lo(), 0.5);
    EXPECT_DOUBLE_EQ(bump.support_hi(), 1.5);
    // C^2 across the cutoff joints.
    for (double j : {0.7, 1.3, 0.5, 1.5}) {
        EXPECT_NEAR(bump.d2(j - 1e-12), bump.d2(j + 1e-12), 1e-8);
    }
}

TEST(Expectation, MomentsAgainstClosedForms) {
    EXPECT_NEAR(expectation(heat(), 1.0, [](double) { return 1.0; }), 1.0, 1e-10);
    EXPECT_NEAR(expectation(heat(), 2.5, [](double x) { return x * x; }), 2.5, 1e-10);
    // E[X^2] = R(t)^2 / (2/(m-1) + 3) for the Barenblatt profile.
    const double R = support_radius(pme3(), 1.0);
    EXPECT_NEAR(expectation(pme3(), 1.0, [](double x) { return x * x; }), R * R / 4.0, 1e-10);
}

TEST(FpeResidual, HeatBrownianVanishes) {
    const auto field = make_field(Interpretation::heat_beta(1.0), heat());
    for (const auto& phi : {TestFunction::gaussian_bump(0.0, 0.3), TestFunction::gaussian_bump(0.7, 0.5)})
        EXPECT_LT(fpe_weak_residual(field, phi, 0.25, 1.0), 1e-6);
}

TEST(FpeResidual, InterpretationsAnnihilateCorruptionDoesNot) {
    const auto phi = TestFunction::gaussian_bump(0.0, 0.5);
    const auto pme = make_field(Interpretation::pme_beta(0.7), pme3());
    EXPECT_LT(fpe_weak_residual(pme, phi, 0.25, 1.0), 1e-3);
    EXPECT_GT(fpe_weak_residual(pme.scaled(1.1, 1.0), phi, 0.25, 1.0), 1e-2);

    const auto pl = build_solution(PdeFamily::p_laplace(4.0), 0.0);
    for (const auto& f : {make_field(Interpretation::plap_beta(0.4), pl), make_field(Interpretation::plap_theta(0.5), pl),
                          make_field(Interpretation::pme_additive(),
                                     build_solution(PdeFamily::porous_medium(1.5), 0.0)),
                          make_field(Interpretation::heat_pc(0.25, 0.3), heat())})
        EXPECT_LT(fpe_weak_residual(f, TestFunction::gaussian_bump(0.2, 0.25), 0.25, 1.0), 1e-3) << f.name();
}

TEST(FpeResidual, ConvexCombinationBound) {
    const auto phi = TestFunction::gaussian_bump(0.1, 0.3);
    const auto f1 = make_field(Interpretation::pme_beta(0.2), pme3()).scaled(1.05, 1.0);
    const auto f2 = make_field(Interpretation::pme_beta(1.3), pme3()).scaled(1.0, 0.9);
    const double lam = 0.3;
    CoefficientField mix("mix", pme3(),
                         [&](double t, double r) {
                             const auto a = f1.radial(t, r);
                             const auto b = f2.radial(t, r);
                             return RadialCoefficients{lam * a.a + (1 - lam) * b.a, lam * a.b + (1 - lam) * b.b,
                                                       lam * a.a_r + (1 - lam) * b.a_r};
                         },
                         {true, false});
    const double r1 = fpe_weak_residual(f1, phi, 0.25, 1.0);
    const double r2 = fpe_weak_residual(f2, phi, 0.25, 1.0);
    EXPECT_LE(fpe_weak_residual(mix, phi, 0.25, 1.0), lam * r1 + (1 - lam) * r2 + 1e-8);
}

TEST(ExpectedQv, ClosedForms) {
    EXPECT_NEAR(expected_qv(make_field(Interpretation::heat_beta(0.4), heat()), 0.01, 1.0), 0.4 * 0.99, 1e-8);
    // PME m = 3: E_t[a] = beta t^{-1/2} (3C/4).
    const double C = pme3().C;
    EXPECT_NEAR(expected_qv(make_field(Interpretation::pme_beta(1.0), pme3()), 1e-4, 1.0),
                3.0 * C * (1.0 - 1e-2), 1e-7);
}

TEST(FlowProperty, HeatAndPme) {
    auto cfg = config(1.0, 1e-3, 1000, 55);
    const auto heat_rep = flow_property_check(make_field(Interpretation::heat_beta(1.0), heat()), 0.25, 0.75, cfg);
    EXPECT_TRUE(heat_rep.pass) << heat_rep.metadata.at("p_value");
    const auto pme_rep = flow_property_check(make_field(Interpretation::pme_beta(0.0), pme3()), 0.5, 0.5, cfg);
    EXPECT_TRUE(pme_rep.pass) << pme_rep.metadata.at("p_value");
    EXPECT_EQ(pme_rep.metadata.at("t"), 1.0);
    EXPECT_EQ(pme_rep.metadata.at("elapsed"), 0.5);
}

TEST(MomentCheck, TargetsAndVerdicts) {
    RngStream r(9, 9);
    const auto hx = sample_marginal(heat(), 1.0, 20000, r);
    const auto hrep = moment_check(hx, heat(), 1.0, {1, 2});
    EXPECT_NEAR(hrep[0].target, 0.0, 1e-12);
    EXPECT_NEAR(hrep[1].target, 1.0, 1e-10);
    for (const auto& rep : hrep) EXPECT_TRUE(rep.pass) << rep.name;

    const auto px = sample_marginal(pme3(), 1.0, 20000, r);
    const auto prep = moment_check(px, pme3(), 1.0, {2});
    EXPECT_TRUE(prep[0].pass);
    std::vector<double> shifted(px);
    for (auto& x : shifted) x += 0.1;
    EXPECT_FALSE(moment_check(shifted, pme3(), 1.0, {1})[0].pass);
}
