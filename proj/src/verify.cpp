#include "mvsde/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mvsde/errors.hpp"
#include "mvsde/quadrature.hpp"

namespace mvsde {

double kolmogorov_cdf(double lambda) {
    if (!(lambda > 0.0)) return 0.0;
    if (lambda < 1.0) {
        const double pi2 = std::numbers::pi * std::numbers::pi;
        const double x = -pi2 / (8.0 * lambda * lambda);
        double sum = 0.0;
        for (int j = 1; j <= 50; ++j) {
            const double term = std::exp((2.0 * j - 1.0) * (2.0 * j - 1.0) * x);
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    }
    return 1.0 - kolmogorov_survival(lambda);
}

double kolmogorov_survival(double lambda) {
    if (lambda < 1.0) return 1.0 - kolmogorov_cdf(lambda);
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double kolmogorov_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("kolmogorov_quantile: p must lie in (0, 1)");
    double lo = 0.0, hi = 10.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kolmogorov_cdf(mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

VerificationReport ks_test(std::span<const double> samples, const std::function<double(double)>& cdf,
                           double significance) {
    const std::size_t n = samples.size();
    if (n == 0) throw std::invalid_argument("ks_test: empty sample set");
    if (n < kMinKsSamples) {
        std::ostringstream os;
        os << "ks_test: " << n << " samples, at least " << kMinKsSamples << " required for the asymptotic p-value";
        throw std::invalid_argument(os.str());
    }
    if (!(significance > 0.0 && significance < 1.0)) throw std::invalid_argument("significance must lie in (0, 1)");
    std::vector<double> x(samples.begin(), samples.end());
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("ks_test: non-finite sample");
    std::sort(x.begin(), x.end());
    const double nd = static_cast<double>(n);
    double D = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double F = cdf(x[i]);
        D = std::max({D, static_cast<double>(i + 1) / nd - F, F - static_cast<double>(i) / nd});
    }
    const double sqn = std::sqrt(nd);
    const double p = kolmogorov_survival(sqn * D);
    const double crit = kolmogorov_quantile(1.0 - significance) / sqn;

    VerificationReport r;
    r.name = "ks";
    r.observed = D;
    r.target = 0.0;
    r.tolerance = crit;
    r.pass = p >= significance;
    r.metadata = {{"n", nd}, {"p_value", p}, {"significance", significance}, {"sqrt_n_D", sqn * D}};
    return r;
}

VerificationReport ks_test(std::span<const double> samples, const SelfSimilarSolution& sol, double t,
                           double significance) {
    if (sol.dim() != 1) throw std::invalid_argument("ks_test requires d = 1");
    if (!(t > 0.0)) throw std::invalid_argument("ks_test requires t > 0");
    auto r = ks_test(samples, [&](double x) { return cdf(sol, t, x); }, significance);
    r.metadata["t"] = t;
    return r;
}

double realized_qv(std::span<const double> path, std::span<const double> times) {
    if (path.size() != times.size()) throw std::invalid_argument("realized_qv: path and grid sizes differ");
    if (path.size() < 2) throw std::invalid_argument("realized_qv: at least two grid points required");
    double qv = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double d = path[i] - path[i - 1];
        qv += d * d;
    }
    return qv;
}

double heat_beta_covariance(double beta, double s, double t) {
    if (s > t) std::swap(s, t);
    return std::pow(t, 0.5 * (1.0 - beta)) * std::pow(s, 0.5 * (1.0 + beta));
}

namespace {

std::size_t grid_index(const PathEnsemble& ens, double t) {
    const double abs_tol = 1e-9 * std::max(1.0, std::abs(t));
    for (std::size_t j = 0; j < ens.times.size(); ++j)
        if (std::abs(ens.t_start + ens.times[j] - t) <= abs_tol) return j;
    std::ostringstream os;
    os << "time " << t << " is not on the ensemble grid";
    throw std::invalid_argument(os.str());
}

}  // namespace

std::vector<VerificationReport> covariance_check(const PathEnsemble& ens, double beta,
                                                 const std::vector<std::pair<double, double>>& pairs,
                                                 double n_se) {
    if (ens.n_paths < 2) throw std::invalid_argument("covariance_check: at least two paths required");
    const double z = ens.config.z;
    const double n = static_cast<double>(ens.n_paths);
    std::vector<VerificationReport> out;
    for (auto [s, t] : pairs) {
        const std::size_t i = grid_index(ens, s);
        const std::size_t j = grid_index(ens, t);
        double mean = 0.0, m2 = 0.0;
        for (std::size_t p = 0; p < ens.n_paths; ++p) {
            const double v = (ens.at(p, i) - z) * (ens.at(p, j) - z);
            mean += v;
            m2 += v * v;
        }
        mean /= n;
        const double var = std::max(0.0, (m2 / n - mean * mean) * n / (n - 1.0));
        const double se = std::sqrt(var / n);
        VerificationReport r;
        std::ostringstream name;
        name << "covariance(" << s << "," << t << ")";
        r.name = name.str();
        r.observed = mean;
        r.target = heat_beta_covariance(beta, s, t);
        r.tolerance = n_se * se;
        r.pass = std::abs(r.observed - r.target) <= r.tolerance;
        r.metadata = {{"n", n}, {"s", s}, {"t", t}, {"beta", beta}, {"standard_error", se},
                      {"master_seed", static_cast<double>(ens.config.master_seed)}};
        out.push_back(std::move(r));
    }
    return out;
}

TestFunction TestFunction::gaussian_bump(double center, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("bump width must be positive");
    return {Base::GaussianBump, center, width, 3.0 * width, 2.0 * width};
}

TestFunction TestFunction::truncated_linear(double center, double plateau, double taper) {
    if (!(plateau >= 0.0) || !(taper > 0.0)) throw std::invalid_argument("invalid cutoff geometry");
    return {Base::Linear, center, 0.0, plateau, taper};
}

TestFunction TestFunction::truncated_constant(double center, double plateau, double taper) {
    if (!(plateau >= 0.0) || !(taper > 0.0)) throw std::invalid_argument("invalid cutoff geometry");
    return {Base::Constant, center, 0.0, plateau, taper};
}

void TestFunction::base_derivs(double x, double& f, double& f1, double& f2) const {
    const double y = x - c_;
    switch (base_) {
        case Base::GaussianBump: {
            const double w2 = w_ * w_;
            f = std::exp(-0.5 * y * y / w2);
            f1 = -y / w2 * f;
            f2 = (y * y / w2 - 1.0) / w2 * f;
            return;
        }
        case Base::Linear:
            f = y;
            f1 = 1.0;
            f2 = 0.0;
            return;
        case Base::Constant:
            f = 1.0;
            f1 = 0.0;
            f2 = 0.0;
            return;
    }
}

void TestFunction::cutoff_derivs(double x, double& g, double& g1, double& g2) const {
    const double y = x - c_;
    const double r = std::abs(y);
    g1 = g2 = 0.0;
    if (r <= plateau_) {
        g = 1.0;
        return;
    }
    if (r >= plateau_ + taper_) {
        g = 0.0;
        return;
    }
    // 1 - smootherstep((r - plateau) / taper)
    const double u = (r - plateau_) / taper_;
    const double S = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    const double S1 = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    const double S2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    const double sgn = y > 0.0 ? 1.0 : -1.0;
    g = 1.0 - S;
    g1 = -S1 / taper_ * sgn;
    g2 = -S2 / (taper_ * taper_);
}

double TestFunction::value(double x) const {
    double f = 0, f1 = 0, f2 = 0, g = 0, g1 = 0, g2 = 0;
    base_derivs(x, f, f1, f2);
    cutoff_derivs(x, g, g1, g2);
    return f * g;
}

double TestFunction::d1(double x) const {
    double f = 0, f1 = 0, f2 = 0, g = 0, g1 = 0, g2 = 0;
    base_derivs(x, f, f1, f2);
    cutoff_derivs(x, g, g1, g2);
    return f1 * g + f * g1;
}

double TestFunction::d2(double x) const {
    double f = 0, f1 = 0, f2 = 0, g = 0, g1 = 0, g2 = 0;
    base_derivs(x, f, f1, f2);
    cutoff_derivs(x, g, g1, g2);
    return f2 * g + 2.0 * f1 * g1 + f * g2;
}

std::vector<double> TestFunction::breakpoints() const {
    return {c_ - plateau_ - taper_, c_ - plateau_, c_, c_ + plateau_, c_ + plateau_ + taper_};
}

std::string TestFunction::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (base_) {
        case Base::GaussianBump: os << "bump(c=" << c_ << ",w=" << w_ << ")"; break;
        case Base::Linear: os << "linear(c=" << c_ << ",L=" << plateau_ << ",taper=" << taper_ << ")"; break;
        case Base::Constant: os << "constant(c=" << c_ << ",L=" << plateau_ << ",taper=" << taper_ << ")"; break;
    }
    return os.str();
}

std::vector<TestFunction> standard_test_functions(const SelfSimilarSolution& sol, double t) {
    const double L = sol.compact() ? 0.5 * support_radius(sol, t) : std::sqrt(t);
    const double z = sol.center();
    const double offsets[] = {0.0, 0.3, -0.5, 0.8, 0.2};
    const double widths[] = {0.35, 0.2, 0.4, 0.25, 0.6};
    std::vector<TestFunction> out;
    for (int i = 0; i < 5; ++i) out.push_back(TestFunction::gaussian_bump(z + offsets[i] * L, widths[i] * L));
    return out;
}

namespace {

// Integration window of u^z(t, .): the support, or z +- 40 sqrt(t) for the heat kernel.
std::pair<double, double> density_window(const SelfSimilarSolution& sol, double t) {
    const double z = sol.center();
    const double R = sol.compact() ? support_radius(sol, t) : 40.0 * std::sqrt(t);
    return {z - R, z + R};
}

double integrate_density(const SelfSimilarSolution& sol, double t, const std::function<double(double)>& f,
                         double lo, double hi, std::vector<double> breaks, double tol) {
    auto [wlo, whi] = density_window(sol, t);
    lo = std::max(lo, wlo);
    hi = std::min(hi, whi);
    if (!(hi > lo)) return 0.0;
    breaks.push_back(sol.center());
    std::vector<double> pts{lo, hi};
    for (double b : breaks)
        if (b > lo && b < hi) pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return quad::integrate_pieces([&](double x) { return f(x) * density(sol, t, x); }, pts, tol);
}

}  // namespace

double expectation(const SelfSimilarSolution& sol, double t, const std::function<double(double)>& f, double lo,
                   double hi, double tol) {
    if (sol.dim() != 1) throw std::invalid_argument("expectation requires d = 1");
    if (!(t > 0.0)) throw std::invalid_argument("expectation requires t > 0");
    return integrate_density(sol, t, f, lo, hi, {}, tol);
}

double expectation(const SelfSimilarSolution& sol, double t, const std::function<double(double)>& f, double tol) {
    auto [lo, hi] = density_window(sol, t);
    return expectation(sol, t, f, lo, hi, tol);
}

double fpe_weak_residual(const CoefficientField& field, const TestFunction& phi, double s, double t, double tol) {
    if (!(s > 0.0 && s < t)) throw std::invalid_argument("fpe_weak_residual requires 0 < s < t");
    const auto& sol = field.solution();
    if (sol.dim() != 1) throw std::invalid_argument("fpe_weak_residual requires d = 1");
    const double lo = phi.support_lo();
    const double hi = phi.support_hi();
    const auto breaks = phi.breakpoints();

    auto mass = [&](double r) {
        return integrate_density(sol, r, [&](double x) { return phi.value(x); }, lo, hi, breaks, tol);
    };
    auto generator = [&](double r) {
        return integrate_density(
            sol, r,
            [&](double x) {
                double a = 0.0, b = 0.0;
                field.evaluate(r, x, a, b);
                return a * phi.d2(x) + b * phi.d1(x);
            },
            lo, hi, breaks, tol);
    };
    const double lhs = mass(t) - mass(s);
    const double rhs = quad::gauss_legendre_32(generator, s, t);
    const double res = std::abs(lhs - rhs);
    if (!std::isfinite(res)) throw NumericalError("fpe_weak_residual: non-finite residual");
    return res;
}

double expected_qv(const CoefficientField& field, double t0, double t1, double tol) {
    if (!(t0 > 0.0 && t1 > t0)) throw std::invalid_argument("expected_qv requires 0 < t0 < t1");
    const auto& sol = field.solution();
    auto inner = [&](double r) {
        return integrate_density(sol, r, [&](double x) { return field.diffusion(r, x); },
                                 -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                                 {}, tol);
    };
    return 2.0 * quad::integrate(inner, t0, t1, tol);
}

VerificationReport flow_property_check(const CoefficientField& field, double s, double t, SimConfig cfg,
                                       double significance) {
    cfg.T = t;
    const PathEnsemble ens = euler_maruyama_from_marginal(field, s, cfg);
    const auto end = ens.final_positions();
    auto r = ks_test(end, field.solution(), s + t, significance);
    r.name = "flow";
    r.metadata["s"] = s;
    r.metadata["elapsed"] = t;
    r.metadata["dt"] = cfg.dt;
    r.metadata["master_seed"] = static_cast<double>(cfg.master_seed);
    r.metadata["diverged"] = static_cast<double>(ens.divergences.size());
    return r;
}

std::vector<VerificationReport> moment_check(std::span<const double> samples, const SelfSimilarSolution& sol,
                                             double t, const std::vector<int>& orders, double n_se) {
    if (samples.size() < 2) throw std::invalid_argument("moment_check: at least two samples required");
    const double n = static_cast<double>(samples.size());
    std::vector<VerificationReport> out;
    for (int k : orders) {
        if (k < 1) throw std::invalid_argument("moment_check: orders must be >= 1");
        const double mk = expectation(sol, t, [k](double x) { return std::pow(x, k); });
        const double m2k = expectation(sol, t, [k](double x) { return std::pow(x, 2 * k); });
        double mean = 0.0;
        for (double x : samples) mean += std::pow(x, k);
        mean /= n;
        const double se = std::sqrt(std::max(0.0, m2k - mk * mk) / n);
        VerificationReport r;
        r.name = "moment" + std::to_string(k);
        r.observed = mean;
        r.target = mk;
        r.tolerance = n_se * se;
        r.pass = std::abs(mean - mk) <= r.tolerance;
        r.metadata = {{"n", n}, {"order", static_cast<double>(k)}, {"t", t}, {"standard_error", se}};
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace mvsde
