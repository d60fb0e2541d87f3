#include "mvsde/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "mvsde/errors.hpp"
#include "mvsde/quadrature.hpp"

namespace mvsde {

namespace {

const char* tag_name(InterpretationTag tag) {
    switch (tag) {
        case InterpretationTag::HeatBeta:
            return "HeatBeta";
        case InterpretationTag::HeatPC:
            return "HeatPC";
        case InterpretationTag::PmeBeta:
            return "PmeBeta";
        case InterpretationTag::PmeAdditive:
            return "PmeAdditive";
        case InterpretationTag::PmeStratonovich:
            return "PmeStratonovich";
        case InterpretationTag::PLapBeta:
            return "PLapBeta";
        case InterpretationTag::PLapTheta:
            return "PLapTheta";
    }
    return "?";
}

FamilyTag family_of(InterpretationTag tag) {
    switch (tag) {
        case InterpretationTag::HeatBeta:
        case InterpretationTag::HeatPC:
            return FamilyTag::Heat;
        case InterpretationTag::PmeBeta:
        case InterpretationTag::PmeAdditive:
        case InterpretationTag::PmeStratonovich:
            return FamilyTag::PorousMedium;
        case InterpretationTag::PLapBeta:
        case InterpretationTag::PLapTheta:
            return FamilyTag::PLaplace;
    }
    return FamilyTag::Heat;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

RadialKernel heat_beta_kernel(double beta) {
    if (beta == 1.0) return [](double, double) { return RadialCoefficients{0.5, 0.0, 0.0}; };
    return [beta](double t, double r) { return RadialCoefficients{0.5 * beta, (1.0 - beta) * r / (2.0 * t), 0.0}; };
}

RadialKernel heat_pc_kernel(const SelfSimilarSolution& sol, double p, double c) {
    return [sol, p, c](double t, double r) {
        const double u = sol.radial_density(t, r);
        if (u <= 0.0) return RadialCoefficients{0.5, 0.0, 0.0};
        const double up1 = std::pow(u, p - 1.0);
        return RadialCoefficients{0.5 + c * up1, -c * p * up1 * r / t, -c * (p - 1.0) * up1 * r / t};
    };
}

RadialKernel pme_beta_kernel(const SelfSimilarSolution& sol, double beta) {
    const double C = sol.C;
    const double q = sol.q;
    const double alpha = sol.alpha;
    const double kd = sol.k_over_d();
    return [=](double t, double r) {
        const double s = std::pow(t, -kd);
        const double xi = r * s;
        const double base = C - q * xi * xi;
        if (base <= 0.0) return RadialCoefficients{};
        const double ta = std::pow(t, -alpha);
        return RadialCoefficients{beta * ta * base, (1.0 - beta) * kd * r / t, -2.0 * beta * ta * q * xi * s};
    };
}

RadialKernel pme_additive_kernel(const SelfSimilarSolution& sol) {
    const double C = sol.C;
    const double q = sol.q;
    const double m = sol.family.param;
    const double kd = sol.k_over_d();
    return [=](double t, double r) {
        const double s = std::pow(t, -kd);
        const double xi = r * s;
        const double base = C - q * xi * xi;
        if (base <= 0.0) return RadialCoefficients{1.0, 0.0, 0.0};
        const double log_grad = -(2.0 * q / (m - 1.0)) * xi / base * s;
        return RadialCoefficients{1.0, log_grad + kd * r / t, 0.0};
    };
}

RadialKernel plap_beta_kernel(const SelfSimilarSolution& sol, double beta,
                              std::shared_ptr<const PLaplaceProfile> h) {
    const double alpha = sol.alpha;
    const double kd = sol.k_over_d();
    const double R1 = sol.profile_radius();
    return [=](double t, double r) {
        const double s = std::pow(t, -kd);
        const double xi = r * s;
        if (xi >= R1) return RadialCoefficients{};
        const double ta = std::pow(t, -alpha);
        return RadialCoefficients{beta * ta * h->value(xi), (1.0 - beta) * kd * r / t, beta * ta * s * h->derivative(xi)};
    };
}

RadialKernel plap_theta_kernel(const SelfSimilarSolution& sol, double theta,
                               std::shared_ptr<const PLaplaceProfile> h) {
    const double alpha = sol.alpha;
    const double kd = sol.k_over_d();
    const double R1 = sol.profile_radius();
    const double p = sol.family.param;
    if (theta > 0.0) {
        return [=](double t, double r) {
            const double s = std::pow(t, -kd);
            const double xi = r * s;
            if (xi >= R1) return RadialCoefficients{};
            const double ta = std::pow(t, -alpha);
            const double a_r = ta * s * h->derivative(xi);
            return RadialCoefficients{ta * h->value(xi), (1.0 - theta) * a_r, a_r};
        };
    }
    // theta = 0: a = |grad u|^{p-2}.
    return [=](double t, double r) {
        const double s = std::pow(t, -kd);
        const double xi = r * s;
        if (xi >= R1 || xi <= 0.0) return RadialCoefficients{};
        const double g = sol.profile(xi);
        const double dg = sol.profile_derivative(xi);
        const double ag = std::abs(dg);
        const double ta = std::pow(t, -alpha);
        const double dh = ((p - 2.0) / (p - 1.0)) * kd * (g + xi * dg) / ag;
        const double a_r = ta * s * dh;
        return RadialCoefficients{ta * std::pow(ag, p - 2.0), a_r, a_r};
    };
}

std::mutex& cache_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

Interpretation Interpretation::heat_beta(double beta) { return {InterpretationTag::HeatBeta, beta, 1.0, 1.0, 0.0}; }
Interpretation Interpretation::heat_pc(double p, double c) { return {InterpretationTag::HeatPC, 1.0, 1.0, p, c}; }
Interpretation Interpretation::pme_beta(double beta) { return {InterpretationTag::PmeBeta, beta, 1.0, 1.0, 0.0}; }
Interpretation Interpretation::pme_additive() { return {InterpretationTag::PmeAdditive, 1.0, 1.0, 1.0, 0.0}; }
Interpretation Interpretation::pme_stratonovich() { return {InterpretationTag::PmeStratonovich, 1.0, 1.0, 1.0, 0.0}; }
Interpretation Interpretation::plap_beta(double beta) { return {InterpretationTag::PLapBeta, beta, 1.0, 1.0, 0.0}; }
Interpretation Interpretation::plap_theta(double theta) { return {InterpretationTag::PLapTheta, 1.0, theta, 1.0, 0.0}; }

void Interpretation::validate(const PdeFamily& family) const {
    family.validate();
    if (family_of(tag) != family.tag) {
        std::ostringstream os;
        os << "interpretation " << tag_name(tag) << " is incompatible with " << family.name();
        throw std::invalid_argument(os.str());
    }
    switch (tag) {
        case InterpretationTag::HeatBeta:
        case InterpretationTag::PmeBeta:
        case InterpretationTag::PLapBeta:
            if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
            break;
        case InterpretationTag::PLapTheta:
            if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0, 1]");
            break;
        case InterpretationTag::HeatPC: {
            const double pmax = 1.0 + 1.0 / family.dim;
            const bool general = pc_p > 0.0 && pc_p < pmax && pc_c >= 0.0;
            const bool unit = pc_p == 1.0 && pc_c >= -0.5;
            if (!(general || unit) || !std::isfinite(pc_c)) {
                std::ostringstream os;
                os << "HeatPC(p=" << pc_p << ", c=" << pc_c << ") requires 0 < p < " << pmax
                   << " with c >= 0, or p = 1 with c >= -1/2";
                throw std::invalid_argument(os.str());
            }
            break;
        }
        case InterpretationTag::PmeAdditive:
            if (!(family.param > 1.0 && family.param < 2.0))
                throw std::invalid_argument("PmeAdditive requires 1 < m < 2");
            break;
        case InterpretationTag::PmeStratonovich:
            break;
    }
}

double Interpretation::effective_beta(const PdeFamily& family) const {
    if (tag == InterpretationTag::PmeStratonovich) {
        const double m = family.param;
        return 2.0 * m / (m + 1.0);
    }
    return beta;
}

std::string Interpretation::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << tag_name(tag);
    switch (tag) {
        case InterpretationTag::HeatBeta:
        case InterpretationTag::PmeBeta:
        case InterpretationTag::PLapBeta:
            os << "(beta=" << beta << ")";
            break;
        case InterpretationTag::PLapTheta:
            os << "(theta=" << theta << ")";
            break;
        case InterpretationTag::HeatPC:
            os << "(p=" << pc_p << ", c=" << pc_c << ")";
            break;
        default:
            break;
    }
    return os.str();
}

CoefficientField::CoefficientField(std::string name, SelfSimilarSolution sol, RadialKernel kernel,
                                   Singularity singularity, std::optional<Interpretation> interpretation)
    : name_(std::move(name)),
      sol_(std::move(sol)),
      kernel_(std::move(kernel)),
      singularity_(singularity),
      interp_(std::move(interpretation)) {}

double CoefficientField::diffusion(double t, double x) const { return kernel_(t, std::abs(x - sol_.z[0])).a; }

double CoefficientField::drift(double t, double x) const {
    const double dx = x - sol_.z[0];
    return kernel_(t, std::abs(dx)).b * sign_of(dx);
}

double CoefficientField::diffusion_gradient(double t, double x) const {
    const double dx = x - sol_.z[0];
    return kernel_(t, std::abs(dx)).a_r * sign_of(dx);
}

void CoefficientField::evaluate(double t, double x, double& a, double& b) const {
    const double dx = x - sol_.z[0];
    const auto c = kernel_(t, std::abs(dx));
    a = c.a;
    b = c.b * sign_of(dx);
}

namespace {

double radius_of(const SelfSimilarSolution& sol, std::span<const double> x) {
    if (static_cast<int>(x.size()) != sol.dim()) throw std::invalid_argument("point dimension mismatch");
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - sol.z[i]) * (x[i] - sol.z[i]);
    return std::sqrt(r2);
}

std::vector<double> along(const SelfSimilarSolution& sol, std::span<const double> x, double r, double v) {
    std::vector<double> out(x.size(), 0.0);
    if (r > 0.0 && v != 0.0)
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = v * (x[i] - sol.z[i]) / r;
    return out;
}

}  // namespace

double CoefficientField::diffusion(double t, std::span<const double> x) const {
    return kernel_(t, radius_of(sol_, x)).a;
}

std::vector<double> CoefficientField::drift(double t, std::span<const double> x) const {
    const double r = radius_of(sol_, x);
    return along(sol_, x, r, kernel_(t, r).b);
}

std::vector<double> CoefficientField::diffusion_gradient(double t, std::span<const double> x) const {
    const double r = radius_of(sol_, x);
    return along(sol_, x, r, kernel_(t, r).a_r);
}

CoefficientField CoefficientField::time_shifted(double s) const {
    if (!(s >= 0.0)) throw std::invalid_argument("time shift must be nonnegative");
    auto k = kernel_;
    std::ostringstream os;
    os << name_ << " shifted by " << s;
    Singularity sing = singularity_;
    if (s > 0.0) sing.at_t0 = false;
    return CoefficientField(os.str(), sol_, [k, s](double t, double r) { return k(s + t, r); }, sing, interp_);
}

CoefficientField CoefficientField::scaled(double a_factor, double b_factor) const {
    auto k = kernel_;
    std::ostringstream os;
    os << name_ << " scaled (a*" << a_factor << ", b*" << b_factor << ")";
    return CoefficientField(
        os.str(), sol_,
        [k, a_factor, b_factor](double t, double r) {
            auto c = k(t, r);
            return RadialCoefficients{c.a * a_factor, c.b * b_factor, c.a_r * a_factor};
        },
        singularity_, interp_);
}

PLaplaceProfile::PLaplaceProfile(const SelfSimilarSolution& sol, double theta, std::size_t nodes)
    : sol_(sol), theta_(theta), radius_(sol.profile_radius()) {
    if (sol.family.tag != FamilyTag::PLaplace) throw std::invalid_argument("profile table needs a p-Laplace solution");
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("tabulated theta must lie in (0, 1]");
    if (nodes < 16) throw std::invalid_argument("profile table needs at least 16 nodes");
    const std::size_t n = nodes - 1;
    xi_.resize(nodes);
    h_.resize(nodes);
    dh_.resize(nodes);
    for (std::size_t i = 0; i <= n; ++i)
        xi_[i] = 0.5 * radius_ * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / n));
    xi_[n] = radius_;

    const double pre = sol.k_over_d() / theta;
    const double inv = 1.0 / theta;
    // H_i = int_{xi_i}^{R} rho (g(rho)/g(xi_i))^{1/theta} drho, accumulated from the edge inward.
    double H = 0.0;
    double lg_next = -std::numeric_limits<double>::infinity();
    h_[n] = 0.0;
    for (std::size_t j = n; j-- > 0;) {
        const double lg = sol.log_profile(xi_[j]);
        auto integrand = [&](double rho) {
            const double l = sol.log_profile(rho);
            return std::isfinite(l) ? rho * std::exp(inv * (l - lg)) : 0.0;
        };
        // Endpoint segments carry the algebraic singularities of g.
        const bool edge = j < 8 || j + 8 > n;
        const double piece = edge ? quad::integrate(integrand, xi_[j], xi_[j + 1], 1e-10)
                                  : quad::gauss_legendre_20(integrand, xi_[j], xi_[j + 1]);
        const double ratio = std::isfinite(lg_next) ? std::exp(inv * (lg_next - lg)) : 0.0;
        H = piece + ratio * H;
        h_[j] = pre * H;
        lg_next = lg;
    }

    const double p = sol.family.param;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = sol.profile(xi_[i]);
        const double ag = std::abs(sol.profile_derivative(xi_[i]));
        dh_[i] = inv * (ag / g) * (h_[i] - std::pow(ag, p - 2.0));
    }
    dh_[n] = (h_[n] - h_[n - 1]) / (xi_[n] - xi_[n - 1]);

    // Fritsch-Carlson limiter keeps each segment monotone.
    for (std::size_t i = 0; i < n; ++i) {
        const double delta = (h_[i + 1] - h_[i]) / (xi_[i + 1] - xi_[i]);
        if (delta == 0.0) {
            dh_[i] = dh_[i + 1] = 0.0;
            continue;
        }
        double a = dh_[i] / delta;
        double b = dh_[i + 1] / delta;
        if (a < 0.0) dh_[i] = a = 0.0;
        if (b < 0.0) dh_[i + 1] = b = 0.0;
        const double s = a * a + b * b;
        if (s > 9.0) {
            const double tau = 3.0 / std::sqrt(s);
            dh_[i] = tau * a * delta;
            dh_[i + 1] = tau * b * delta;
        }
    }
}

std::size_t PLaplaceProfile::locate(double xi) const {
    const std::size_t n = xi_.size() - 1;
    const double c = std::clamp(1.0 - 2.0 * xi / radius_, -1.0, 1.0);
    auto i = static_cast<std::size_t>(std::acos(c) / std::numbers::pi * static_cast<double>(n));
    if (i >= n) i = n - 1;
    while (i > 0 && xi < xi_[i]) --i;
    while (i + 1 < n && xi > xi_[i + 1]) ++i;
    return i;
}

double PLaplaceProfile::value(double xi) const {
    xi = std::abs(xi);
    if (xi >= radius_) return 0.0;
    const std::size_t i = locate(xi);
    const double h = xi_[i + 1] - xi_[i];
    const double s = (xi - xi_[i]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * h_[i] + (s3 - 2 * s2 + s) * h * dh_[i] + (-2 * s3 + 3 * s2) * h_[i + 1] +
           (s3 - s2) * h * dh_[i + 1];
}

double PLaplaceProfile::derivative(double xi) const {
    const double sgn = xi < 0.0 ? -1.0 : 1.0;
    xi = std::abs(xi);
    if (xi >= radius_) return 0.0;
    const std::size_t i = locate(xi);
    const double h = xi_[i + 1] - xi_[i];
    const double s = (xi - xi_[i]) / h;
    const double s2 = s * s;
    const double v = (6 * s2 - 6 * s) / h * h_[i] + (3 * s2 - 4 * s + 1) * dh_[i] + (-6 * s2 + 6 * s) / h * h_[i + 1] +
                     (3 * s2 - 2 * s) * dh_[i + 1];
    return sgn * v;
}

double PLaplaceProfile::direct(double xi) const {
    xi = std::abs(xi);
    if (xi >= radius_) return 0.0;
    const double lg = sol_.log_profile(xi);
    const double inv = 1.0 / theta_;
    const double integral = quad::integrate(
        [&](double rho) {
            const double l = sol_.log_profile(rho);
            return std::isfinite(l) ? rho * std::exp(inv * (l - lg)) : 0.0;
        },
        xi, radius_, 1e-14);
    return sol_.k_over_d() / theta_ * integral;
}

std::shared_ptr<const PLaplaceProfile> plaplace_profile(const SelfSimilarSolution& sol, double theta) {
    using Key = std::tuple<double, int, double, double>;
    static std::map<Key, std::shared_ptr<const PLaplaceProfile>> cache;
    const Key key{sol.family.param, sol.family.dim, sol.C, theta};
    std::lock_guard<std::mutex> lock(cache_mutex());
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto table = std::make_shared<const PLaplaceProfile>(sol, theta);
    cache.emplace(key, table);
    return table;
}

double plaplace_h(double p, double xi, int d) {
    if (!(xi >= 0.0)) throw std::domain_error("xi must be nonnegative");
    static std::map<std::pair<double, int>, SelfSimilarSolution> solutions;
    static std::mutex m;
    SelfSimilarSolution sol;
    {
        std::lock_guard<std::mutex> lock(m);
        auto key = std::make_pair(p, d);
        auto it = solutions.find(key);
        if (it == solutions.end()) it = solutions.emplace(key, build_solution(PdeFamily::p_laplace(p, d), 0.0)).first;
        sol = it->second;
    }
    return plaplace_profile(sol, 1.0)->value(xi);
}

double plaplace_a(const SelfSimilarSolution& sol, double t, std::span<const double> x) {
    if (sol.family.tag != FamilyTag::PLaplace) throw std::invalid_argument("plaplace_a needs a p-Laplace solution");
    if (!(t > 0.0)) throw std::domain_error("time must be positive");
    if (static_cast<int>(x.size()) != sol.dim()) throw std::invalid_argument("point dimension mismatch");
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - sol.z[i]) * (x[i] - sol.z[i]);
    const double xi = std::sqrt(r2) * std::pow(t, -sol.k_over_d());
    return std::pow(t, -sol.alpha) * plaplace_profile(sol, 1.0)->value(xi);
}

double plaplace_a(const SelfSimilarSolution& sol, double t, double x) {
    return plaplace_a(sol, t, std::span<const double>(&x, 1));
}

CoefficientField make_field(const Interpretation& interp, const SelfSimilarSolution& sol) {
    interp.validate(sol.family);
    const std::string name = interp.describe() + " on " + sol.family.name();
    switch (interp.tag) {
        case InterpretationTag::HeatBeta:
            return CoefficientField(name, sol, heat_beta_kernel(interp.beta), {interp.beta != 1.0, false}, interp);
        case InterpretationTag::HeatPC: {
            const bool trivial = interp.pc_c == 0.0;
            return CoefficientField(name, sol, heat_pc_kernel(sol, interp.pc_p, interp.pc_c), {!trivial, false},
                                    interp);
        }
        case InterpretationTag::PmeBeta:
        case InterpretationTag::PmeStratonovich:
            return CoefficientField(name, sol, pme_beta_kernel(sol, interp.effective_beta(sol.family)), {true, false},
                                    interp);
        case InterpretationTag::PmeAdditive:
            return CoefficientField(name, sol, pme_additive_kernel(sol), {true, true}, interp);
        case InterpretationTag::PLapBeta: {
            auto h = plaplace_profile(sol, 1.0);
            return CoefficientField(name, sol, plap_beta_kernel(sol, interp.beta, h), {true, false}, interp);
        }
        case InterpretationTag::PLapTheta: {
            std::shared_ptr<const PLaplaceProfile> h;
            if (interp.theta > 0.0) h = plaplace_profile(sol, interp.theta);
            return CoefficientField(name, sol, plap_theta_kernel(sol, interp.theta, h), {true, false}, interp);
        }
    }
    throw std::logic_error("unknown interpretation");
}

CoefficientField apply_f_transform(const CoefficientField& base, RadialFunction f, RadialFunction f_r,
                                   std::string name) {
    const auto& sol = base.solution();
    std::vector<double> bad;
    for (double t : {0.05, 0.25, 1.0, 4.0}) {
        const double R = sol.compact() ? support_radius(sol, t) : 6.0 * std::sqrt(t);
        for (int i = 0; i <= 64; ++i) {
            const double r = R * i / 64.0;
            const double u = sol.radial_density(t, r);
            if (u <= 0.0) continue;
            const double v = f(t, r) + base.radial(t, r).a * u;
            if (v < -1e-12 * (1.0 + std::abs(f(t, r)))) {
                bad.push_back(t);
                bad.push_back(r);
            }
        }
    }
    if (!bad.empty()) {
        std::ostringstream os;
        os << "f + a u < 0 at " << bad.size() / 2 << " check points (first t=" << bad[0] << ", r=" << bad[1] << ")";
        throw AdmissibilityError(os.str(), bad);
    }
    auto k = [sol, base, f = std::move(f), f_r = std::move(f_r)](double t, double r) {
        auto c = base.radial(t, r);
        const double u = sol.radial_density(t, r);
        if (u <= 0.0) return c;
        const double fv = f(t, r);
        const double frv = f_r(t, r);
        const double ur = sol.radial_gradient(t, r);
        c.a += fv / u;
        c.b += frv / u;
        c.a_r += (frv * u - fv * ur) / (u * u);
        return c;
    };
    return CoefficientField(std::move(name), sol, k, base.singularity());
}

std::vector<double> gradient_relation_defect(const CoefficientField& field, double t, std::span<const double> x) {
    auto b = field.drift(t, x);
    auto ga = field.diffusion_gradient(t, x);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= 0.5 * ga[i];
    return b;
}

double gradient_relation_defect(const CoefficientField& field, double t, double x) {
    return field.drift(t, x) - 0.5 * field.diffusion_gradient(t, x);
}

}  // namespace mvsde
