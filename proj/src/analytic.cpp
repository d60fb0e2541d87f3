#include "mvsde/analytic.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mvsde/errors.hpp"
#include "mvsde/quadrature.hpp"

namespace mvsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Exponents {
    double k;
    double q;
    double alpha;
};

Exponents exponents_of(const PdeFamily& f) {
    const double d = f.dim;
    switch (f.tag) {
        case FamilyTag::Heat:
            return {d / 2.0, 0.5, 0.0};
        case FamilyTag::PorousMedium: {
            const double m = f.param;
            const double k = 1.0 / (m - 1.0 + 2.0 / d);
            return {k, (k / d) * (m - 1.0) / (2.0 * m), k * (m - 1.0)};
        }
        case FamilyTag::PLaplace: {
            const double p = f.param;
            const double k = 1.0 / (p - 2.0 + p / d);
            return {k, ((p - 2.0) / p) * std::pow(k / d, 1.0 / (p - 1.0)), 1.0 - 2.0 * k / d};
        }
    }
    throw std::logic_error("unknown family");
}

// Surface area of the unit sphere in R^d (2 for d = 1).
double sphere_area(int d) {
    const double h = d / 2.0;
    return 2.0 * std::pow(std::numbers::pi, h) / boost::math::tgamma(h);
}

double radius_from(const PdeFamily& f, double C, double q) {
    switch (f.tag) {
        case FamilyTag::Heat:
            return kInf;
        case FamilyTag::PorousMedium:
            return std::sqrt(C / q);
        case FamilyTag::PLaplace: {
            const double p = f.param;
            return std::pow(C / q, (p - 1.0) / p);
        }
    }
    return kInf;
}

double base_of(const PdeFamily& f, double C, double q, double xi) {
    if (f.tag == FamilyTag::PorousMedium) return C - q * xi * xi;
    const double p = f.param;
    return C - q * std::pow(xi, p / (p - 1.0));
}

double profile_exponent(const PdeFamily& f) {
    if (f.tag == FamilyTag::PorousMedium) return 1.0 / (f.param - 1.0);
    const double p = f.param;
    return (p - 1.0) / (p - 2.0);
}

double compact_profile(const PdeFamily& f, double C, double q, double xi) {
    const double base = base_of(f, C, q, xi);
    if (base <= 0.0) return 0.0;
    return std::pow(base, profile_exponent(f));
}

void check_time(double t) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        std::ostringstream os;
        os << "time must be positive and finite, got " << t;
        throw std::domain_error(os.str());
    }
}

double radius_of(const SelfSimilarSolution& sol, std::span<const double> x) {
    if (static_cast<int>(x.size()) != sol.dim()) throw std::invalid_argument("point dimension mismatch");
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - sol.z[i];
        r2 += dx * dx;
    }
    return std::sqrt(r2);
}

std::vector<double> along_ray(const SelfSimilarSolution& sol, std::span<const double> x, double r,
                              double radial) {
    std::vector<double> out(x.size(), 0.0);
    if (r == 0.0 || radial == 0.0) return out;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = radial * (x[i] - sol.z[i]) / r;
    return out;
}

void require_1d(const SelfSimilarSolution& sol) {
    if (sol.dim() != 1) throw std::invalid_argument("operation is defined for d = 1 only");
}

// Integral of g over [0, xi] for d = 1.
double half_mass(const SelfSimilarSolution& sol, double xi) {
    if (sol.family.tag == FamilyTag::Heat) return 0.5 * std::erf(xi / std::numbers::sqrt2);
    const double r1 = sol.profile_radius();
    if (xi >= r1) return 0.5;
    return quad::integrate([&](double s) { return sol.profile(s); }, 0.0, xi, 1e-14);
}

}  // namespace

PdeFamily PdeFamily::heat(int d) {
    PdeFamily f{FamilyTag::Heat, 0.0, d};
    f.validate();
    return f;
}

PdeFamily PdeFamily::porous_medium(double m, int d) {
    PdeFamily f{FamilyTag::PorousMedium, m, d};
    f.validate();
    return f;
}

PdeFamily PdeFamily::p_laplace(double p, int d) {
    PdeFamily f{FamilyTag::PLaplace, p, d};
    f.validate();
    return f;
}

double PdeFamily::m() const {
    if (tag != FamilyTag::PorousMedium) throw std::logic_error("m is defined for the porous medium family only");
    return param;
}

double PdeFamily::p() const {
    if (tag != FamilyTag::PLaplace) throw std::logic_error("p is defined for the p-Laplace family only");
    return param;
}

void PdeFamily::validate() const {
    if (dim < 1) throw std::invalid_argument("dimension must be at least 1");
    if (tag == FamilyTag::PorousMedium && !(param > 1.0))
        throw std::invalid_argument("porous medium exponent must satisfy m > 1");
    if (tag == FamilyTag::PLaplace && !(param > 2.0))
        throw std::invalid_argument("p-Laplace exponent must satisfy p > 2");
    if (tag != FamilyTag::Heat && !std::isfinite(param)) throw std::invalid_argument("family parameter must be finite");
}

std::string PdeFamily::name() const {
    std::ostringstream os;
    switch (tag) {
        case FamilyTag::Heat:
            os << "heat";
            break;
        case FamilyTag::PorousMedium:
            os << "pme(m=" << param << ")";
            break;
        case FamilyTag::PLaplace:
            os << "plaplace(p=" << param << ")";
            break;
    }
    os << ", d=" << dim;
    return os.str();
}

double SelfSimilarSolution::profile_radius() const { return radius_from(family, C, q); }

double SelfSimilarSolution::profile(double xi) const {
    if (family.tag == FamilyTag::Heat) return C * std::exp(-q * xi * xi);
    return compact_profile(family, C, q, xi);
}

double SelfSimilarSolution::log_profile(double xi) const {
    if (family.tag == FamilyTag::Heat) return std::log(C) - q * xi * xi;
    const double base = base_of(family, C, q, xi);
    if (base <= 0.0) return -kInf;
    return profile_exponent(family) * std::log(base);
}

double SelfSimilarSolution::profile_derivative(double xi) const {
    switch (family.tag) {
        case FamilyTag::Heat:
            return -xi * profile(xi);
        case FamilyTag::PorousMedium: {
            const double g = profile(xi);
            if (g <= 0.0) return 0.0;
            const double m = family.param;
            return -(1.0 / m) * k_over_d() * xi * std::pow(g, 2.0 - m);
        }
        case FamilyTag::PLaplace: {
            const double g = profile(xi);
            if (g <= 0.0) return 0.0;
            return -std::pow(k_over_d() * xi * g, 1.0 / (family.param - 1.0));
        }
    }
    return 0.0;
}

double SelfSimilarSolution::radial_density(double t, double r) const {
    return std::pow(t, -k) * profile(r * std::pow(t, -k_over_d()));
}

double SelfSimilarSolution::radial_gradient(double t, double r) const {
    const double s = std::pow(t, -k_over_d());
    return std::pow(t, -k) * s * profile_derivative(r * s);
}

double profile_mass(const PdeFamily& family, double C) {
    family.validate();
    const auto ex = exponents_of(family);
    const int d = family.dim;
    if (family.tag == FamilyTag::Heat) return 1.0;
    if (!(C > 0.0)) return 0.0;
    const double R = radius_from(family, C, ex.q);
    auto integrand = [&](double xi) {
        return compact_profile(family, C, ex.q, xi) * (d == 1 ? 1.0 : std::pow(xi, d - 1));
    };
    return sphere_area(d) * quad::integrate(integrand, 0.0, R, 1e-12);
}

SelfSimilarSolution build_solution(const PdeFamily& family, std::vector<double> z) {
    family.validate();
    if (static_cast<int>(z.size()) != family.dim) throw std::invalid_argument("center dimension mismatch");
    const auto ex = exponents_of(family);
    SelfSimilarSolution sol;
    sol.family = family;
    sol.k = ex.k;
    sol.q = ex.q;
    sol.alpha = ex.alpha;
    sol.z = std::move(z);
    if (family.tag == FamilyTag::Heat) {
        sol.C = std::pow(2.0 * std::numbers::pi, -family.dim / 2.0);
        return sol;
    }

    double lo = 1e-12;
    double hi = 1.0;
    int doublings = 0;
    while (profile_mass(family, hi) <= 1.0) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 200) throw NormalizationError("upper bracket for the normalization constant not found", lo, hi);
    }
    if (profile_mass(family, lo) >= 1.0) throw NormalizationError("lower bracket has mass above one", lo, hi);
    bool converged = false;
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (profile_mass(family, mid) < 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NormalizationError("bisection on the normalization constant did not converge", lo, hi);
    sol.C = 0.5 * (lo + hi);
    return sol;
}

SelfSimilarSolution build_solution(const PdeFamily& family, double z) {
    return build_solution(family, std::vector<double>(family.dim, z));
}

double density(const SelfSimilarSolution& sol, double t, std::span<const double> x) {
    check_time(t);
    return sol.radial_density(t, radius_of(sol, x));
}

double density(const SelfSimilarSolution& sol, double t, double x) {
    require_1d(sol);
    check_time(t);
    return sol.radial_density(t, std::abs(x - sol.z[0]));
}

double support_radius(const SelfSimilarSolution& sol, double t) {
    if (!sol.compact()) throw std::invalid_argument("heat kernel has unbounded support");
    check_time(t);
    return sol.profile_radius() * std::pow(t, sol.k_over_d());
}

std::vector<double> grad_density(const SelfSimilarSolution& sol, double t, std::span<const double> x) {
    check_time(t);
    const double r = radius_of(sol, x);
    return along_ray(sol, x, r, sol.radial_gradient(t, r));
}

double grad_density(const SelfSimilarSolution& sol, double t, double x) {
    require_1d(sol);
    return grad_density(sol, t, std::span<const double>(&x, 1))[0];
}

std::vector<double> grad_density_power(const SelfSimilarSolution& sol, double t, std::span<const double> x,
                                       double exponent) {
    check_time(t);
    const double r = radius_of(sol, x);
    const double u = sol.radial_density(t, r);
    if (u <= 0.0) return std::vector<double>(x.size(), 0.0);
    const double radial = exponent * std::pow(u, exponent - 1.0) * sol.radial_gradient(t, r);
    return along_ray(sol, x, r, radial);
}

double grad_density_power(const SelfSimilarSolution& sol, double t, double x, double exponent) {
    require_1d(sol);
    return grad_density_power(sol, t, std::span<const double>(&x, 1), exponent)[0];
}

double cdf(const SelfSimilarSolution& sol, double t, double x) {
    require_1d(sol);
    check_time(t);
    const double dx = x - sol.z[0];
    if (sol.family.tag == FamilyTag::Heat) return 0.5 * std::erfc(-dx / std::sqrt(2.0 * t));
    const double xi = dx * std::pow(t, -sol.k_over_d());
    const double half = half_mass(sol, std::abs(xi));
    return xi < 0.0 ? 0.5 - half : 0.5 + half;
}

double inverse_cdf(const SelfSimilarSolution& sol, double t, double u) {
    require_1d(sol);
    check_time(t);
    if (!(u > 0.0 && u < 1.0)) {
        std::ostringstream os;
        os << "probability must lie in (0, 1), got " << u;
        throw std::domain_error(os.str());
    }
    const double target = std::abs(u - 0.5);
    if (target == 0.0) return sol.z[0];

    double lo = 0.0;
    double hi = sol.compact() ? sol.profile_radius() : 40.0;
    double xi = std::min(target / sol.profile(0.0), 0.5 * hi);
    double f = 0.0;
    bool converged = false;
    int it = 0;
    for (; it < 400; ++it) {
        f = half_mass(sol, xi) - target;
        if (std::abs(f) <= 1e-15) {
            converged = true;
            break;
        }
        if (f < 0.0) {
            lo = xi;
        } else {
            hi = xi;
        }
        if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, hi)) {
            converged = true;
            break;
        }
        const double g = sol.profile(xi);
        double next = g > 0.0 ? xi - f / g : lo;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        xi = next;
    }
    if (!converged) {
        std::ostringstream os;
        os << "inverse CDF did not converge: u=" << u << " t=" << t << " bracket=[" << lo << ", " << hi
           << "] residual=" << f << " iterations=" << it;
        throw NumericalError(os.str());
    }
    if (sol.compact()) xi = std::min(xi, std::nextafter(sol.profile_radius(), 0.0));
    const double scale = sol.family.tag == FamilyTag::Heat ? std::sqrt(t) : std::pow(t, sol.k_over_d());
    return u < 0.5 ? sol.z[0] - xi * scale : sol.z[0] + xi * scale;
}

double RebasedSolution::density(double t, double x) const { return mvsde::density(*sol, s + t, x); }

double RebasedSolution::cdf(double t, double x) const { return mvsde::cdf(*sol, s + t, x); }

RebasedSolution rebase(const SelfSimilarSolution& sol, double s) {
    check_time(s);
    return RebasedSolution{&sol, s};
}

}  // namespace mvsde
