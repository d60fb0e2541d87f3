#include "mvsde/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <memory>
#include <sstream>

#include "mvsde/errors.hpp"

namespace mvsde::quad {

double integrate(const Integrand& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, tol);
    // One rule per nesting depth: the rule extends its abscissa tables lazily.
    thread_local std::vector<std::unique_ptr<boost::math::quadrature::tanh_sinh<double>>> rules;
    thread_local std::size_t depth = 0;
    if (rules.size() <= depth) rules.push_back(std::make_unique<boost::math::quadrature::tanh_sinh<double>>(15));
    auto& rule = *rules[depth];
    struct Guard {
        std::size_t& d;
        explicit Guard(std::size_t& x) : d(x) { ++d; }
        ~Guard() { --d; }
    } guard(depth);
    double err = 0.0;
    double l1 = 0.0;
    double value = rule.integrate(f, a, b, tol, &err, &l1);
    if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "quadrature produced a non-finite value on [" << a << ", " << b << "]";
        throw NumericalError(os.str());
    }
    return value;
}

double gauss_legendre_20(const Integrand& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

double integrate_pieces(const Integrand& f, const std::vector<double>& breaks, double tol) {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] > breaks[i]) sum += integrate(f, breaks[i], breaks[i + 1], tol);
    }
    return sum;
}

double gauss_legendre_32(const Integrand& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 32>::integrate(f, a, b);
}

}  // namespace mvsde::quad
