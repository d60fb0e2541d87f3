#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvsde {

class NormalizationError : public std::runtime_error {
public:
    NormalizationError(const std::string& what, double lo, double hi)
        : std::runtime_error(what), lo_(lo), hi_(hi) {}
    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    double lo_;
    double hi_;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Coefficient pair fails a nonnegativity or compatibility requirement.
class AdmissibilityError : public std::invalid_argument {
public:
    AdmissibilityError(const std::string& what, std::vector<double> points = {})
        : std::invalid_argument(what), points_(std::move(points)) {}
    // Offending (t, x) pairs, flattened.
    const std::vector<double>& points() const { return points_; }

private:
    std::vector<double> points_;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t path, std::size_t step, double a, double b)
        : std::runtime_error(what), path_(path), step_(step), a_(a), b_(b) {}
    std::size_t path() const { return path_; }
    std::size_t step() const { return step_; }
    double a() const { return a_; }
    double b() const { return b_; }

private:
    std::size_t path_;
    std::size_t step_;
    double a_;
    double b_;
};

class StatisticalPowerError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace mvsde
