#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/analytic.hpp"

namespace mvsde {

enum class InterpretationTag { HeatBeta, HeatPC, PmeBeta, PmeAdditive, PmeStratonovich, PLapBeta, PLapTheta };

struct Interpretation {
    InterpretationTag tag = InterpretationTag::HeatBeta;
    double beta = 1.0;
    double theta = 1.0;
    double pc_p = 1.0;
    double pc_c = 0.0;

    static Interpretation heat_beta(double beta);
    static Interpretation heat_pc(double p, double c);
    static Interpretation pme_beta(double beta);
    static Interpretation pme_additive();
    static Interpretation pme_stratonovich();
    static Interpretation plap_beta(double beta);
    static Interpretation plap_theta(double theta);

    // Throws std::invalid_argument if the tag does not belong to the family or
    // its parameters are outside the admissible range.
    void validate(const PdeFamily& family) const;
    // Effective beta of the beta-families (PmeStratonovich resolves to 2m/(m+1)).
    double effective_beta(const PdeFamily& family) const;
    std::string describe() const;
};

struct Singularity {
    bool at_t0 = false;
    bool at_boundary = false;
};

// Radial representation: a(t, x) = a, b(t, x) = b (x - z)/|x - z|, da/dr = a_r.
struct RadialCoefficients {
    double a = 0.0;
    double b = 0.0;
    double a_r = 0.0;
};

using RadialKernel = std::function<RadialCoefficients(double t, double r)>;
using RadialFunction = std::function<double(double t, double r)>;

class CoefficientField {
public:
    CoefficientField(std::string name, SelfSimilarSolution sol, RadialKernel kernel, Singularity singularity,
                     std::optional<Interpretation> interpretation = std::nullopt);

    const std::string& name() const { return name_; }
    const SelfSimilarSolution& solution() const { return sol_; }
    const std::optional<Interpretation>& interpretation() const { return interp_; }
    Singularity singularity() const { return singularity_; }

    RadialCoefficients radial(double t, double r) const { return kernel_(t, r); }

    double diffusion(double t, double x) const;
    double drift(double t, double x) const;
    double diffusion_gradient(double t, double x) const;
    // One-dimensional (a, b) in a single kernel call.
    void evaluate(double t, double x, double& a, double& b) const;

    double diffusion(double t, std::span<const double> x) const;
    std::vector<double> drift(double t, std::span<const double> x) const;
    std::vector<double> diffusion_gradient(double t, std::span<const double> x) const;

    // (r, x) -> field(s + r, x).
    CoefficientField time_shifted(double s) const;
    // Multiplies a (and da/dr) and b by constant factors.
    CoefficientField scaled(double a_factor, double b_factor) const;

private:
    std::string name_;
    SelfSimilarSolution sol_;
    RadialKernel kernel_;
    Singularity singularity_;
    std::optional<Interpretation> interp_;
};

// Self-similar profile h_theta of the p-Laplace diffusion coefficient,
// a_theta(t, x) = t^{-alpha} h_theta(t^{-k/d} |x - z|), tabulated on a grid
// clustered at both ends of [0, R(1)] and interpolated by monotone cubic
// Hermite segments with analytic nodal slopes.
class PLaplaceProfile {
public:
    PLaplaceProfile(const SelfSimilarSolution& sol, double theta, std::size_t nodes = 4096);

    double theta() const { return theta_; }
    double radius() const { return radius_; }
    std::size_t size() const { return xi_.size(); }
    double value(double xi) const;
    double derivative(double xi) const;
    // Reference evaluation by direct quadrature (no table).
    double direct(double xi) const;

private:
    std::size_t locate(double xi) const;

    SelfSimilarSolution sol_;
    double theta_;
    double radius_;
    std::vector<double> xi_;
    std::vector<double> h_;
    std::vector<double> dh_;
};

// Shared, eagerly built table for (sol.family, theta).
std::shared_ptr<const PLaplaceProfile> plaplace_profile(const SelfSimilarSolution& sol, double theta);

double plaplace_h(double p, double xi, int d = 1);
double plaplace_a(const SelfSimilarSolution& sol, double t, std::span<const double> x);
double plaplace_a(const SelfSimilarSolution& sol, double t, double x);

CoefficientField make_field(const Interpretation& interp, const SelfSimilarSolution& sol);

// Generic f-transformation: a + f/u, b + grad f / u, both corrections zero on {u = 0}.
// f and f_r are radial (f_r = df/dr).
CoefficientField apply_f_transform(const CoefficientField& base, RadialFunction f, RadialFunction f_r,
                                   std::string name = "f-transformed");

// b - grad(a)/2.
std::vector<double> gradient_relation_defect(const CoefficientField& field, double t, std::span<const double> x);
double gradient_relation_defect(const CoefficientField& field, double t, double x);

}  // namespace mvsde
