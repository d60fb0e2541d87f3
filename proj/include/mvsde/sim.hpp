#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mvsde/analytic.hpp"
#include "mvsde/coeffs.hpp"

namespace mvsde {

enum class FirstStepPolicy { SampleMarginal, EvaluateAtZ };

struct BoundaryPolicy {
    bool clamp = false;
    double max_magnitude = 0.0;  // 0 selects 1/dt

    static BoundaryPolicy none() { return {}; }
    static BoundaryPolicy clamp_drift(double cap = 0.0) { return {true, cap}; }
};

enum class DivergencePolicy { Throw, Record };

struct SimConfig {
    double T = 1.0;
    double dt = 1e-4;
    std::size_t n_paths = 1;
    double z = 0.0;
    std::uint64_t master_seed = 0;
    // Path i uses stream stream_offset + i.
    std::uint64_t stream_offset = 0;
    // Unset: SampleMarginal for fields singular at t = 0, EvaluateAtZ otherwise.
    std::optional<FirstStepPolicy> first_step_policy;
    // Unset: ClampDrift(1/dt) for fields singular at the support boundary, None otherwise.
    std::optional<BoundaryPolicy> boundary_policy;
    DivergencePolicy divergence_policy = DivergencePolicy::Throw;
    // 0: MVSDE_THREADS if set, else the hardware concurrency.
    unsigned threads = 0;

    std::size_t steps() const;
    void validate() const;
};

struct DivergenceRecord {
    std::size_t path = 0;
    std::size_t step = 0;
    double a = 0.0;
    double b = 0.0;
};

struct PathEnsemble {
    std::vector<double> times;  // elapsed times i * dt
    double t_start = 0.0;       // absolute time of times[0]
    std::size_t n_paths = 0;
    std::vector<double> positions;  // row-major, one row of times.size() values per path
    SimConfig config;
    std::vector<std::uint64_t> stream_indices;
    std::vector<DivergenceRecord> divergences;

    std::size_t points() const { return times.size(); }
    std::span<const double> path(std::size_t i) const;
    double at(std::size_t path, std::size_t step) const { return positions[path * times.size() + step]; }
    std::vector<double> column(std::size_t step) const;
    std::vector<double> final_positions() const { return column(times.size() - 1); }
};

unsigned default_thread_count();

// Explicit Euler-Maruyama with the first step drawn from u^z(dt, .) when the
// field is singular at t = 0.
PathEnsemble euler_maruyama(const CoefficientField& field, const SimConfig& cfg);

// Starts from u^z(s, .) and runs the recursion with coefficients field(s + r, .)
// for elapsed times r in [0, cfg.T].
PathEnsemble euler_maruyama_from_marginal(const CoefficientField& field, double s, const SimConfig& cfg);

// Path i starts at x0[i] (or x0[0] for every path) at absolute time t0 > 0.
PathEnsemble euler_maruyama_from_points(const CoefficientField& field, double t0, std::span<const double> x0,
                                        const SimConfig& cfg);

// X_t = z + eta t^{k/d} with eta ~ u^0(1, .).
PathEnsemble exact_pure_drift(const SelfSimilarSolution& sol, const SimConfig& cfg);

// Gaussian vector on the grid t_1..t_M with covariance
// t^{(1-beta)/2} s^{(1+beta)/2}, s <= t, by Cholesky factorization.
PathEnsemble exact_heat_beta(double beta, const SimConfig& cfg);

}  // namespace mvsde
