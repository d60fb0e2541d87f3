#pragma once

#include <span>
#include <vector>

#include "mvsde/coeffs.hpp"
#include "mvsde/sim.hpp"
#include "mvsde/verify.hpp"

namespace mvsde {

// N particles driven by one frozen coefficient field. The reference density
// along which the field is frozen is rho_s = u^z(time_scale * s, .) of the
// field's solution (time_scale = 1 for the fields of make_field).
struct ParticleSystem {
    CoefficientField field;
    std::size_t N = 0;
    SimConfig cfg;  // n_paths is ignored; N particles per replica
    double time_scale = 1.0;

    // Particle k of replica r uses stream cfg.stream_offset + r * N + k.
    SimConfig replica_config(std::size_t replica) const;
};

// a = 1, b = 0 frozen along the heat kernel: rho_s = u^z(2s, .).
ParticleSystem heat_particle_system(double z, std::size_t N, const SimConfig& cfg);

PathEnsemble run_particles(const ParticleSystem& sys, std::size_t replica = 0);

// <rho_t, phi> for the particle positions at grid index `step`.
double empirical_pairing(const PathEnsemble& traj, const TestFunction& phi, std::size_t step);

// Per-particle martingale m_k = phi(X_t) - phi(X_s0) - int_{s0}^t (a phi'' + b phi')(r, X_r) dr
// with the trapezoidal rule on the grid; s0 is the first grid time at which
// particles follow the SDE (dt after a sampled first step, else 0).
std::vector<double> particle_martingales(const ParticleSystem& sys, const PathEnsemble& traj,
                                         const TestFunction& phi, double t);

// (1/N) int_{s0}^t <rho_s, 2a |phi'|^2> ds by quadrature.
double noise_variance_target(const ParticleSystem& sys, const TestFunction& phi, double t, double tol = 1e-8);

constexpr std::size_t kMinReplicas = 100;

// Var(M^N_t), M^N_t = (1/N) sum_k m_k, from `replicas` independent runs of the system.
// observed is the pooled estimator Var(m)/N over all N * replicas particles;
// metadata also carries the across-replica sample variance and its 99%
// chi-square interval. pass requires |observed - target| <= rel_tol * target
// and the target inside that interval.
VerificationReport martingale_noise_variance(const ParticleSystem& sys, const TestFunction& phi, double t,
                                             std::size_t replicas, double rel_tol = 0.1);

// Same, from precomputed trajectories (one per replica).
VerificationReport martingale_noise_variance(const ParticleSystem& sys, std::span<const PathEnsemble> trajectories,
                                             const TestFunction& phi, double t, double rel_tol = 0.1);

}  // namespace mvsde
