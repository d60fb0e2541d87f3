#include "mvsde/particles.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mvsde/errors.hpp"
#include "mvsde/quadrature.hpp"

namespace mvsde {

SimConfig ParticleSystem::replica_config(std::size_t replica) const {
    SimConfig c = cfg;
    c.n_paths = N;
    c.stream_offset = cfg.stream_offset + static_cast<std::uint64_t>(replica) * N;
    return c;
}

ParticleSystem heat_particle_system(double z, std::size_t N, const SimConfig& cfg) {
    CoefficientField field("frozen heat (a = 1, b = 0)", build_solution(PdeFamily::heat(), z),
                           [](double, double) { return RadialCoefficients{1.0, 0.0, 0.0}; }, Singularity{});
    SimConfig c = cfg;
    c.z = z;
    return {std::move(field), N, c, 2.0};
}

PathEnsemble run_particles(const ParticleSystem& sys, std::size_t replica) {
    if (sys.N == 0) throw std::invalid_argument("particle count must be positive");
    return euler_maruyama(sys.field, sys.replica_config(replica));
}

double empirical_pairing(const PathEnsemble& traj, const TestFunction& phi, std::size_t step) {
    double s = 0.0;
    for (std::size_t k = 0; k < traj.n_paths; ++k) s += phi.value(traj.at(k, step));
    return s / static_cast<double>(traj.n_paths);
}

namespace {

std::size_t first_sde_index(const ParticleSystem& sys) {
    const auto policy = sys.cfg.first_step_policy.value_or(
        sys.field.singularity().at_t0 ? FirstStepPolicy::SampleMarginal : FirstStepPolicy::EvaluateAtZ);
    return policy == FirstStepPolicy::SampleMarginal ? 1 : 0;
}

std::size_t step_of(const PathEnsemble& traj, double t) {
    const double dt = traj.config.dt;
    const double j = std::round((t - traj.t_start) / dt);
    if (j < 0 || j >= static_cast<double>(traj.points()) ||
        std::abs(traj.t_start + j * dt - t) > 1e-9 * std::max(1.0, t)) {
        std::ostringstream os;
        os << "time " << t << " is not on the particle grid";
        throw std::invalid_argument(os.str());
    }
    return static_cast<std::size_t>(j);
}

}  // namespace

std::vector<double> particle_martingales(const ParticleSystem& sys, const PathEnsemble& traj,
                                         const TestFunction& phi, double t) {
    const std::size_t i0 = first_sde_index(sys);
    const std::size_t j = step_of(traj, t);
    if (j <= i0) throw std::invalid_argument("t must lie after the first simulated step");
    const double dt = traj.config.dt;
    std::vector<double> m(traj.n_paths);
    for (std::size_t k = 0; k < traj.n_paths; ++k) {
        auto gen = [&](std::size_t i) {
            const double x = traj.at(k, i);
            double a = 0.0, b = 0.0;
            sys.field.evaluate(traj.t_start + traj.times[i], x, a, b);
            return a * phi.d2(x) + b * phi.d1(x);
        };
        double integral = 0.0;
        double left = gen(i0);
        for (std::size_t i = i0; i < j; ++i) {
            const double right = gen(i + 1);
            integral += 0.5 * (left + right) * dt;
            left = right;
        }
        m[k] = phi.value(traj.at(k, j)) - phi.value(traj.at(k, i0)) - integral;
    }
    return m;
}

double noise_variance_target(const ParticleSystem& sys, const TestFunction& phi, double t, double tol) {
    const double s0 = static_cast<double>(first_sde_index(sys)) * sys.cfg.dt;
    if (!(t > s0)) throw std::invalid_argument("t must lie after the first simulated step");
    const auto& sol = sys.field.solution();
    const auto br = phi.breakpoints();
    auto inner = [&](double s) {
        double sum = 0.0;
        for (std::size_t i = 0; i + 1 < br.size(); ++i) {
            sum += expectation(
                sol, sys.time_scale * s,
                [&](double x) {
                    const double g = phi.d1(x);
                    return 2.0 * sys.field.diffusion(s, x) * g * g;
                },
                br[i], br[i + 1], tol);
        }
        return sum;
    };
    return quad::integrate(inner, s0, t, tol) / static_cast<double>(sys.N);
}

namespace {

VerificationReport summarize(const ParticleSystem& sys, const std::vector<std::vector<double>>& per_replica,
                             const TestFunction& phi, double t, double rel_tol) {
    const std::size_t R = per_replica.size();
    if (R < kMinReplicas) {
        std::ostringstream os;
        os << R << " replicas; at least " << kMinReplicas << " are required for the variance estimate";
        throw StatisticalPowerError(os.str());
    }
    const double N = static_cast<double>(sys.N);

    double sum = 0.0, sum2 = 0.0;
    std::vector<double> replica_means(R);
    for (std::size_t r = 0; r < R; ++r) {
        double rs = 0.0;
        for (double v : per_replica[r]) {
            rs += v;
            sum2 += v * v;
        }
        sum += rs;
        replica_means[r] = rs / N;
    }
    const double total = N * static_cast<double>(R);
    const double pooled_mean = sum / total;
    const double var_m = std::max(0.0, (sum2 - total * pooled_mean * pooled_mean) / (total - 1.0));
    const double pooled = var_m / N;

    double rm = 0.0;
    for (double v : replica_means) rm += v;
    rm /= static_cast<double>(R);
    double rv = 0.0;
    for (double v : replica_means) rv += (v - rm) * (v - rm);
    rv /= static_cast<double>(R - 1);
    const double df = static_cast<double>(R - 1);
    boost::math::chi_squared chi(df);
    const double ci_lo = df * rv / boost::math::quantile(chi, 0.995);
    const double ci_hi = df * rv / boost::math::quantile(chi, 0.005);

    const double target = noise_variance_target(sys, phi, t);
    VerificationReport rep;
    rep.name = "martingale_noise_variance";
    rep.observed = pooled;
    rep.target = target;
    rep.tolerance = rel_tol * target;
    const bool in_ci = target >= ci_lo && target <= ci_hi;
    rep.pass = std::abs(pooled - target) <= rep.tolerance && in_ci;
    rep.metadata = {{"N", N},
                    {"replicas", static_cast<double>(R)},
                    {"t", t},
                    {"dt", sys.cfg.dt},
                    {"master_seed", static_cast<double>(sys.cfg.master_seed)},
                    {"replica_variance", rv},
                    {"replica_ci99_lo", ci_lo},
                    {"replica_ci99_hi", ci_hi},
                    {"target_in_replica_ci", in_ci ? 1.0 : 0.0},
                    {"mean_M", rm}};
    return rep;
}

}  // namespace

VerificationReport martingale_noise_variance(const ParticleSystem& sys, const TestFunction& phi, double t,
                                             std::size_t replicas, double rel_tol) {
    if (replicas < kMinReplicas) {
        std::ostringstream os;
        os << replicas << " replicas; at least " << kMinReplicas << " are required for the variance estimate";
        throw StatisticalPowerError(os.str());
    }
    std::vector<std::vector<double>> m(replicas);
    for (std::size_t r = 0; r < replicas; ++r) m[r] = particle_martingales(sys, run_particles(sys, r), phi, t);
    return summarize(sys, m, phi, t, rel_tol);
}

VerificationReport martingale_noise_variance(const ParticleSystem& sys, std::span<const PathEnsemble> trajectories,
                                             const TestFunction& phi, double t, double rel_tol) {
    std::vector<std::vector<double>> m;
    m.reserve(trajectories.size());
    for (const auto& traj : trajectories) m.push_back(particle_martingales(sys, traj, phi, t));
    return summarize(sys, m, phi, t, rel_tol);
}

}  // namespace mvsde
