#include "mvsde/sim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mvsde/errors.hpp"
#include "mvsde/sampler.hpp"

namespace mvsde {

std::size_t SimConfig::steps() const {
    validate();
    return static_cast<std::size_t>(std::llround(T / dt));
}

void SimConfig::validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (n_paths == 0) throw std::invalid_argument("n_paths must be positive");
    if (!std::isfinite(z)) throw std::invalid_argument("z must be finite");
    const double ratio = T / dt;
    const double M = std::round(ratio);
    if (std::abs(ratio - M) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream os;
        os << "T/dt = " << ratio << " is not an integer step count";
        throw std::invalid_argument(os.str());
    }
    if (M < 2) throw std::invalid_argument("T/dt must be at least 2");
    if (boundary_policy && boundary_policy->clamp && boundary_policy->max_magnitude < 0.0)
        throw std::invalid_argument("drift cap must be nonnegative");
}

std::span<const double> PathEnsemble::path(std::size_t i) const {
    if (i >= n_paths) throw std::out_of_range("path index out of range");
    return {positions.data() + i * times.size(), times.size()};
}

std::vector<double> PathEnsemble::column(std::size_t step) const {
    if (step >= times.size()) throw std::out_of_range("step index out of range");
    std::vector<double> out(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) out[i] = at(i, step);
    return out;
}

unsigned default_thread_count() {
    if (const char* env = std::getenv("MVSDE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs body(i) for i in [0, n) over contiguous chunks; rethrows the first failure.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    const unsigned nt = static_cast<unsigned>(std::min<std::size_t>(threads == 0 ? default_thread_count() : threads, n));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + nt - 1) / nt;
    for (unsigned w = 0; w < nt; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

PathEnsemble make_ensemble(const SimConfig& cfg, double t_start) {
    PathEnsemble ens;
    const std::size_t M = cfg.steps();
    ens.times.resize(M + 1);
    for (std::size_t i = 0; i <= M; ++i) ens.times[i] = static_cast<double>(i) * cfg.dt;
    ens.t_start = t_start;
    ens.n_paths = cfg.n_paths;
    ens.positions.assign(cfg.n_paths * (M + 1), 0.0);
    ens.config = cfg;
    ens.stream_indices.resize(cfg.n_paths);
    for (std::size_t i = 0; i < cfg.n_paths; ++i) ens.stream_indices[i] = cfg.stream_offset + i;
    return ens;
}

void check_center(const CoefficientField& field, const SimConfig& cfg) {
    const auto& sol = field.solution();
    if (sol.dim() != 1) throw std::invalid_argument("simulation requires d = 1");
    if (sol.center() != cfg.z) {
        std::ostringstream os;
        os << "config start point z = " << cfg.z << " differs from the solution center " << sol.center();
        throw std::invalid_argument(os.str());
    }
}

struct Divergence {
    bool hit = false;
    DivergenceRecord rec;
};

// Shared EM loop. start(i, rng, row) fills the first `first` entries of row and
// returns the step index at which the recursion begins.
PathEnsemble run(const CoefficientField& field, double t_start, const SimConfig& cfg,
                 const std::function<std::size_t(std::size_t, RngStream&, double*)>& start) {
    PathEnsemble ens = make_ensemble(cfg, t_start);
    const std::size_t M = ens.times.size() - 1;
    const double dt = cfg.dt;
    const double sq = std::sqrt(dt);

    BoundaryPolicy bp = cfg.boundary_policy.value_or(field.singularity().at_boundary ? BoundaryPolicy::clamp_drift()
                                                                                    : BoundaryPolicy::none());
    const double cap = bp.max_magnitude > 0.0 ? bp.max_magnitude : 1.0 / dt;

    std::vector<Divergence> div(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        RngStream rng(cfg.master_seed, ens.stream_indices[i]);
        double* row = ens.positions.data() + i * (M + 1);
        std::size_t s = start(i, rng, row);
        double x = row[s];
        for (; s < M; ++s) {
            const double t = t_start + ens.times[s];
            double a = 0.0, b = 0.0;
            field.evaluate(t, x, a, b);
            if (bp.clamp) b = std::clamp(b, -cap, cap);
            const double dw = sq * rng.normal();
            const double next = x + b * dt + std::sqrt(2.0 * a) * dw;
            if (!std::isfinite(next) || !std::isfinite(a) || !std::isfinite(b)) {
                div[i] = {true, {i, s, a, b}};
                std::fill(row + s + 1, row + M + 1, std::numeric_limits<double>::quiet_NaN());
                return;
            }
            x = next;
            row[s + 1] = x;
        }
    });

    for (const auto& d : div) {
        if (!d.hit) continue;
        if (cfg.divergence_policy == DivergencePolicy::Throw) {
            std::ostringstream os;
            os << "path " << d.rec.path << " diverged at step " << d.rec.step << " (a = " << d.rec.a
               << ", b = " << d.rec.b << ")";
            throw DivergenceError(os.str(), d.rec.path, d.rec.step, d.rec.a, d.rec.b);
        }
        ens.divergences.push_back(d.rec);
    }
    return ens;
}

}  // namespace

PathEnsemble euler_maruyama(const CoefficientField& field, const SimConfig& cfg) {
    cfg.validate();
    check_center(field, cfg);
    const auto policy = cfg.first_step_policy.value_or(field.singularity().at_t0 ? FirstStepPolicy::SampleMarginal
                                                                                 : FirstStepPolicy::EvaluateAtZ);
    const auto& sol = field.solution();
    const double dt = cfg.dt;
    return run(field, 0.0, cfg, [&](std::size_t, RngStream& rng, double* row) -> std::size_t {
        row[0] = cfg.z;
        if (policy == FirstStepPolicy::EvaluateAtZ) return 0;
        row[1] = sample_marginal(sol, dt, rng);
        return 1;
    });
}

PathEnsemble euler_maruyama_from_marginal(const CoefficientField& field, double s, const SimConfig& cfg) {
    if (!(s > 0.0)) throw std::invalid_argument("start time s must be positive");
    cfg.validate();
    check_center(field, cfg);
    const auto& sol = field.solution();
    return run(field, s, cfg, [&](std::size_t, RngStream& rng, double* row) -> std::size_t {
        row[0] = sample_marginal(sol, s, rng);
        return 0;
    });
}

PathEnsemble euler_maruyama_from_points(const CoefficientField& field, double t0, std::span<const double> x0,
                                        const SimConfig& cfg) {
    if (!(t0 > 0.0)) throw std::invalid_argument("start time t0 must be positive");
    cfg.validate();
    check_center(field, cfg);
    if (x0.size() != 1 && x0.size() != cfg.n_paths)
        throw std::invalid_argument("x0 must hold one point or one point per path");
    return run(field, t0, cfg, [&](std::size_t i, RngStream&, double* row) -> std::size_t {
        row[0] = x0.size() == 1 ? x0[0] : x0[i];
        return 0;
    });
}

PathEnsemble exact_pure_drift(const SelfSimilarSolution& sol, const SimConfig& cfg) {
    cfg.validate();
    if (sol.dim() != 1) throw std::invalid_argument("exact_pure_drift requires d = 1");
    if (sol.center() != cfg.z) throw std::invalid_argument("config start point differs from the solution center");
    PathEnsemble ens = make_ensemble(cfg, 0.0);
    const std::size_t P = ens.times.size();
    const double e = sol.k_over_d();
    std::vector<double> scale(P);
    for (std::size_t j = 0; j < P; ++j) scale[j] = std::pow(ens.times[j], e);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        RngStream rng(cfg.master_seed, ens.stream_indices[i]);
        const double eta = sample_profile_eta(sol, rng);
        double* row = ens.positions.data() + i * P;
        row[0] = cfg.z;
        for (std::size_t j = 1; j < P; ++j) row[j] = cfg.z + eta * scale[j];
    });
    return ens;
}

PathEnsemble exact_heat_beta(double beta, const SimConfig& cfg) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
    cfg.validate();
    PathEnsemble ens = make_ensemble(cfg, 0.0);
    const std::size_t P = ens.times.size();
    const std::size_t M = P - 1;
    if (M > 4000) throw std::invalid_argument("exact_heat_beta: grid too large for a dense covariance");

    Eigen::MatrixXd S(M, M);
    const double lo = 0.5 * (1.0 + beta);
    const double hi = 0.5 * (1.0 - beta);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < M; ++j) {
            const double s = ens.times[std::min(i, j) + 1];
            const double t = ens.times[std::max(i, j) + 1];
            S(i, j) = std::pow(t, hi) * std::pow(s, lo);
        }
    }
    const double scale = S.diagonal().mean();
    Eigen::MatrixXd L;
    bool ok = false;
    for (double jitter : {0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10}) {
        Eigen::MatrixXd A = S;
        A.diagonal().array() += jitter * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() == Eigen::Success) {
            L = llt.matrixL();
            ok = true;
            break;
        }
    }
    if (!ok) throw NumericalError("covariance matrix is not positive definite after jitter 1e-10");

    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
        RngStream rng(cfg.master_seed, ens.stream_indices[i]);
        Eigen::VectorXd xi(M);
        for (std::size_t j = 0; j < M; ++j) xi[j] = rng.normal();
        const Eigen::VectorXd x = L.triangularView<Eigen::Lower>() * xi;
        double* row = ens.positions.data() + i * P;
        row[0] = cfg.z;
        for (std::size_t j = 0; j < M; ++j) row[j + 1] = cfg.z + x[j];
    });
    return ens;
}

}  // namespace mvsde
