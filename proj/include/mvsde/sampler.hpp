#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mvsde/analytic.hpp"

namespace mvsde {

// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// Counter-based stream: the key is the master seed, the upper counter words are
// the stream index, and the lower words count blocks within the stream. Any
// stream can be created directly without advancing another.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

    std::uint64_t master_seed() const { return seed_; }
    std::uint64_t stream_index() const { return stream_; }

    std::uint64_t next_u64();
    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    double normal();

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

constexpr double kUniformClamp = 1e-12;

std::vector<double> sample_marginal(const SelfSimilarSolution& sol, double t, std::size_t n, RngStream& rng);
double sample_marginal(const SelfSimilarSolution& sol, double t, RngStream& rng);

// Scale variable of the closed-form pure-drift processes: eta ~ u^0(1, .).
double sample_profile_eta(const SelfSimilarSolution& sol, RngStream& rng);

std::vector<double> gaussian_increments(std::size_t n, double dt, RngStream& rng);

}  // namespace mvsde
