#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/coeffs.hpp"
#include "mvsde/sim.hpp"

namespace mvsde::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDivergence = 3, kVerificationFailure = 4 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string pde;                     // heat | pme | plaplace
    double m = 0.0;
    double p = 0.0;
    std::string interpretation = "beta";  // beta | pc | additive | stratonovich | theta
    double beta = 1.0;
    std::vector<double> betas{0.0, 0.1, 1.0, 1.5};
    double theta = 1.0;
    double pc_p = 1.0;
    double pc_c = 0.0;
    double z = 0.0;
    double T = 1.0;
    double dt = 1e-4;
    std::size_t n_paths = 30;
    std::uint64_t seed = 0;
    std::uint64_t stream_offset = 0;
    std::string out_dir = "out";
    std::string first_step_policy = "auto";  // auto | sample_marginal | evaluate_at_z
    std::string boundary_policy = "auto";    // auto | none | clamp
    double drift_cap = 0.0;                  // 0: 1/dt
    std::string method = "auto";             // auto | em | exact
    double significance = 0.01;
    std::string checks = "auto";
    double qv_tolerance = 0.05;
    double residual_tolerance = 1e-3;
    std::size_t n_particles = 2000;
    std::size_t replicas = 200;
    std::string phi = "bump";  // bump | linear
    double phi_center = 0.0;
    double phi_width = 0.4;
    double phi_taper = 0.0;  // linear only; 0: phi_width / 4
    double variance_tolerance = 0.1;

    // Parses `key = value` lines; '#' starts a comment. Unknown keys, repeated
    // keys and malformed values raise ConfigError.
    static RunConfig parse(std::istream& in);
    static RunConfig load(const std::filesystem::path& path);

    // Canonical key/value listing (17 significant digits for reals).
    std::vector<std::pair<std::string, std::string>> entries() const;

    PdeFamily family() const;
    Interpretation interpretation_for(double beta_value) const;
    SimConfig sim_config() const;
    // Checks the admissibility of the PDE, interpretation and grid; throws ConfigError.
    void validate() const;
};

struct Table {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

std::string format_number(double v);
void write_table(const std::filesystem::path& path, const Table& table);
Table read_table(const std::filesystem::path& path);

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_verify(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_particles(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Full command line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace mvsde::cli
