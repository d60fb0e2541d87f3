#include "mvsde/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mvsde/errors.hpp"
#include "mvsde/particles.hpp"
#include "mvsde/verify.hpp"

namespace mvsde::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x))
        throw ConfigError("key '" + key + "': '" + v + "' is not a finite number");
    return x;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    if (v.empty() || v[0] == '-' || v[0] == '+') throw ConfigError("key '" + key + "': '" + v + "' is not a count");
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (*end != '\0' || errno == ERANGE) throw ConfigError("key '" + key + "': '" + v + "' is not a count");
    return x;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
    return s;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    auto real = [](double RunConfig::*f) {
        return Setter([f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = parse_real(k, v); });
    };
    auto count = [](std::size_t RunConfig::*f) {
        return Setter([f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = parse_count(k, v); });
    };
    auto u64 = [](std::uint64_t RunConfig::*f) {
        return Setter([f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = parse_count(k, v); });
    };
    auto text = [](std::string RunConfig::*f) {
        return Setter([f](RunConfig& c, const std::string&, const std::string& v) { c.*f = v; });
    };
    static const std::map<std::string, Setter> table = {
        {"pde", text(&RunConfig::pde)},
        {"m", real(&RunConfig::m)},
        {"p", real(&RunConfig::p)},
        {"interpretation", text(&RunConfig::interpretation)},
        {"beta", real(&RunConfig::beta)},
        {"betas", Setter([](RunConfig& c, const std::string& k, const std::string& v) { c.betas = parse_list(k, v); })},
        {"theta", real(&RunConfig::theta)},
        {"pc_p", real(&RunConfig::pc_p)},
        {"pc_c", real(&RunConfig::pc_c)},
        {"z", real(&RunConfig::z)},
        {"T", real(&RunConfig::T)},
        {"dt", real(&RunConfig::dt)},
        {"n_paths", count(&RunConfig::n_paths)},
        {"seed", u64(&RunConfig::seed)},
        {"stream_offset", u64(&RunConfig::stream_offset)},
        {"out_dir", text(&RunConfig::out_dir)},
        {"first_step_policy", text(&RunConfig::first_step_policy)},
        {"boundary_policy", text(&RunConfig::boundary_policy)},
        {"drift_cap", real(&RunConfig::drift_cap)},
        {"method", text(&RunConfig::method)},
        {"significance", real(&RunConfig::significance)},
        {"checks", text(&RunConfig::checks)},
        {"qv_tolerance", real(&RunConfig::qv_tolerance)},
        {"residual_tolerance", real(&RunConfig::residual_tolerance)},
        {"n_particles", count(&RunConfig::n_particles)},
        {"replicas", count(&RunConfig::replicas)},
        {"phi", text(&RunConfig::phi)},
        {"phi_center", real(&RunConfig::phi_center)},
        {"phi_width", real(&RunConfig::phi_width)},
        {"phi_taper", real(&RunConfig::phi_taper)},
        {"variance_tolerance", real(&RunConfig::variance_tolerance)},
    };
    return table;
}

void require_one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> options) {
    for (const char* o : options)
        if (v == o) return;
    std::string msg = "key '" + key + "': '" + v + "' is not one of";
    for (const char* o : options) msg += std::string(" ") + o;
    throw ConfigError(msg);
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in) {
    RunConfig c;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
        it->second(c, key, value);
    }
    if (c.pde.empty()) throw ConfigError("missing required key 'pde'");
    if (!seen.count("phi_center")) c.phi_center = c.z;
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse(in);
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    return {{"pde", pde},
            {"m", format_number(m)},
            {"p", format_number(p)},
            {"interpretation", interpretation},
            {"beta", format_number(beta)},
            {"betas", join(betas)},
            {"theta", format_number(theta)},
            {"pc_p", format_number(pc_p)},
            {"pc_c", format_number(pc_c)},
            {"z", format_number(z)},
            {"T", format_number(T)},
            {"dt", format_number(dt)},
            {"n_paths", std::to_string(n_paths)},
            {"seed", std::to_string(seed)},
            {"stream_offset", std::to_string(stream_offset)},
            {"out_dir", out_dir},
            {"first_step_policy", first_step_policy},
            {"boundary_policy", boundary_policy},
            {"drift_cap", format_number(drift_cap)},
            {"method", method},
            {"significance", format_number(significance)},
            {"checks", checks},
            {"qv_tolerance", format_number(qv_tolerance)},
            {"residual_tolerance", format_number(residual_tolerance)},
            {"n_particles", std::to_string(n_particles)},
            {"replicas", std::to_string(replicas)},
            {"phi", phi},
            {"phi_center", format_number(phi_center)},
            {"phi_width", format_number(phi_width)},
            {"phi_taper", format_number(phi_taper)},
            {"variance_tolerance", format_number(variance_tolerance)}};
}

PdeFamily RunConfig::family() const {
    if (pde != "heat" && pde != "pme" && pde != "plaplace")
        throw ConfigError("key 'pde': '" + pde + "' is not one of heat pme plaplace");
    PdeFamily f;
    try {
        if (pde == "heat") f = PdeFamily::heat();
        else if (pde == "pme") f = PdeFamily::porous_medium(m);
        else f = PdeFamily::p_laplace(p);
        f.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return f;
}

Interpretation RunConfig::interpretation_for(double b) const {
    const PdeFamily f = family();
    Interpretation in;
    if (interpretation == "beta") {
        if (f.tag == FamilyTag::Heat) in = Interpretation::heat_beta(b);
        else if (f.tag == FamilyTag::PorousMedium) in = Interpretation::pme_beta(b);
        else in = Interpretation::plap_beta(b);
    } else if (interpretation == "pc") {
        in = Interpretation::heat_pc(pc_p, pc_c);
    } else if (interpretation == "additive") {
        in = Interpretation::pme_additive();
    } else if (interpretation == "stratonovich") {
        in = Interpretation::pme_stratonovich();
    } else if (interpretation == "theta") {
        in = Interpretation::plap_theta(theta);
    } else {
        throw ConfigError("key 'interpretation': '" + interpretation +
                          "' is not one of beta pc additive stratonovich theta");
    }
    try {
        in.validate(f);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return in;
}

SimConfig RunConfig::sim_config() const {
    SimConfig s;
    s.T = T;
    s.dt = dt;
    s.n_paths = n_paths;
    s.z = z;
    s.master_seed = seed;
    s.stream_offset = stream_offset;
    if (first_step_policy == "sample_marginal") s.first_step_policy = FirstStepPolicy::SampleMarginal;
    else if (first_step_policy == "evaluate_at_z") s.first_step_policy = FirstStepPolicy::EvaluateAtZ;
    if (boundary_policy == "none") s.boundary_policy = BoundaryPolicy::none();
    else if (boundary_policy == "clamp") s.boundary_policy = BoundaryPolicy::clamp_drift(drift_cap);
    s.divergence_policy = DivergencePolicy::Record;
    return s;
}

void RunConfig::validate() const {
    family();
    interpretation_for(beta);
    if (interpretation == "beta")
        for (double b : betas) interpretation_for(b);
    require_one_of("first_step_policy", first_step_policy, {"auto", "sample_marginal", "evaluate_at_z"});
    require_one_of("boundary_policy", boundary_policy, {"auto", "none", "clamp"});
    require_one_of("method", method, {"auto", "em", "exact"});
    require_one_of("phi", phi, {"bump", "linear"});
    if (drift_cap < 0.0) throw ConfigError("key 'drift_cap' must be nonnegative");
    if (!(significance > 0.0 && significance < 1.0)) throw ConfigError("key 'significance' must lie in (0, 1)");
    if (!(qv_tolerance > 0.0)) throw ConfigError("key 'qv_tolerance' must be positive");
    if (!(residual_tolerance > 0.0)) throw ConfigError("key 'residual_tolerance' must be positive");
    if (!(variance_tolerance > 0.0)) throw ConfigError("key 'variance_tolerance' must be positive");
    if (!(phi_width > 0.0)) throw ConfigError("key 'phi_width' must be positive");
    if (phi_taper < 0.0) throw ConfigError("key 'phi_taper' must be nonnegative");
    try {
        sim_config().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

void write_table(const fs::path& path, const Table& table) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& [k, v] : table.metadata) out << "# " << k << ": " << v << '\n';
    for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Table read_table(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            const auto sep = line.find(": ", 2);
            if (sep == std::string::npos) throw std::runtime_error("malformed metadata line: " + line);
            t.metadata.emplace_back(line.substr(2, sep - 2), line.substr(sep + 2));
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!have_header) {
            while (std::getline(ss, cell, ',')) t.header.push_back(cell);
            have_header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0') throw std::runtime_error("malformed number '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != t.header.size()) throw std::runtime_error("row width differs from the header");
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace {

struct Simulation {
    PathEnsemble ens;
    std::string method;
};

bool is_pure_drift(const Interpretation& in, const PdeFamily& f) {
    switch (in.tag) {
        case InterpretationTag::HeatBeta:
        case InterpretationTag::PmeBeta:
        case InterpretationTag::PLapBeta:
            return in.effective_beta(f) == 0.0;
        default:
            return false;
    }
}

Simulation simulate(const RunConfig& cfg, const CoefficientField& field, std::uint64_t offset) {
    const auto& in = *field.interpretation();
    const auto& sol = field.solution();
    SimConfig sc = cfg.sim_config();
    sc.stream_offset = offset;
    const bool drift_only = is_pure_drift(in, sol.family);
    std::string method = cfg.method;
    if (method == "auto") method = drift_only ? "exact" : "em";
    if (method == "exact") {
        if (drift_only) return {exact_pure_drift(sol, sc), "exact_pure_drift"};
        if (in.tag == InterpretationTag::HeatBeta) return {exact_heat_beta(in.beta, sc), "exact_heat_beta"};
        throw ConfigError("method 'exact' is available only for pure-drift and heat beta interpretations");
    }
    return {euler_maruyama(field, sc), "euler_maruyama"};
}

json report_json(const VerificationReport& r) {
    json m = json::object();
    for (const auto& [k, v] : r.metadata) m[k] = v;
    return {{"name", r.name}, {"observed", r.observed}, {"target", r.target}, {"tolerance", r.tolerance},
            {"pass", r.pass}, {"metadata", m}};
}

json config_json(const RunConfig& cfg) {
    json c = json::object();
    for (const auto& [k, v] : cfg.entries())
        if (k != "out_dir") c[k] = v;
    return c;
}

json solution_json(const SelfSimilarSolution& sol) {
    return {{"family", sol.family.name()}, {"k", sol.k}, {"q", sol.q}, {"C", sol.C}, {"alpha", sol.alpha}};
}

std::vector<std::pair<std::string, std::string>> base_metadata(const std::string& command, const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> md{{"command", command}, {"version", MVSDE_VERSION}};
    for (const auto& e : cfg.entries())
        if (e.first != "out_dir") md.push_back(e);
    return md;
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

CoefficientField build_field(const RunConfig& cfg, double beta, const SelfSimilarSolution& sol) {
    return make_field(cfg.interpretation_for(beta), sol);
}

void reject_theta(const RunConfig& cfg, const char* command) {
    if (cfg.interpretation == "theta")
        throw ConfigError(std::string("the theta interpretations are not simulated; '") + command +
                          "' needs an SDE interpretation");
}

VerificationReport qv_report(const PathEnsemble& ens, const CoefficientField& field, bool drift_only,
                             double rel_tol) {
    const std::span<const double> grid = std::span<const double>(ens.times).subspan(1);
    double mean = 0.0;
    for (std::size_t p = 0; p < ens.n_paths; ++p) mean += realized_qv(ens.path(p).subspan(1), grid);
    mean /= static_cast<double>(ens.n_paths);
    const double T = ens.times.back();
    const double dt = ens.config.dt;
    const double target = drift_only ? 0.0 : expected_qv(field, dt, T);
    VerificationReport r;
    r.name = "quadratic_variation";
    r.observed = mean;
    r.target = target;
    r.tolerance = target > 0.0 ? rel_tol * target : rel_tol;
    r.pass = std::abs(mean - target) <= r.tolerance;
    r.metadata = {{"n_paths", static_cast<double>(ens.n_paths)}, {"t0", dt}, {"t1", T}, {"relative", target > 0.0}};
    return r;
}

VerificationReport support_report(const PathEnsemble& ens, const SelfSimilarSolution& sol) {
    std::size_t outside = 0, total = 0;
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
        for (std::size_t i = 1; i < ens.points(); ++i) {
            ++total;
            outside += std::abs(ens.at(p, i) - sol.center()) > 1.02 * support_radius(sol, ens.times[i]);
        }
    }
    VerificationReport r;
    r.name = "support_containment";
    r.observed = static_cast<double>(outside) / static_cast<double>(total);
    r.target = 0.0;
    r.tolerance = 0.01;
    r.pass = r.observed <= r.tolerance;
    r.metadata = {{"points", static_cast<double>(total)}, {"outside", static_cast<double>(outside)}, {"margin", 1.02}};
    return r;
}

std::set<std::string> resolve_checks(const RunConfig& cfg, const SelfSimilarSolution& sol, bool exact_heat) {
    static const std::set<std::string> known{"ks", "qv", "moments", "support", "residual", "flow", "covariance"};
    std::set<std::string> out;
    if (cfg.checks == "auto") {
        if (cfg.interpretation == "theta") return {"residual"};
        out = {"ks", "qv", "moments", "residual", "flow"};
        if (sol.compact()) out.insert("support");
        if (exact_heat) out.insert("covariance");
        return out;
    }
    std::stringstream ss(cfg.checks);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!known.count(item)) throw ConfigError("key 'checks': unknown check '" + item + "'");
        out.insert(item);
    }
    if (cfg.interpretation == "theta" && (out.size() != 1 || !out.count("residual")))
        throw ConfigError("theta interpretations support only the residual check");
    if (out.count("support") && !sol.compact()) throw ConfigError("support check needs a compact family");
    if (out.count("covariance") && !exact_heat) throw ConfigError("covariance check needs pde = heat, method = exact");
    return out;
}

int finish(const std::vector<VerificationReport>& reports, std::ostream& log) {
    bool all = true;
    for (const auto& r : reports) {
        log << (r.pass ? "PASS " : "FAIL ") << r.name << " observed=" << format_number(r.observed)
            << " target=" << format_number(r.target) << " tolerance=" << format_number(r.tolerance) << '\n';
        all = all && r.pass;
    }
    return all ? kOk : kVerificationFailure;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    reject_theta(cfg, "simulate");
    const auto sol = build_solution(cfg.family(), cfg.z);
    const auto field = build_field(cfg, cfg.beta, sol);
    const auto sim = simulate(cfg, field, cfg.stream_offset);
    const auto& ens = sim.ens;

    Table t;
    t.metadata = base_metadata("simulate", cfg);
    t.metadata.emplace_back("field", field.name());
    t.metadata.emplace_back("method", sim.method);
    t.header.push_back("t");
    for (std::size_t p = 0; p < ens.n_paths; ++p) t.header.push_back("path_" + std::to_string(p));
    if (sol.compact()) t.header.push_back("R");
    for (std::size_t i = 0; i < ens.points(); ++i) {
        std::vector<double> row{ens.times[i]};
        for (std::size_t p = 0; p < ens.n_paths; ++p) row.push_back(ens.at(p, i));
        if (sol.compact()) row.push_back(i == 0 ? 0.0 : support_radius(sol, ens.times[i]));
        t.rows.push_back(std::move(row));
    }
    write_table(out / "paths.csv", t);

    json div = json::array();
    for (const auto& d : ens.divergences) div.push_back({{"path", d.path}, {"step", d.step}, {"a", d.a}, {"b", d.b}});
    write_json(out / "paths.json", {{"command", "simulate"},
                                    {"version", MVSDE_VERSION},
                                    {"config", config_json(cfg)},
                                    {"seed", cfg.seed},
                                    {"stream_offset", cfg.stream_offset},
                                    {"field", field.name()},
                                    {"method", sim.method},
                                    {"solution", solution_json(sol)},
                                    {"table", "paths.csv"},
                                    {"support_radius_column", sol.compact()},
                                    {"divergences", div}});
    log << "wrote " << (out / "paths.csv").string() << " (" << ens.n_paths << " paths, " << ens.points()
        << " times)\n";
    if (!ens.divergences.empty()) {
        log << ens.divergences.size() << " path(s) diverged\n";
        return kDivergence;
    }
    return kOk;
}

int cmd_verify(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    const auto sol = build_solution(cfg.family(), cfg.z);
    const auto field = build_field(cfg, cfg.beta, sol);
    const bool drift_only = is_pure_drift(*field.interpretation(), sol.family);
    const bool exact_heat = cfg.pde == "heat" && cfg.method == "exact" && cfg.interpretation == "beta" && !drift_only;
    const auto checks = resolve_checks(cfg, sol, exact_heat);
    const bool need_paths = checks.count("ks") || checks.count("qv") || checks.count("moments") ||
                            checks.count("support") || checks.count("covariance");
    if ((checks.count("ks") || checks.count("flow")) && cfg.n_paths < kMinKsSamples)
        throw ConfigError("KS-based checks need n_paths >= " + std::to_string(kMinKsSamples));

    std::vector<VerificationReport> reports;
    std::string method = "none";
    if (need_paths) {
        reject_theta(cfg, "verify");
        const auto sim = simulate(cfg, field, cfg.stream_offset);
        method = sim.method;
        const auto& ens = sim.ens;
        if (!ens.divergences.empty()) {
            const auto& d = ens.divergences.front();
            log << ens.divergences.size() << " path(s) diverged; first: path " << d.path << " step " << d.step << '\n';
            return kDivergence;
        }
        const auto end = ens.final_positions();
        if (checks.count("ks")) reports.push_back(ks_test(end, sol, cfg.T, cfg.significance));
        if (checks.count("moments"))
            for (auto& r : moment_check(end, sol, cfg.T, {1, 2})) reports.push_back(std::move(r));
        if (checks.count("qv")) reports.push_back(qv_report(ens, field, drift_only, cfg.qv_tolerance));
        if (checks.count("support")) reports.push_back(support_report(ens, sol));
        if (checks.count("covariance")) {
            std::vector<std::pair<double, double>> pairs{{cfg.T / 4, cfg.T}, {cfg.T / 2, cfg.T}, {cfg.T / 4, cfg.T / 2}};
            try {
                for (auto& r : covariance_check(ens, cfg.beta, pairs)) reports.push_back(std::move(r));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("covariance check: ") + e.what());
            }
        }
    }
    if (checks.count("residual")) {
        const double s = cfg.T / 4, t = cfg.T;
        for (const auto& phi : standard_test_functions(sol, t)) {
            VerificationReport r;
            r.name = "fpe_residual " + phi.describe();
            r.observed = fpe_weak_residual(field, phi, s, t);
            r.target = 0.0;
            r.tolerance = cfg.residual_tolerance;
            r.pass = r.observed <= r.tolerance;
            r.metadata = {{"s", s}, {"t", t}, {"quadrature_tolerance", 1e-6}};
            reports.push_back(std::move(r));
        }
    }
    if (checks.count("flow")) {
        reject_theta(cfg, "verify");
        SimConfig sc = cfg.sim_config();
        try {
            sc.T = cfg.T / 2;
            sc.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("flow check: ") + e.what());
        }
        reports.push_back(flow_property_check(field, cfg.T / 2, cfg.T / 2, sc, cfg.significance));
    }

    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    bool all = true;
    for (const auto& r : reports) all = all && r.pass;
    write_json(out / "report.json", {{"command", "verify"},
                                     {"version", MVSDE_VERSION},
                                     {"config", config_json(cfg)},
                                     {"field", field.name()},
                                     {"method", method},
                                     {"solution", solution_json(sol)},
                                     {"all_pass", all},
                                     {"reports", arr}});
    std::ostringstream summary;
    const int code = finish(reports, summary);
    {
        std::ofstream s(out / "summary.txt", std::ios::binary);
        s << summary.str();
    }
    log << summary.str();
    return code;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    reject_theta(cfg, "sweep");
    if (cfg.interpretation != "beta") throw ConfigError("sweep requires interpretation = beta");
    if (cfg.n_paths < kMinKsSamples) throw ConfigError("sweep needs n_paths >= " + std::to_string(kMinKsSamples));
    const auto sol = build_solution(cfg.family(), cfg.z);

    Table t;
    t.metadata = base_metadata("sweep", cfg);
    t.header = {"beta", "ks_statistic", "ks_p_value", "ks_pass", "qv_mean", "qv_target", "qv_pass", "diverged"};
    json rows = json::array();
    bool all = true;
    bool diverged = false;
    for (std::size_t i = 0; i < cfg.betas.size(); ++i) {
        const double b = cfg.betas[i];
        const auto field = build_field(cfg, b, sol);
        const auto sim = simulate(cfg, field, cfg.stream_offset + i * cfg.n_paths);
        const auto& ens = sim.ens;
        if (!ens.divergences.empty()) {
            diverged = true;
            t.rows.push_back({b, NAN, NAN, 0.0, NAN, NAN, 0.0, static_cast<double>(ens.divergences.size())});
            continue;
        }
        const auto ks = ks_test(ens.final_positions(), sol, cfg.T, cfg.significance);
        const auto qv = qv_report(ens, field, is_pure_drift(*field.interpretation(), sol.family), cfg.qv_tolerance);
        all = all && ks.pass && qv.pass;
        t.rows.push_back({b, ks.observed, ks.metadata.at("p_value"), ks.pass ? 1.0 : 0.0, qv.observed, qv.target,
                          qv.pass ? 1.0 : 0.0, 0.0});
        rows.push_back({{"beta", b}, {"method", sim.method}, {"stream_offset", cfg.stream_offset + i * cfg.n_paths},
                        {"ks", report_json(ks)}, {"qv", report_json(qv)}});
        log << "beta=" << format_number(b) << " ks_p=" << format_number(ks.metadata.at("p_value"))
            << " qv=" << format_number(qv.observed) << " target=" << format_number(qv.target) << '\n';
    }
    write_table(out / "sweep.csv", t);
    write_json(out / "sweep.json", {{"command", "sweep"},
                                    {"version", MVSDE_VERSION},
                                    {"config", config_json(cfg)},
                                    {"solution", solution_json(sol)},
                                    {"all_pass", all && !diverged},
                                    {"rows", rows}});
    if (diverged) return kDivergence;
    return all ? kOk : kVerificationFailure;
}

int cmd_particles(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    reject_theta(cfg, "particles");
    if (cfg.replicas < kMinReplicas)
        throw ConfigError("particles needs replicas >= " + std::to_string(kMinReplicas));
    if (cfg.n_particles == 0) throw ConfigError("n_particles must be positive");
    SimConfig sc = cfg.sim_config();
    ParticleSystem sys = cfg.pde == "heat"
                             ? heat_particle_system(cfg.z, cfg.n_particles, sc)
                             : ParticleSystem{build_field(cfg, cfg.beta, build_solution(cfg.family(), cfg.z)),
                                              cfg.n_particles, sc, 1.0};
    const TestFunction phi =
        cfg.phi == "bump" ? TestFunction::gaussian_bump(cfg.phi_center, cfg.phi_width)
                          : TestFunction::truncated_linear(cfg.phi_center, cfg.phi_width,
                                                           cfg.phi_taper > 0.0 ? cfg.phi_taper : cfg.phi_width / 4);
    const auto rep = martingale_noise_variance(sys, phi, cfg.T, cfg.replicas, cfg.variance_tolerance);

    Table t;
    t.metadata = base_metadata("particles", cfg);
    t.metadata.emplace_back("field", sys.field.name());
    t.metadata.emplace_back("phi", phi.describe());
    t.header = {"N", "replicas", "t", "variance", "target", "relative_error", "replica_variance", "replica_ci99_lo",
                "replica_ci99_hi", "pass"};
    t.rows.push_back({static_cast<double>(sys.N), static_cast<double>(cfg.replicas), cfg.T, rep.observed, rep.target,
                      rep.target > 0 ? (rep.observed - rep.target) / rep.target : 0.0,
                      rep.metadata.at("replica_variance"), rep.metadata.at("replica_ci99_lo"),
                      rep.metadata.at("replica_ci99_hi"), rep.pass ? 1.0 : 0.0});
    write_table(out / "particles.csv", t);
    write_json(out / "particles.json", {{"command", "particles"},
                                        {"version", MVSDE_VERSION},
                                        {"config", config_json(cfg)},
                                        {"field", sys.field.name()},
                                        {"phi", phi.describe()},
                                        {"report", report_json(rep)}});
    std::ostringstream summary;
    const int code = finish({rep}, summary);
    log << summary.str();
    return code;
}

int run(int argc, char** argv) {
    CLI::App app{"Monte-Carlo toolkit for McKean-Vlasov SDEs with self-similar marginals"};
    app.require_subcommand(1);
    app.set_version_flag("--version", MVSDE_VERSION);
    std::string config_path;
    std::string out_dir;
    const std::pair<const char*, const char*> cmds[] = {
        {"simulate", "simulate an ensemble and write the path table"},
        {"verify", "simulate and run the verification battery"},
        {"sweep", "simulate and verify for each beta in 'betas'"},
        {"particles", "measure the martingale noise variance of a frozen particle system"}};
    for (auto [name, help] : cmds) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "key = value configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides out_dir)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        RunConfig cfg = RunConfig::load(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        const fs::path out(cfg.out_dir);
        if (command == "simulate") return cmd_simulate(cfg, out, std::cout);
        if (command == "verify") return cmd_verify(cfg, out, std::cout);
        if (command == "sweep") return cmd_sweep(cfg, out, std::cout);
        return cmd_particles(cfg, out, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const AdmissibilityError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace mvsde::cli
