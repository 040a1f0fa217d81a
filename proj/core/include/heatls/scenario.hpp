#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "heatls/baselines.hpp"
#include "heatls/diagnostics.hpp"
#include "heatls/leastsquares.hpp"

namespace heatls {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Minimal TOML-style key/value text: `[section]` headers, `key = value`
/// lines, `#` comments. Values: quoted strings, numbers, true/false.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

/// A fully resolved run description; serializable, reproducible from its
/// serialized form and seed.
struct Scenario {
    // grid
    int nx = 64, nt = 64;
    double T = 0.5;
    double omega_a = 0.2, omega_b = 0.8;
    // weights (solver default: normalized amplitude, centered logs, offset
    // peeled; the exact family is normalize=false, center=false, offset=6)
    WeightParams wp;
    WeightOptions wopts{true, true, 0.0};
    // nonlinearity: builtin name or expression pair
    std::string g_name = "zero";
    std::string g_expr, g_dexpr;
    double g_p = 1.0;
    // initial datum
    std::string u0_expr = "sin(pi*x)";
    // solver
    std::string kind = "leastsquares";  // or a baseline name
    LSConfig ls;
    // run
    unsigned long long seed = 42;
    bool deterministic = true;
    int threads = 1;
    std::string out_dir = "out";

    static Scenario from_config(const ConfigMap& cfg);
    static Scenario from_file(const std::string& path);
    std::string serialize() const;  // lock-file form, parseable by from_config

    NonlinearitySpec make_nonlinearity() const;
    SpatialFunction make_u0() const;
};

struct RunOutcome {
    int exit_code = 0;  // 0 converged, 2 divergence classified, 4 solver failure
    std::string classification;
    std::string summary_json;  // also written to <out>/summary.json
};

/// Executes a scenario and writes scenario.lock, iterations.csv,
/// summary.json, field dumps and the diagnostics report into out_dir.
RunOutcome run_scenario(const Scenario& scenario, const std::string& out_dir);

struct CompareResult {
    std::string markdown;
    std::string csv;
};

/// Merges completed run directories (method, iterations, final sqrtE,
/// terminal norm, wall time). Throws ConfigError on missing artifacts.
CompareResult compare_runs(const std::vector<std::string>& run_dirs);

/// Reruns the scenario on each mesh and tabulates terminal norms, residual
/// floors and the monitored linear-solve constant.
RefinementTable run_refinement(const Scenario& scenario,
                               const std::vector<std::pair<int, int>>& meshes);

/// CSV dump of the weight family on the nodal lattice (the final row uses the
/// clipped time T(1 - 1/(2 nt)); weights are undefined at t = T).
void dump_weights_csv(const Scenario& scenario, const std::string& path);

} // namespace heatls
