#include "heatls/scenario.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "heatls/expr.hpp"

namespace heatls {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

ConfigMap ConfigMap::parse_string(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments (a '#' outside quotes)
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out.kv_[section.empty() ? key : section + "." + key] = val;
    }
    return out;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + it->second + "'");
    }
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + it->second +
                          "'");
    }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + it->second + "'");
}

Scenario Scenario::from_config(const ConfigMap& cfg) {
    Scenario sc;
    sc.nx = cfg.get_int("grid.nx", sc.nx);
    sc.nt = cfg.get_int("grid.nt", sc.nt);
    sc.T = cfg.get_double("grid.T", sc.T);
    if (!cfg.has("grid.omega_a") || !cfg.has("grid.omega_b"))
        throw ConfigError("missing control region: grid.omega_a and grid.omega_b are required");
    sc.omega_a = cfg.get_double("grid.omega_a", 0.0);
    sc.omega_b = cfg.get_double("grid.omega_b", 0.0);

    sc.wp.s = cfg.get_double("weights.s", sc.wp.s);
    sc.wp.lambda0 = cfg.get_double("weights.lambda0", sc.wp.lambda0);
    sc.wp.T1 = cfg.get_double("weights.T1", sc.wp.T1);
    sc.wp.s0 = cfg.get_double("weights.s0", sc.wp.s0);
    sc.wp.xstar = cfg.get_double("weights.xstar", sc.wp.xstar);
    sc.wopts.normalize_amplitude = cfg.get_bool("weights.normalize", true);
    sc.wopts.center_log = cfg.get_bool("weights.center", true);
    sc.wopts.psi_offset = cfg.get_double("weights.psi_offset", 0.0);

    sc.g_name = cfg.get_string("nonlinearity.name", "");
    sc.g_expr = cfg.get_string("nonlinearity.expr", "");
    sc.g_dexpr = cfg.get_string("nonlinearity.dexpr", "");
    sc.g_p = cfg.get_double("nonlinearity.p", 1.0);
    if (sc.g_name.empty() && sc.g_expr.empty()) sc.g_name = "zero";
    if (!sc.g_name.empty() && !sc.g_expr.empty())
        throw ConfigError("nonlinearity: give either a builtin name or an expression, not both");

    sc.u0_expr = cfg.get_string("u0.expr", sc.u0_expr);

    sc.kind = cfg.get_string("solver.kind", sc.kind);
    sc.ls.m = cfg.get_double("solver.m", sc.ls.m);
    sc.ls.tol_sqrtE = cfg.get_double("solver.tol_sqrtE", sc.ls.tol_sqrtE);
    sc.ls.max_iter = cfg.get_int("solver.max_iter", sc.ls.max_iter);
    sc.ls.s_init = cfg.get_double("weights.s", sc.wp.s);
    sc.ls.s_growth = cfg.get_double("solver.s_growth", sc.ls.s_growth);
    sc.ls.max_restarts = cfg.get_int("solver.max_restarts", sc.ls.max_restarts);
    sc.ls.M_cap = cfg.get_double("solver.M_cap", sc.ls.M_cap);
    const std::string init = cfg.get_string("solver.init", "linear");
    if (init == "linear")
        sc.ls.init = LSInit::Linear;
    else if (init == "cutoff")
        sc.ls.init = LSInit::Cutoff;
    else
        throw ConfigError("solver.init must be 'linear' or 'cutoff'");

    sc.seed = static_cast<unsigned long long>(cfg.get_int("run.seed", 42));
    sc.deterministic = cfg.get_bool("run.deterministic", true);
    sc.threads = cfg.get_int("run.threads", 1);
    sc.out_dir = cfg.get_string("run.out", sc.out_dir);
    return sc;
}

Scenario Scenario::from_file(const std::string& path) {
    return from_config(ConfigMap::parse_file(path));
}

std::string Scenario::serialize() const {
    std::ostringstream out;
    out.precision(17);
    out << "[grid]\n"
        << "nx = " << nx << "\nnt = " << nt << "\nT = " << T << "\nomega_a = " << omega_a
        << "\nomega_b = " << omega_b << "\n\n[weights]\n"
        << "s = " << wp.s << "\nlambda0 = " << wp.lambda0 << "\nT1 = " << wp.T1
        << "\ns0 = " << wp.s0 << "\nxstar = " << wp.xstar
        << "\nnormalize = " << (wopts.normalize_amplitude ? "true" : "false")
        << "\ncenter = " << (wopts.center_log ? "true" : "false")
        << "\npsi_offset = " << wopts.psi_offset << "\n\n[nonlinearity]\n";
    if (!g_name.empty()) out << "name = \"" << g_name << "\"\n";
    if (!g_expr.empty()) out << "expr = \"" << g_expr << "\"\n";
    if (!g_dexpr.empty()) out << "dexpr = \"" << g_dexpr << "\"\n";
    out << "p = " << g_p << "\n\n[u0]\nexpr = \"" << u0_expr << "\"\n\n[solver]\n"
        << "kind = \"" << kind << "\"\nm = " << ls.m << "\ntol_sqrtE = " << ls.tol_sqrtE
        << "\nmax_iter = " << ls.max_iter << "\ns_growth = " << ls.s_growth
        << "\nmax_restarts = " << ls.max_restarts << "\nM_cap = " << ls.M_cap
        << "\ninit = \"" << (ls.init == LSInit::Linear ? "linear" : "cutoff") << "\"\n\n[run]\n"
        << "seed = " << seed << "\ndeterministic = " << (deterministic ? "true" : "false")
        << "\nthreads = " << threads << "\nout = \"" << out_dir << "\"\n";
    return out.str();
}

NonlinearitySpec Scenario::make_nonlinearity() const {
    if (!g_name.empty()) return builtin(g_name);
    NonlinearitySpec s = from_expressions(g_expr, g_dexpr, g_p);
    return s;
}

SpatialFunction Scenario::make_u0() const {
    const auto e = expr::parse(u0_expr, "x");
    SpatialFunction u0;
    u0.f = [e](double x) { return e(x); };
    u0.df = [e](double x) { return (e(x + 1e-6) - e(x - 1e-6)) / 2e-6; };  // documented step
    if (std::fabs(u0.f(0.0)) > 1e-9 || std::fabs(u0.f(1.0)) > 1e-9)
        throw ConfigError("u0 must vanish at x = 0 and x = 1");
    return u0;
}

namespace {

using nlohmann::json;

void write_iterations_csv(const std::string& path, const std::vector<IterationRecord>& records,
                          const std::string& method) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    out << "k,E,sqrtE,lambda,y_sup,s,order,c1,seconds";
    const bool with_method = !method.empty();
    if (with_method) out << ",method";
    out << '\n';
    for (const auto& r : records) {
        out << r.k << ',' << r.E << ',' << r.sqrtE << ',' << r.lambda << ',' << r.y_sup << ','
            << r.s << ',' << r.order << ',' << r.c1 << ',' << r.seconds;
        if (with_method) out << ',' << method;
        out << '\n';
    }
}

json scenario_json(const Scenario& sc) {
    json j;
    j["grid"] = {{"nx", sc.nx}, {"nt", sc.nt}, {"T", sc.T},
                 {"omega_a", sc.omega_a}, {"omega_b", sc.omega_b}};
    j["weights"] = {{"s", sc.wp.s},       {"lambda0", sc.wp.lambda0},
                    {"T1", sc.wp.T1},     {"s0", sc.wp.s0},
                    {"xstar", sc.wp.xstar}, {"normalize", sc.wopts.normalize_amplitude},
                    {"center", sc.wopts.center_log}};
    j["nonlinearity"] = {{"name", sc.g_name}, {"expr", sc.g_expr}, {"p", sc.g_p}};
    j["u0"] = sc.u0_expr;
    j["solver"] = sc.kind;
    j["seed"] = sc.seed;
    return j;
}

} // namespace

RunOutcome run_scenario(const Scenario& scenario, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const auto t_start = std::chrono::steady_clock::now();

    const int threads = scenario.deterministic ? 1 : scenario.threads;
    ::setenv("HEATLS_THREADS", std::to_string(threads).c_str(), 1);

    fs::create_directories(out_dir);

    std::shared_ptr<const SpaceTimeGrid> grid;
    NonlinearitySpec g;
    SpatialFunction u0;
    try {
        grid = make_grid(scenario.nx, scenario.nt, scenario.T,
                         {scenario.omega_a, scenario.omega_b});
        g = scenario.make_nonlinearity();
        u0 = scenario.make_u0();
        WeightSet probe(scenario.wp, {grid->omega_a(), grid->omega_b()}, grid->T(),
                        scenario.wopts);  // validates weight parameters
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    {
        std::ofstream lock(out_dir + "/scenario.lock");
        lock << scenario.serialize();
    }

    json summary;
    summary["scenario"] = scenario_json(scenario);
    json scalars;
    RunOutcome outcome;

    const double u0_l2 = u0.l2(*grid);
    scalars["u0_l2"] = u0_l2;

    try {
        if (scenario.kind == "leastsquares") {
            const LSResult res =
                leastsquares_solve(grid, scenario.wp, scenario.wopts, g, u0, scenario.ls);
            write_iterations_csv(out_dir + "/iterations.csv", res.records, "");
            res.y_initial.dump_csv(out_dir + "/y_initial.csv");
            res.f_initial.dump_csv(out_dir + "/f_initial.csv");
            res.pair.y.dump_csv(out_dir + "/y_final.csv");
            res.pair.f.dump_csv(out_dir + "/f_final.csv");
            res.pair.y.dump_binary(out_dir + "/y_final.bin");

            const double tol = scenario.ls.tol_sqrtE > 0 ? scenario.ls.tol_sqrtE
                                                         : 1e-8 * (1.0 + res.sqrtE0);
            const ConvergenceReport rep = analyze_leastsquares(res, g.p, tol);
            write_markdown_report(rep, nullptr, out_dir + "/report.md");
            write_long_csv(rep, out_dir + "/trace_long.csv");

            scalars["E_final"] = res.pair.E;
            scalars["sqrtE_final"] = std::sqrt(res.pair.E);
            scalars["sqrtE0"] = res.sqrtE0;
            scalars["E_strict"] = res.E_strict;
            scalars["defect_l2"] = res.defect_l2;
            scalars["terminal_l2"] = res.terminal_l2;
            scalars["terminal_rel"] = u0_l2 > 0 ? res.terminal_l2 / u0_l2 : 0.0;
            scalars["iterations"] = res.records.size() - 1;
            scalars["restarts"] = res.restarts;
            scalars["s_final"] = res.s_final;
            scalars["max_drift"] = res.max_drift;
            scalars["c1_fit"] = rep.c1.value;
            scalars["final_order"] = rep.final_order;
            scalars["k0_predicted"] = rep.k0_predicted;
            scalars["k0_observed"] = rep.k0_observed;
            scalars["lambda_last"] =
                res.lambdas.empty() ? 0.0 : res.lambdas.back();
            outcome.exit_code = res.converged ? 0 : 4;
            outcome.classification = res.converged ? "converged" : "no_convergence";
            summary["status"] = {{"converged", res.converged},
                                 {"stop_reason", res.stop_reason}};
        } else {
            const BaselineKind kind = baseline_from_name(scenario.kind);
            BaselineConfig bc;
            bc.tol_sqrtE = scenario.ls.tol_sqrtE;
            bc.max_iter = scenario.ls.max_iter;
            bc.M_cap = scenario.ls.M_cap;
            bc.m = scenario.ls.m;
            const BaselineResult res =
                run_baseline(kind, grid, scenario.wp, scenario.wopts, g, u0, bc);
            write_iterations_csv(out_dir + "/iterations.csv", res.records, res.method);
            res.y_initial.dump_csv(out_dir + "/y_initial.csv");
            res.f_initial.dump_csv(out_dir + "/f_initial.csv");
            res.pair.y.dump_csv(out_dir + "/y_final.csv");
            res.pair.f.dump_csv(out_dir + "/f_final.csv");

            scalars["E_final"] = res.pair.E;
            scalars["sqrtE_final"] = std::sqrt(res.pair.E);
            scalars["E_strict"] = res.E_strict;
            scalars["terminal_l2"] = res.terminal_l2;
            scalars["terminal_rel"] = u0_l2 > 0 ? res.terminal_l2 / u0_l2 : 0.0;
            scalars["iterations"] = res.records.size() - 1;
            scalars["max_step_diff"] = res.max_step_diff;
            outcome.exit_code = res.diverged ? 2 : (res.converged ? 0 : 4);
            outcome.classification =
                res.diverged ? "diverged" : (res.converged ? "converged" : "no_convergence");
            summary["status"] = {{"converged", res.converged},
                                 {"diverged", res.diverged},
                                 {"stop_reason", res.stop_reason}};
        }
    } catch (const SolverError& e) {
        outcome.exit_code = 4;
        outcome.classification = "solver_failure";
        summary["status"] = {{"converged", false}, {"stop_reason", e.what()}};
    }

    summary["scalars"] = scalars;
    summary["classification"] = outcome.classification;
    summary["exit_code"] = outcome.exit_code;
    summary["timings"] = {
        {"seconds_total",
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count()}};

    outcome.summary_json = summary.dump(2);
    std::ofstream js(out_dir + "/summary.json");
    js << outcome.summary_json << '\n';
    return outcome;
}

CompareResult compare_runs(const std::vector<std::string>& run_dirs) {
    using nlohmann::json;
    if (run_dirs.size() < 2)
        throw ConfigError("compare needs at least two completed run directories");
    struct Row {
        std::string dir, method, classification;
        double iterations, sqrtE, terminal, seconds;
    };
    std::vector<Row> rows;
    for (const auto& dir : run_dirs) {
        std::ifstream in(dir + "/summary.json");
        if (!in) throw ConfigError("missing artifacts: cannot open " + dir + "/summary.json");
        json j;
        in >> j;
        Row row;
        row.dir = dir;
        row.method = j["scenario"]["solver"].get<std::string>();
        row.classification = j["classification"].get<std::string>();
        row.iterations = j["scalars"].value("iterations", 0.0);
        row.sqrtE = j["scalars"].value("sqrtE_final", 0.0);
        row.terminal = j["scalars"].value("terminal_l2", 0.0);
        row.seconds = j["timings"].value("seconds_total", 0.0);
        rows.push_back(row);
    }
    std::ostringstream md, csv;
    md << "| run | method | status | iterations | final sqrtE | terminal L2 | seconds |\n";
    md << "|---|---|---|---|---|---|---|\n";
    csv << "run,method,status,iterations,sqrtE_final,terminal_l2,seconds\n";
    csv.precision(17);
    for (const auto& r : rows) {
        md << "| " << r.dir << " | " << r.method << " | " << r.classification << " | "
           << r.iterations << " | " << r.sqrtE << " | " << r.terminal << " | " << r.seconds
           << " |\n";
        csv << r.dir << ',' << r.method << ',' << r.classification << ',' << r.iterations << ','
            << r.sqrtE << ',' << r.terminal << ',' << r.seconds << '\n';
    }
    return {md.str(), csv.str()};
}

RefinementTable run_refinement(const Scenario& scenario,
                               const std::vector<std::pair<int, int>>& meshes) {
    if (meshes.size() < 3)
        throw ConfigError("refinement study needs at least 3 mesh levels");
    RefinementTable table;
    for (const auto& [nx, nt] : meshes) {
        Scenario sc = scenario;
        sc.nx = nx;
        sc.nt = nt;
        const auto grid = make_grid(nx, nt, sc.T, {sc.omega_a, sc.omega_b});
        const auto g = sc.make_nonlinearity();
        const auto u0 = sc.make_u0();
        const double u0_l2 = u0.l2(*grid);

        RefinementRow row;
        row.nx = nx;
        row.nt = nt;
        const auto t0 = std::chrono::steady_clock::now();
        const LSResult res = leastsquares_solve(grid, sc.wp, sc.wopts, g, u0, sc.ls);
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.terminal_l2 = res.terminal_l2;
        row.terminal_rel = u0_l2 > 0 ? res.terminal_l2 / u0_l2 : 0.0;
        row.E_floor = res.E_strict;
        row.sqrtE_final = std::sqrt(res.pair.E);
        row.iterations = static_cast<int>(res.records.size()) - 1;
        row.converged = res.converged;

        // Monitored constant of the weighted linear estimate on this mesh.
        {
            WeightSet w(sc.wp, {grid->omega_a(), grid->omega_b()}, grid->T(), sc.wopts);
            WeightedQuadrature wq(grid, w);
            LinearControlProblem prob;
            prob.grid = grid;
            prob.weights = &w;
            prob.wq = &wq;
            prob.z0 = &u0;
            const NullControlResult nc = solve_null_control(prob);
            row.monitored_est1 = nc.solution.est1_ratio();
        }
        table.rows.push_back(row);
    }
    return table;
}

void dump_weights_csv(const Scenario& scenario, const std::string& path) {
    const auto grid =
        make_grid(scenario.nx, scenario.nt, scenario.T, {scenario.omega_a, scenario.omega_b});
    const WeightSet w(scenario.wp, {grid->omega_a(), grid->omega_b()}, grid->T(),
                      scenario.wopts);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    out << "x,t,theta,phi,xi,log_rho,log_rho0,log_rho1\n";
    for (int j = 0; j <= grid->nt(); ++j) {
        const double t = j == grid->nt() ? grid->weight_time_cap() : grid->t(j);
        for (int i = 0; i <= grid->nx(); ++i) {
            const double x = grid->x(i);
            const auto lw = w.eval(x, t);
            out << x << ',' << t << ',' << w.theta(t) << ',' << lw.phi << ',' << lw.xi << ','
                << lw.log_rho << ',' << lw.log_rho0 << ',' << lw.log_rho1 << '\n';
        }
    }
}

} // namespace heatls
