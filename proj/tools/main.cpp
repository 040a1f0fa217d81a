// Command-line front end: scenario runs, run comparison, refinement studies
// and weight-family dumps. Exit codes: 0 converged, 2 divergence classified,
// 3 configuration error, 4 solver failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "heatls/scenario.hpp"

namespace {

std::vector<std::pair<int, int>> parse_meshes(const std::string& spec) {
    std::vector<std::pair<int, int>> meshes;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        std::size_t comma = spec.find(',', pos);
        if (comma == std::string::npos) comma = spec.size();
        const std::string item = spec.substr(pos, comma - pos);
        const auto x = item.find('x');
        if (x == std::string::npos)
            throw heatls::ConfigError("bad mesh item '" + item + "' (expected NXxNT)");
        meshes.emplace_back(std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1)));
        pos = comma + 1;
    }
    return meshes;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted least-squares null control for 1D semilinear heat equations"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, csv_path, md_path, mesh_spec;
    bool deterministic = false;
    int threads = 0;
    std::vector<std::string> run_dirs;

    auto* run = app.add_subcommand("run", "Execute a scenario file");
    run->add_option("--scenario", scenario_path, "Scenario config file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides [run] out)");
    run->add_flag("--deterministic", deterministic, "Single-threaded deterministic mode");
    run->add_option("--threads", threads, "Worker threads (or HEATLS_THREADS)");

    auto* cmp = app.add_subcommand("compare", "Merge completed run directories into a table");
    cmp->add_option("runs", run_dirs, "Run output directories")->expected(-1);
    cmp->add_option("--csv", csv_path, "Write merged CSV here");
    cmp->add_option("--md", md_path, "Write markdown table here");

    auto* refine = app.add_subcommand("refine", "Re-run a scenario over a mesh ladder");
    refine->add_option("--scenario", scenario_path, "Scenario config file")->required();
    refine->add_option("--meshes", mesh_spec, "Comma list: 16x16,32x32,64x64")->required();
    refine->add_option("--out", out_dir, "Output directory");

    auto* wdump = app.add_subcommand("weights-dump", "Dump the weight family on the lattice");
    wdump->add_option("--scenario", scenario_path, "Scenario config file")->required();
    wdump->add_option("--out", csv_path, "Output CSV path (default weights.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            heatls::Scenario sc = heatls::Scenario::from_file(scenario_path);
            if (deterministic) sc.deterministic = true;
            if (threads > 0) {
                sc.threads = threads;
                sc.deterministic = false;
            }
            const std::string dir = out_dir.empty() ? sc.out_dir : out_dir;
            const heatls::RunOutcome outcome = heatls::run_scenario(sc, dir);
            std::cout << "classification: " << outcome.classification << "\n"
                      << "artifacts: " << dir << "\n";
            return outcome.exit_code;
        }
        if (*cmp) {
            const heatls::CompareResult result = heatls::compare_runs(run_dirs);
            std::cout << result.markdown;
            if (!csv_path.empty()) std::ofstream(csv_path) << result.csv;
            if (!md_path.empty()) std::ofstream(md_path) << result.markdown;
            return 0;
        }
        if (*refine) {
            heatls::Scenario sc = heatls::Scenario::from_file(scenario_path);
            const auto meshes = parse_meshes(mesh_spec);
            const heatls::RefinementTable table = heatls::run_refinement(sc, meshes);
            const std::string dir = out_dir.empty() ? sc.out_dir : out_dir;
            std::filesystem::create_directories(dir);
            heatls::write_refinement_csv(table, dir + "/refinement.csv");
            for (const auto& row : table.rows)
                std::cout << row.nx << "x" << row.nt << "  terminal=" << row.terminal_l2
                          << "  E_strict=" << row.E_floor << "  converged=" << row.converged
                          << "\n";
            std::cout << "wrote " << dir << "/refinement.csv\n";
            return 0;
        }
        if (*wdump) {
            heatls::Scenario sc = heatls::Scenario::from_file(scenario_path);
            const std::string path = csv_path.empty() ? "weights.csv" : csv_path;
            heatls::dump_weights_csv(sc, path);
            std::cout << "wrote " << path << "\n";
            return 0;
        }
    } catch (const heatls::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const heatls::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
