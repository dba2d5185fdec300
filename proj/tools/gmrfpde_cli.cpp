// Command-line front end: runs experiments from problem-spec files, sweeps a
// parameter over several values, executes the built-in invariant checks, and
// exports meshes. Exit codes: 0 success, 2 spec validation error, 3 numerical
// failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gmrfpde/bench/problem_spec.hpp"
#include "gmrfpde/bench/runner.hpp"
#include "gmrfpde/bench/self_check.hpp"
#include "gmrfpde/fem/mesh.hpp"

namespace {

using namespace gmrfpde;

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& item : raw) {
    std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw bench::SpecError("--override expects key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

void print_record(const bench::ResultRecord& rec) {
  std::cout << "kind=" << rec.kind << " resolution=" << rec.resolution
            << " n_dofs=" << rec.n_dofs
            << " rel_l2_error=" << rec.relative_l2_error_percent << "%"
            << " total_time=" << rec.phases.total() << "s";
  if (rec.gn.iterations > 0)
    std::cout << " gn_iters=" << rec.gn.iterations
              << " decrement=" << rec.gn.final_decrement;
  std::cout << "\n";
}

int run_solve(const std::string& spec_file, const std::string& out_dir,
              long long seed_override, const std::vector<std::string>& overrides) {
  auto ov = parse_overrides(overrides);
  if (seed_override >= 0) ov.emplace_back("run.seed", std::to_string(seed_override));
  if (!out_dir.empty()) ov.emplace_back("run.output_dir", out_dir);
  bench::ProblemSpec spec = bench::parse_problem_spec_file(spec_file, ov);
  bench::ResultRecord rec = bench::run_experiment(spec);
  print_record(rec);
  std::cout << "artifacts written to " << spec.output_dir << "/\n";
  return 0;
}

int run_sweep(const std::string& spec_file, const std::string& param,
              const std::string& values_csv, const std::string& out_dir,
              const std::vector<std::string>& overrides) {
  std::vector<std::string> values;
  std::stringstream ss(values_csv);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(item);
  if (values.empty()) throw bench::SpecError("sweep: --values list is empty");

  std::string base_dir = out_dir.empty() ? "sweep" : out_dir;
  std::filesystem::create_directories(base_dir);
  std::ofstream summary(std::filesystem::path(base_dir) / "summary.csv");
  summary << param << ",rel_l2_error_percent,total_s,prior_s,solve_s,variance_s,"
             "sampling_s,gn_iterations,gn_decrement\n";
  for (const std::string& value : values) {
    auto ov = parse_overrides(overrides);
    ov.emplace_back(param, value);
    ov.emplace_back("run.output_dir",
                    (std::filesystem::path(base_dir) / (param + "=" + value)).string());
    bench::ProblemSpec spec = bench::parse_problem_spec_file(spec_file, ov);
    bench::ResultRecord rec = bench::run_experiment(spec);
    std::cout << param << "=" << value << ": ";
    print_record(rec);
    summary << value << "," << rec.relative_l2_error_percent << "," << rec.phases.total()
            << "," << rec.phases.prior_construction_s << ","
            << rec.phases.conditioning_solve_s << "," << rec.phases.variance_s << ","
            << rec.phases.sampling_s << "," << rec.gn.iterations << ","
            << rec.gn.final_decrement << "\n";
  }
  std::cout << "sweep summary written to " << base_dir << "/summary.csv\n";
  return 0;
}

int run_export_mesh(const std::string& spec_file, const std::string& out_dir) {
  bench::ProblemSpec spec = bench::parse_problem_spec_file(spec_file);
  fem::Mesh mesh;
  if (spec.kind == bench::ProblemKind::kDarcy ||
      spec.kind == bench::ProblemKind::kNonlinearElliptic ||
      (spec.kind == bench::ProblemKind::kPoisson && spec.dim == 2)) {
    mesh = fem::build_unit_square_mesh(spec.resolution);
  } else if (spec.kind == bench::ProblemKind::kBurgersColeHopf) {
    mesh = fem::build_interval_mesh(spec.resolution, -1.0, 1.0);
  } else {
    mesh = fem::build_interval_mesh(spec.resolution, 0.0, 1.0);
  }
  std::string dir = out_dir.empty() ? spec.output_dir : out_dir;
  std::filesystem::create_directories(dir);
  std::string path = (std::filesystem::path(dir) / "mesh.txt").string();
  fem::write_mesh_file(mesh, path);
  std::cout << "mesh written to " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic PDE solving with GMRF priors"};
  app.require_subcommand(1);

  std::string spec_file, out_dir, param, values;
  long long seed = -1;
  std::vector<std::string> overrides;

  CLI::App* solve = app.add_subcommand("solve", "Run one experiment from a spec file");
  solve->add_option("spec", spec_file, "problem spec file")->required();
  solve->add_option("--out", out_dir, "output directory (overrides run.output_dir)");
  solve->add_option("--seed", seed, "RNG seed (overrides run.seed)");
  solve->add_option("--override", overrides, "section.key=value overrides")
      ->take_all();

  CLI::App* sweep = app.add_subcommand("sweep", "Run a spec over several parameter values");
  sweep->add_option("spec", spec_file, "problem spec file")->required();
  sweep->add_option("--param", param, "section.key to sweep")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--override", overrides, "section.key=value overrides")->take_all();

  CLI::App* check = app.add_subcommand("check", "Run the built-in invariant suite");

  CLI::App* export_mesh = app.add_subcommand("export-mesh", "Write the mesh of a spec");
  export_mesh->add_option("spec", spec_file, "problem spec file")->required();
  export_mesh->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return run_solve(spec_file, out_dir, seed, overrides);
    if (sweep->parsed()) return run_sweep(spec_file, param, values, out_dir, overrides);
    if (check->parsed()) return gmrfpde::bench::run_self_checks(std::cout) ? 0 : 3;
    if (export_mesh->parsed()) return run_export_mesh(spec_file, out_dir);
  } catch (const gmrfpde::bench::SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  } catch (const gmrfpde::ContractError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 2;
  } catch (const gmrfpde::bench::StageError& e) {
    std::cerr << "numerical failure " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
