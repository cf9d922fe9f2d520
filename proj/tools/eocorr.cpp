// eocorr: run, validate and compare electro-optic correlation scenarios.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eocorr/scenario.hpp"

#ifndef EOCORR_SCENARIO_DIR
#define EOCORR_SCENARIO_DIR "scenarios"
#endif

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

void print_validation(const std::string& source, const eocorr::validation_error& e) {
  std::cerr << source << ": error: " << e.what();
  if (!e.field().empty()) std::cerr << " [field " << e.field() << "]";
  std::cerr << "\n";
}

int cmd_run(const std::string& path, const std::optional<std::uint64_t>& seed, unsigned workers,
            const std::string& out) {
  eocorr::RunOptions opts;
  opts.seed = seed;
  opts.workers = workers;
  if (!out.empty()) opts.output_dir = out;
  const auto report = eocorr::run_scenario_file(path, opts);
  for (const auto& p : report.points)
    if (!p.ok) std::cerr << path << ": point " << p.value << ": " << p.message << "\n";
  for (const auto& point : report.summary["points"]) {
    std::cout << report.summary["axis"].get<std::string>() << " = ";
    if (point["value"].is_null()) std::cout << "-";
    else std::cout << point["value"].get<double>() << " " << report.summary["unit"].get<std::string>();
    if (point["status"] == "ok")
      std::cout << "  pp = " << point["peak_to_peak"].get<double>() << " +- "
                << point["peak_to_peak_two_sigma"].get<double>() << " "
                << report.summary["amplitude_unit"].get<std::string>() << "  peak = "
                << point["spectral_peak_THz"].get<double>() << " THz\n";
    else
      std::cout << "  " << point["status"].get<std::string>() << "\n";
  }
  std::cout << "wrote " << report.files.size() + 1 << " files to " << report.output_dir.string() << "\n";
  return report.exit_code;
}

int cmd_validate(const std::string& path) {
  const auto s = eocorr::load_scenario(path);
  auto dir = std::filesystem::path(path).parent_path();
  eocorr::resolve_material(s, dir.empty() ? "." : dir);
  std::cout << path << ": ok (" << s.id << ", " << s.values.size() << " sweep values)\n";
  return exit_ok;
}

int cmd_list(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    std::cerr << "no scenario directory '" << dir << "'\n";
    return exit_failure;
  }
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".scenario") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    try {
      const auto s = eocorr::load_scenario(p.string());
      std::printf("%-26s %-12s %-15s %s\n", s.id.c_str(), eocorr::names::name_of(eocorr::names::models, s.model),
                  eocorr::names::name_of(eocorr::names::axes, s.axis), s.description.c_str());
    } catch (const eocorr::validation_error& e) {
      print_validation(p.string(), e);
    }
  }
  return exit_ok;
}

int cmd_compare(const std::string& a, const std::string& b, const eocorr::ToleranceSpec& tol) {
  const auto r = eocorr::compare_trace_files(a, b, tol);
  std::printf("points %zu  max_abs %.6e  rms %.6e", r.points, r.max_abs, r.rms);
  if (r.mean_se > 0.0) std::printf("  mean_se %.6e", r.mean_se);
  std::printf("\n");
  for (const auto& c : r.checks) std::printf("%s\n", c.c_str());
  std::printf("%s\n", r.pass ? "PASS" : "FAIL");
  return r.pass ? exit_ok : exit_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-beam electro-optic field-correlation simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  std::uint64_t seed = 0;
  unsigned workers = eocorr::default_workers();
  auto* run = app.add_subcommand("run", "Run a scenario and write traces, spectra, summary and manifest");
  run->add_option("scenario", scenario_path, "Scenario file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--workers", workers, "Worker threads (results do not depend on this)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
  validate->add_option("scenario", validate_path, "Scenario file")->required();

  std::string list_dir = EOCORR_SCENARIO_DIR;
  auto* list = app.add_subcommand("list-scenarios", "List the bundled scenarios");
  list->add_option("--dir", list_dir, "Scenario directory");

  std::string file_a, file_b;
  eocorr::ToleranceSpec tol;
  double max_abs = -1.0, rms = -1.0, rms_se = -1.0;
  auto* compare = app.add_subcommand("compare", "Compare two trace CSV files");
  compare->add_option("a", file_a, "First CSV")->required();
  compare->add_option("b", file_b, "Second CSV")->required();
  compare->add_option("--max-abs", max_abs, "Limit on the largest absolute difference");
  compare->add_option("--rms", rms, "Limit on the RMS difference");
  compare->add_option("--rms-se", rms_se, "Limit on RMS difference in units of the mean standard error");
  compare->add_flag("--interpolate", tol.interpolate, "Resample the second trace onto the first grid");

  CLI11_PARSE(app, argc, argv);

  std::string source = "eocorr";
  try {
    if (*run) {
      source = scenario_path;
      std::optional<std::uint64_t> s;
      if (*seed_opt) s = seed;
      return cmd_run(scenario_path, s, workers, out_dir);
    }
    if (*validate) {
      source = validate_path;
      return cmd_validate(validate_path);
    }
    if (*list) return cmd_list(list_dir);
    if (*compare) {
      if (max_abs >= 0.0) tol.max_abs = max_abs;
      if (rms >= 0.0) tol.rms = rms;
      if (rms_se >= 0.0) tol.rms_se_factor = rms_se;
      return cmd_compare(file_a, file_b, tol);
    }
  } catch (const eocorr::validation_error& e) {
    print_validation(source, e);
    return exit_validation;
  } catch (const eocorr::numerical_error& e) {
    std::cerr << source << ": numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::domain_error& e) {
    std::cerr << source << ": error: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << source << ": error: " << e.what() << "\n";
    return exit_failure;
  }
  return exit_failure;
}
