// gbpfusion_cli: run the fusion experiments from config files.
//
//   gbpfusion_cli run <config> [--seed N] [--out DIR] [--jobs N]
//   gbpfusion_cli report <results-dir> [--out FILE]
//   gbpfusion_cli check <config>
//
// Exit status: 0 ok, 1 some hour failed, 2 bad input.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "gbpfusion/experiment/report.hpp"
#include "gbpfusion/experiment/runner.hpp"

namespace fs = std::filesystem;
using namespace gbpfusion;
using namespace gbpfusion::experiment;

namespace {

std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void print_summary(const std::vector<HourResult>& hours, std::ostream& os) {
  std::size_t errored = 0, converged = 0, violations = 0;
  int max_sweeps = 0;
  for (const auto& h : hours) {
    if (!h.ok()) {
      ++errored;
      continue;
    }
    converged += h.converged;
    violations += h.audit_violations;
    max_sweeps = std::max(max_sweeps, h.sweeps);
  }
  os << "hours: " << hours.size() << "  converged: " << converged << "  errored: " << errored
     << "  max sweeps: " << max_sweeps << "  audit violations: " << violations << '\n';
  for (const auto& h : hours) {
    if (!h.ok()) os << "  " << scenario::format_timestamp(h.timestamp) << " error: " << h.error << '\n';
    else if (!h.converged) os << "  " << scenario::format_timestamp(h.timestamp) << " did not converge\n";
  }
  char line[160];
  os << "entity                 rmse_fused   rmse_raw     mean_sd      flag_rate\n";
  for (const auto& s : score_resources(hours)) {
    std::snprintf(line, sizeof line, "%-22s %-12.5g %-12.5g %-12.5g %.3f\n", s.entity.c_str(), s.rmse_fused, s.rmse_raw,
                  s.mean_fused_sd, s.flag_rate);
    os << line;
  }
}

int cmd_check(const std::string& path) {
  const ExperimentConfig c = load_experiment_config(path);
  const power::Network net = load_network(c.case_path);
  fusion::FusionStateLayout::for_model(net.model, c.load_buses);
  std::cout << path << ": ok\n"
            << "  experiment " << c.name << ", seed " << c.seed << "\n"
            << "  case " << c.case_path.string() << " (" << net.num_buses() << " buses)\n"
            << "  validation " << scenario::format_timestamp(c.validation_start()) << " .. "
            << scenario::format_timestamp(c.validation_end()) << " (" << c.validation_hours << " h)\n"
            << "  events " << c.events.size() << "\n"
            << "  output " << c.output_dir.string() << "\n";
  return 0;
}

int cmd_run(const std::string& path, const std::optional<std::uint64_t>& seed, const std::string& out_dir,
            unsigned jobs) {
  ExperimentConfig c = load_experiment_config(path);
  if (seed) c.seed = *seed;
  if (!out_dir.empty()) c.output_dir = out_dir;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentData data = prepare_experiment(c);
  if (data.forecasts) {
    std::cout << "forecast demand MAPE over the validation window: " << data.forecasts->demand_mape << "%\n";
  }
  const auto results = run_hours(data, c, jobs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(c.output_dir);
  {
    auto out = open_output(c.output_dir / "results.json");
    write_results_json(out, c.name, c.seed, results);
  }
  {
    auto out = open_output(c.output_dir / "summary.csv");
    write_summary_csv(out, results);
  }
  std::cout << c.name << " (seed " << c.seed << ") finished in " << secs << " s\n";
  print_summary(results, std::cout);
  std::cout << "wrote " << (c.output_dir / "results.json").string() << " and summary.csv\n";
  for (const auto& h : results) {
    if (!h.ok()) return 1;
  }
  return 0;
}

int cmd_report(const std::string& dir, const std::string& out_path) {
  const fs::path results = fs::path(dir) / "results.json";
  std::ifstream in(results);
  if (!in) throw ConfigError("cannot open " + results.string());
  const ResultsFile r = read_results_json(in, results.string());
  const fs::path target = out_path.empty() ? fs::path(dir) / "report.csv" : fs::path(out_path);
  auto out = open_output(target);
  emit_report(out, report_rows(r.hours));
  std::cout << r.experiment << " (seed " << r.seed << ")\n";
  print_summary(r.hours, std::cout);
  std::cout << "wrote " << target.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian belief propagation data fusion on bus-branch networks"};
  app.require_subcommand(1);

  std::string run_config, out_dir;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  auto* run = app.add_subcommand("run", "run an experiment and write results.json and summary.csv");
  run->add_option("config", run_config, "experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "override the output directory");
  run->add_option("--jobs", jobs, "hours fused in parallel (0 = hardware threads)");

  std::string report_dir, report_out;
  auto* report = app.add_subcommand("report", "write report.csv plot data from a results directory");
  report->add_option("results-dir", report_dir, "directory holding results.json")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "report path (default <results-dir>/report.csv)");

  std::string check_config;
  auto* check = app.add_subcommand("check", "validate a config without running it");
  check->add_option("config", check_config, "experiment config")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
      return cmd_run(run_config, seed, out_dir, jobs);
    }
    if (*report) return cmd_report(report_dir, report_out);
    if (*check) return cmd_check(check_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
