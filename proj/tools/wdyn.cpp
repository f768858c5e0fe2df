// Command-line front end: run, validate, compare, cmv.
#include "wignerdyn/cli_io.hpp"
#include "wignerdyn/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void apply_overrides(wignerdyn::RunConfig& config, const std::optional<std::uint64_t>& seed,
                     const std::optional<std::size_t>& samples, const std::string& out) {
  if (seed) config.seed = *seed;
  if (samples) config.n_samples = *samples;
  if (!out.empty()) config.output = out;
}

int print_issues(const std::vector<wignerdyn::Issue>& issues) {
  int errors = 0;
  for (const auto& i : issues) {
    std::cerr << wignerdyn::format_issue(i) << '\n';
    errors += i.severity == wignerdyn::Issue::Severity::error;
  }
  return errors;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin correlation dynamics: exact, discrete and continuous Wigner sampling"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(wignerdyn::kToolVersion));

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::string out;
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string config_path;
  auto* run = app.add_subcommand("run", "compute a bundle from a config file");
  run->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the sampling seed");
  run->add_option("--samples", samples, "override n_samples");
  run->add_option("--out", out, "override the output directory");

  auto* validate = app.add_subcommand("validate", "check a config without computing anything");
  validate->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  validate->add_option("--seed", seed, "override the sampling seed");
  validate->add_option("--samples", samples, "override n_samples");
  validate->add_option("--out", out, "override the output directory");

  std::string a, b;
  auto* compare = app.add_subcommand("compare", "diff two bundles or correlation tables");
  compare->add_option("a", a, "first bundle or correlations.csv")->required();
  compare->add_option("b", b, "second bundle or correlations.csv")->required();
  double tolerance = -1.0;
  compare->add_option("--tolerance", tolerance, "exit with status 1 when max |d| exceeds this");

  std::string csv;
  wignerdyn::CmvOptions cmv;
  std::optional<double> level;
  auto* cmv_cmd = app.add_subcommand("cmv", "meshes for every row of a correlations.csv");
  cmv_cmd->add_option("csv", csv, "correlations.csv")->required()->check(CLI::ExistingFile);
  cmv_cmd->add_option("--out", out, "output directory")->default_str("cmv");
  cmv_cmd->add_option("--kappa", cmv.kappa, "level as a fraction of the largest lobe height");
  cmv_cmd->add_option("--level", level, "fixed level P for every matrix");
  cmv_cmd->add_option("--subdivisions", cmv.subdivisions, "icosphere subdivisions");
  cmv_cmd->add_option("--ratio-low", cmv.thresholds.ratio_low, "shape classifier lower ratio");
  cmv_cmd->add_option("--ratio-high", cmv.thresholds.ratio_high, "shape classifier upper ratio");

  CLI11_PARSE(app, argc, argv);
  wignerdyn::set_thread_count(threads);

  try {
    if (*run || *validate) {
      auto config = wignerdyn::load_config(config_path);
      apply_overrides(config, seed, samples, out);
      if (*validate) {
        const int errors = print_issues(wignerdyn::validate(config));
        if (errors == 0) std::cout << "ok\n";
        return errors == 0 ? 0 : 2;
      }
      print_issues(wignerdyn::validate(config));
      const auto result = wignerdyn::run(config);
      std::cout << "wrote " << result.files.size() << " files to " << result.output.string() << '\n';
      return 0;
    }
    if (*compare) {
      const auto report = wignerdyn::compare(a, b);
      std::cout << wignerdyn::format_report(report);
      return (tolerance >= 0.0 && report.max_abs > tolerance) ? 1 : 0;
    }
    if (*cmv_cmd) {
      if (level) cmv.fixed_level = level;
      if (out.empty()) out = "cmv";
      const auto files = wignerdyn::cmv_from_csv(csv, out, cmv);
      std::cout << "wrote " << files.size() << " files to " << out << '\n';
      return 0;
    }
  } catch (const wignerdyn::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
