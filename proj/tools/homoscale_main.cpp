// homoscale CLI: run desk experiments, homogenize a coefficient document, or
// calibrate the separation constants against the supercell oracle.
//
// Exit codes: 0 pass, 2 acceptance-threshold fail, 3 resource or validation
// error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "homoscale/homoscale.hpp"

namespace {

int run_command(const std::string& experiment, const std::string& config_path,
                const std::string& outdir) {
  nlohmann::json config = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in.good()) {
      std::cerr << "homoscale: cannot open config " << config_path << "\n";
      return 3;
    }
    in >> config;
  }
  auto result = homoscale::experiments::run_experiment(experiment, config, outdir);
  std::cout << result.name << ": " << (result.pass ? "PASS" : "FAIL") << "\n"
            << result.summary.dump(2) << "\n";
  return result.pass ? 0 : 2;
}

int homogenize_command(const std::string& coef_path, const std::string& eps_csv,
                       const std::string& outdir, int resolution) {
  auto coef = homoscale::coefficient_io::load(coef_path);
  std::vector<double> eps;
  std::stringstream ss(eps_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) eps.push_back(std::stod(tok));
  homoscale::require(static_cast<int>(eps.size()) == coef.n(),
                     "homogenize: one scale per coefficient block expected");
  homoscale::ScaleVector scales(eps);

  homoscale::PipelineConfig config;
  config.resolution = resolution;
  int res = config.default_resolution(coef.d());
  homoscale::GridSpec grid(coef.d(), coef.n(), res);
  homoscale::TorusField A = coef.sample(grid);
  auto report = homoscale::homogenize(A, scales, config);

  std::filesystem::create_directories(outdir);
  nlohmann::json j = homoscale::pipeline_report_json(report);
  j["coefficient"] = homoscale::coefficient_io::to_json(coef);
  j["eps"] = eps;
  j["resolution"] = res;
  std::ofstream out(outdir + "/homogenize.json");
  out << j.dump(2) << "\n";
  std::cout << "effective matrix:";
  for (int i = 0; i < report.Abar.d; ++i)
    for (int c = 0; c < report.Abar.d; ++c) std::cout << " " << report.Abar(i, c);
  std::cout << "\npredicted budget: " << report.budget << "\nstages: " << report.stages.size()
            << (report.trivial_rate_warning ? " (trivial-rate warning)" : "") << "\n";
  return 0;
}

int calibrate_command(const std::string& oracle, const std::string& outdir) {
  if (oracle != "supercell") {
    std::cerr << "homoscale: unknown calibration oracle " << oracle << "\n";
    return 3;
  }
  auto table = homoscale::experiments::calibrate_supercell(outdir);
  std::cout << table.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homoscale: multiscale periodic homogenization toolkit"};
  app.require_subcommand(1);

  std::string experiment, config_path, outdir = "out";
  auto* run = app.add_subcommand("run", "run a named experiment");
  run->add_option("experiment", experiment,
                  "one of rate_1d, rate_2d, counterexample_nonseparated, "
                  "counterexample_exponential, toy_averaging, lipschitz_probe")
      ->required();
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--out", outdir, "output directory");

  std::string coef_path, eps_csv;
  int resolution = 0;
  auto* hom = app.add_subcommand("homogenize", "homogenize a coefficient document");
  hom->add_option("--coef", coef_path, "coefficient JSON document")->required();
  hom->add_option("--eps", eps_csv, "comma-separated scales e1,e2,...")->required();
  hom->add_option("--out", outdir, "output directory");
  hom->add_option("--resolution", resolution, "grid points per block (0 = default)");

  std::string oracle = "supercell";
  auto* cal = app.add_subcommand("calibrate", "sweep separation constants against an oracle");
  cal->add_option("--oracle", oracle, "oracle name (supercell)");
  cal->add_option("--out", outdir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(experiment, config_path, outdir);
    if (hom->parsed()) return homogenize_command(coef_path, eps_csv, outdir, resolution);
    if (cal->parsed()) return calibrate_command(oracle, outdir);
  } catch (const homoscale::Error& e) {
    std::cerr << "homoscale: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "homoscale: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
