#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "kmax/harness.hpp"
#include "kmax/verify.hpp"

namespace {

int run_simulate(const std::string& config_path, bool dump_state, bool diagnostics,
                 int workers) {
  kmax::ExperimentConfig config = kmax::load_config(config_path);
  if (dump_state) config.dump_state = true;
  if (diagnostics) config.diagnostics = true;
  if (workers > 0) config.workers = workers;
  if (config.dump_state && config.output.state_path.empty())
    config.output.state_path = kmax::resolve_output_path("state.json");

  std::vector<kmax::RegretTrace> traces = kmax::run_experiment(config);
  if (!config.output.csv_path.empty())
    kmax::emit(traces, kmax::EmitFormat::csv, config.output.csv_path);
  if (!config.output.summary_path.empty())
    kmax::emit(traces, kmax::EmitFormat::json_summary, config.output.summary_path);

  nlohmann::json summary = kmax::summary_json(traces);
  if (config.output.summary_path.empty()) {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << "final regret mean " << summary["final_regret"]["mean"].get<double>()
              << " over " << traces.size() << " seeds; csv: "
              << (config.output.csv_path.empty() ? "(none)" : config.output.csv_path)
              << ", summary: " << config.output.summary_path << "\n";
  }
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& vary) {
  auto eq = vary.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= vary.size())
    throw CLI::ValidationError("--vary expects key=v1,v2,...");
  std::string key = vary.substr(0, eq);
  std::vector<std::string> values;
  std::string rest = vary.substr(eq + 1);
  std::size_t start = 0;
  while (true) {
    std::size_t comma = rest.find(',', start);
    values.push_back(rest.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }

  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open config file: " + config_path);
  nlohmann::json base;
  in >> base;

  for (std::size_t i = 0; i < values.size(); ++i) {
    std::vector<kmax::ExperimentConfig> expanded =
        kmax::expand_sweep(base, key, {values[i]});
    const kmax::ExperimentConfig& config = expanded.front();
    std::vector<kmax::RegretTrace> traces = kmax::run_experiment(config);
    if (!config.output.csv_path.empty())
      kmax::emit(traces, kmax::EmitFormat::csv, config.output.csv_path);
    if (!config.output.summary_path.empty())
      kmax::emit(traces, kmax::EmitFormat::json_summary, config.output.summary_path);
    nlohmann::json summary = kmax::summary_json(traces);
    std::cout << key << "=" << values[i] << ": final regret mean "
              << summary["final_regret"]["mean"].get<double>();
    if (!summary["exponent"].is_null())
      std::cout << ", growth exponent mean " << summary["exponent"]["mean"].get<double>();
    std::cout << "\n";
  }
  return 0;
}

int run_verify(const std::string& group, bool fast) {
  kmax::VerifyScale scale;
  if (fast) {
    scale.discretization_instances = 10;
    scale.equivalence_grids = 100;
    scale.bruteforce_grids = 30;
    scale.monotonicity_grids = 100;
    scale.roundtrip_grids = 100;
    scale.decomposition_samples = 100;
    scale.oracle_instances = 100;
    scale.conc_horizon = 2000;
    scale.conc_seeds = 5;
    scale.mle_fd_instances = 25;
    scale.coverage_seeds = 10;
    scale.coverage_horizon = 500;
  }
  std::vector<kmax::CheckResult> results = kmax::verify_group(group, scale);
  bool all_pass = true;
  for (const kmax::CheckResult& result : results) {
    all_pass = all_pass && result.pass;
    std::printf("[%s] %s: %s (%.2fs)\n", result.pass ? "PASS" : "FAIL", result.name.c_str(),
                result.detail.c_str(), result.seconds);
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous K-Max / exponential K-Min bandit simulation harness"};
  app.require_subcommand(0, 1);

  bool print_schema = false;
  app.add_flag("--print-schema", print_schema, "print the config file schema and exit");

  auto* simulate = app.add_subcommand("simulate", "run one experiment config");
  std::string sim_config;
  bool dump_state = false, diagnostics = false;
  int workers = -1;
  simulate->add_option("--config", sim_config, "config file (JSON)")->required();
  simulate->add_flag("--dump-state", dump_state, "dump final policy state as JSON");
  simulate->add_flag("--diagnostics", diagnostics, "record per-round diagnostic columns");
  simulate->add_option("--workers", workers, "seed-parallel worker count override");

  auto* sweep = app.add_subcommand("sweep", "run a config once per value of one key");
  std::string sweep_config, vary;
  sweep->add_option("--config", sweep_config, "config file (JSON)")->required();
  sweep->add_option("--vary", vary, "key=v1,v2,... (dotted keys reach nested tables)")
      ->required();

  auto* verify = app.add_subcommand("verify", "run a property suite; exit 0 iff all pass");
  std::string group;
  verify->add_option("group", group, "lemmas | oracle | concentration | mle")->required();
  bool fast = false;
  verify->add_flag("--fast", fast, "reduced scales for a quick look");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_schema) {
      std::cout << kmax::config_schema();
      return 0;
    }
    if (simulate->parsed()) return run_simulate(sim_config, dump_state, diagnostics, workers);
    if (sweep->parsed()) return run_sweep(sweep_config, vary);
    if (verify->parsed()) return run_verify(group, fast);
    std::cout << app.help();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
