#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kmax/harness.hpp"
#include "kmax/verify.hpp"

using namespace kmax;

namespace {

nlohmann::json small_kmax_config(const std::string& policy) {
  return nlohmann::json{
      {"problem", "kmax_continuous"},
      {"policy", policy},
      {"horizon", 400},
      {"seeds", {1, 2, 3}},
      {"k", 2},
      {"arms",
       {{{"kind", "uniform_mixture"},
         {"weights", {0.3, 0.7}},
         {"intervals", {{0.0, 0.6}, {0.6, 1.0}}}},
        {{"kind", "uniform_mixture"},
         {"weights", {0.7, 0.3}},
         {"intervals", {{0.0, 0.4}, {0.4, 1.0}}}},
        {{"kind", "truncated_gaussian"}, {"mu", 0.5}, {"sigma", 0.3}},
        {{"kind", "beta"}, {"a", 1.0}, {"b", 1.0}}}},
      {"quad_points", 2001},
      {"dck", {{"epsilon", 0.2}, {"lipschitz", 2.0}}},
  };
}

nlohmann::json small_kmin_config(const std::string& policy) {
  return nlohmann::json{
      {"problem", "kmin_exponential"},
      {"policy", policy},
      {"horizon", 300},
      {"seeds", {4, 5}},
      {"k", 2},
      {"model",
       {{"theta_star", {1.0, 0.7}},
        {"features", {{0.9, 0.2}, {0.6, 0.5}, {0.3, 0.8}, {0.5, 0.3}, {0.2, 0.4}}},
        {"v_bound", 2.0}}},
  };
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

RegretTrace synthetic_trace(const std::function<double(double)>& cum_of_t, std::int64_t horizon) {
  RegretTrace trace;
  trace.seed = 1;
  trace.config_digest = "0";
  double prev = 0.0;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    double cum = cum_of_t(static_cast<double>(t));
    trace.rounds.push_back(RoundRecord{t, {0}, cum - prev, cum, {}});
    prev = cum;
  }
  return trace;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("best_action_exact on one-hot K-Min features picks the largest rates") {
  Eigen::VectorXd theta(5);
  theta << 0.3, 0.9, 0.5, 0.7, 0.2;
  std::vector<Eigen::VectorXd> features;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(5);
    e(i) = 1.0;
    features.push_back(e);
  }
  ExpLinearModel model = make_exp_linear_model(theta, features, 2.0, 2);
  BestAction best = best_action_exact(model);
  CHECK(best.subset == ActionSet{1, 3});
  CHECK(best.value == doctest::Approx(1.0 / 1.6).epsilon(1e-12));
}

TEST_CASE("best_action_exact keeps a stochastically dominant arm") {
  ExperimentConfig config = parse_config(small_kmax_config("oracle_known"));
  BestAction best = best_action_exact(config.arms, 2, 2001);
  CHECK(std::binary_search(best.subset.begin(), best.subset.end(), 0));  // the top-heavy arm

  BestAction all = best_action_exact(config.arms, 4, 2001);
  CHECK(all.subset == ActionSet{0, 1, 2, 3});
}

TEST_CASE("oracle_known accrues exactly zero regret") {
  ExperimentConfig config = parse_config(small_kmax_config("oracle_known"));
  std::vector<RegretTrace> traces = run_experiment(config);
  REQUIRE(traces.size() == 3);
  for (const RegretTrace& trace : traces) {
    CHECK(trace.rounds.size() == 400);
    CHECK(trace.rounds.back().cum_regret == 0.0);
  }
  CHECK_FALSE(fit_growth_exponent(traces[0]).has_value());  // undefined on zero regret
}

TEST_CASE("uniform_random regret grows linearly") {
  nlohmann::json doc = small_kmax_config("uniform_random");
  doc["horizon"] = 4000;
  ExperimentConfig config = parse_config(doc);
  for (const RegretTrace& trace : run_experiment(config)) {
    auto exponent = fit_growth_exponent(trace);
    REQUIRE(exponent.has_value());
    CHECK(*exponent == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("cumulative regret is nonnegative and nondecreasing") {
  ExperimentConfig config = parse_config(small_kmax_config("dck_ucb"));
  for (const RegretTrace& trace : run_experiment(config)) {
    double prev = 0.0;
    for (const RoundRecord& record : trace.rounds) {
      CHECK(record.inst_regret >= -1e-12);
      CHECK(record.cum_regret >= prev - 1e-12);
      prev = record.cum_regret;
    }
  }
}

TEST_CASE("kmin runs produce the same invariants") {
  ExperimentConfig config = parse_config(small_kmin_config("mle_exp"));
  std::vector<RegretTrace> traces = run_experiment(config);
  REQUIRE(traces.size() == 2);
  for (const RegretTrace& trace : traces) {
    CHECK(trace.rounds.size() == 300);
    double prev = 0.0;
    for (const RoundRecord& record : trace.rounds) {
      CHECK(record.inst_regret >= -1e-12);
      prev = record.cum_regret;
    }
    CHECK(trace.rounds.back().cum_regret > 0.0);
  }
}

TEST_CASE("policy ordering: oracle <= learner <= uniform on the small instance") {
  auto final_mean = [](const std::vector<RegretTrace>& traces) {
    double sum = 0.0;
    for (const RegretTrace& trace : traces) sum += trace.rounds.back().cum_regret;
    return sum / static_cast<double>(traces.size());
  };
  nlohmann::json base = small_kmax_config("oracle_known");
  base["horizon"] = 2000;
  double oracle = final_mean(run_experiment(parse_config(base)));
  base["policy"] = "dck_ucb";
  double learner = final_mean(run_experiment(parse_config(base)));
  base["policy"] = "uniform_random";
  double uniform = final_mean(run_experiment(parse_config(base)));
  CHECK(oracle == 0.0);
  CHECK(learner < uniform);

  nlohmann::json kmin = small_kmin_config("mle_exp");
  kmin["horizon"] = 2000;
  double kmin_learner = final_mean(run_experiment(parse_config(kmin)));
  kmin["policy"] = "uniform_random";
  double kmin_uniform = final_mean(run_experiment(parse_config(kmin)));
  kmin["policy"] = "oracle_known";
  double kmin_oracle = final_mean(run_experiment(parse_config(kmin)));
  CHECK(kmin_oracle == 0.0);
  CHECK(kmin_learner < kmin_uniform);
}

TEST_CASE("fit_growth_exponent recovers synthetic power laws") {
  RegretTrace power = synthetic_trace([](double t) { return 2.0 * std::pow(t, 0.75); }, 3000);
  CHECK(*fit_growth_exponent(power) == doctest::Approx(0.75).epsilon(1e-6));

  RegretTrace linear = synthetic_trace([](double t) { return 0.3 * t; }, 3000);
  CHECK(*fit_growth_exponent(linear) == doctest::Approx(1.0).epsilon(1e-9));

  Rng rng(17);
  RegretTrace noisy = synthetic_trace(
      [&](double t) { return 5.0 * std::sqrt(t) * (1.0 + 0.05 * (2 * rng.uniform01() - 1)); },
      3000);
  CHECK(*fit_growth_exponent(noisy) == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("csv emission: header plus one row per round, stable bytes") {
  ExperimentConfig config = parse_config(small_kmax_config("dck_ucb"));
  config.diagnostics = true;
  std::vector<RegretTrace> traces = run_experiment(config);

  RegretTrace three;
  three.seed = 9;
  three.config_digest = "x";
  for (std::int64_t t = 1; t <= 3; ++t)
    three.rounds.push_back(RoundRecord{t, {0, 2}, 0.5, 0.5 * t, {}});
  std::string csv = emit_csv_string({three});
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
  CHECK(csv.substr(0, csv.find('\n')) == "t,seed,action,inst_regret,cum_regret");

  // round-trip: emit -> load -> emit reproduces identical bytes
  std::string path = temp_path("kmax_roundtrip.csv");
  emit(traces, EmitFormat::csv, path);
  std::vector<RegretTrace> loaded = load_traces_csv(path);
  std::string first, second = emit_csv_string(loaded);
  {
    std::ifstream in(path, std::ios::binary);
    first.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  CHECK(first == second);
  std::filesystem::remove(path);
}

TEST_CASE("summary statistics aggregate the final regrets") {
  ExperimentConfig config = parse_config(small_kmax_config("uniform_random"));
  std::vector<RegretTrace> traces = run_experiment(config);
  nlohmann::json summary = summary_json(traces);
  double mean = 0.0;
  for (const RegretTrace& trace : traces) mean += trace.rounds.back().cum_regret;
  mean /= static_cast<double>(traces.size());
  CHECK(summary["final_regret"]["mean"].get<double>() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(summary["config_digest"].get<std::string>() == config.digest);
  CHECK(summary["seeds"].size() == traces.size());
}

TEST_CASE("identical configs produce byte-identical CSV; workers do not matter") {
  nlohmann::json doc = small_kmax_config("dck_ucb");
  doc["seeds"] = {11, 12, 13, 14};
  ExperimentConfig sequential = parse_config(doc);
  sequential.workers = 1;
  ExperimentConfig pooled = parse_config(doc);
  pooled.workers = 4;
  std::string a = emit_csv_string(run_experiment(sequential));
  std::string b = emit_csv_string(run_experiment(pooled));
  std::string c = emit_csv_string(run_experiment(pooled));
  CHECK(a == b);
  CHECK(b == c);
}

TEST_CASE("config parsing: digests, defaults and validation") {
  nlohmann::json doc = small_kmax_config("dck_ucb");
  ExperimentConfig config = parse_config(doc);
  CHECK(config.digest.size() == 16);
  CHECK(config.digest == parse_config(doc).digest);
  CHECK(config.dck.epsilon == doctest::Approx(0.2));
  CHECK(config.dck.n == 4);

  nlohmann::json no_eps = doc;
  no_eps["dck"].erase("epsilon");
  ExperimentConfig defaulted = parse_config(no_eps);
  CHECK(defaulted.dck.epsilon ==
        doctest::Approx(default_epsilon(4, 2, 2.0, 400)).epsilon(1e-12));

  nlohmann::json bad = doc;
  bad["policy"] = "mle_exp";  // wrong problem type
  CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
  bad = doc;
  bad["seeds"] = nlohmann::json::array();
  CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);
  bad = doc;
  bad["arms"][0]["kind"] = "cauchy";
  CHECK_THROWS_AS(parse_config(bad), std::invalid_argument);

  nlohmann::json alt = doc;
  alt["dck"]["bonus_log_arg"] = "NMt";
  CHECK(parse_config(alt).dck.bonus_log_arg == BonusLogArg::NMt);
  alt["dck"]["bonus_log_arg"] = "nope";
  CHECK_THROWS_AS(parse_config(alt), std::invalid_argument);

  // kmin delta defaults to 1/T
  ExperimentConfig kmin = parse_config(small_kmin_config("mle_exp"));
  CHECK(kmin.mle.delta == doctest::Approx(1.0 / 300.0));
}

TEST_CASE("sweep expansion rewrites one key and suffixes outputs") {
  nlohmann::json doc = small_kmax_config("dck_ucb");
  doc["output"] = {{"csv", "run.csv"}};
  std::vector<ExperimentConfig> expanded = expand_sweep(doc, "dck.epsilon", {"0.25", "0.1"});
  REQUIRE(expanded.size() == 2);
  CHECK(expanded[0].dck.epsilon == doctest::Approx(0.25));
  CHECK(expanded[1].dck.epsilon == doctest::Approx(0.1));
  CHECK(expanded[0].output.csv_path.find("dck.epsilon=0.25") != std::string::npos);
  CHECK(expanded[0].digest != expanded[1].digest);
}

TEST_CASE("subset value cache is a bounded LRU") {
  SubsetValueCache cache(2);
  cache.put({0}, 1.0);
  cache.put({1}, 2.0);
  CHECK(*cache.get({0}) == 1.0);  // refreshes {0}
  cache.put({2}, 3.0);            // evicts {1}
  CHECK(cache.size() == 2);
  CHECK_FALSE(cache.get({1}).has_value());
  CHECK(*cache.get({0}) == 1.0);
  CHECK(*cache.get({2}) == 3.0);
}

TEST_CASE("diagnostics columns hold the realized feedback and policy internals") {
  nlohmann::json doc = small_kmax_config("dck_ucb");
  doc["horizon"] = 50;
  doc["diagnostics"] = true;
  std::vector<RegretTrace> traces = run_experiment(parse_config(doc));
  CHECK(traces[0].diagnostic_names ==
        std::vector<std::string>{"realized", "bonus", "bias"});
  for (const RoundRecord& record : traces[0].rounds) {
    REQUIRE(record.diagnostics.size() == 3);
    CHECK(record.diagnostics[0] >= 0.0);
    CHECK(record.diagnostics[0] <= 1.0);
    CHECK(record.diagnostics[2] >= 0.0);  // bias term is finite and nonnegative
    CHECK(std::isfinite(record.diagnostics[2]));
  }

  nlohmann::json kmin = small_kmin_config("mle_exp");
  kmin["horizon"] = 50;
  kmin["diagnostics"] = true;
  std::vector<RegretTrace> kmin_traces = run_experiment(parse_config(kmin));
  CHECK(kmin_traces[0].diagnostic_names ==
        std::vector<std::string>{"realized", "gamma", "theta_err"});
}

TEST_CASE("KMAX_OUTPUT_DIR resolves relative output paths") {
  std::string dir = std::filesystem::temp_directory_path().string();
  setenv("KMAX_OUTPUT_DIR", dir.c_str(), 1);
  nlohmann::json doc = small_kmax_config("oracle_known");
  doc["output"] = {{"csv", "envtest.csv"}, {"summary", "/abs/stays.json"}};
  ExperimentConfig config = parse_config(doc);
  unsetenv("KMAX_OUTPUT_DIR");
  CHECK(config.output.csv_path == (std::filesystem::path(dir) / "envtest.csv").string());
  CHECK(config.output.summary_path == "/abs/stays.json");  // absolute paths untouched
}

TEST_CASE("dump_state writes policy state snapshots") {
  nlohmann::json doc = small_kmax_config("dck_ucb");
  doc["horizon"] = 30;
  doc["seeds"] = {2};
  doc["dump_state"] = true;
  std::string path = temp_path("kmax_state.json");
  doc["output"] = {{"state", path}};
  run_experiment(parse_config(doc));
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json dump;
  in >> dump;
  REQUIRE(dump.size() == 1);
  CHECK(dump[0]["t"] == 30);
  CHECK(dump[0]["c"]["rows"] == 4);
  CHECK(dump[0]["sc"]["data"].size() == dump[0]["q_hat"]["data"].size());
  std::filesystem::remove(path);

  nlohmann::json kmin = small_kmin_config("mle_exp");
  kmin["horizon"] = 25;
  kmin["seeds"] = {3};
  kmin["dump_state"] = true;
  std::string kmin_path = temp_path("kmin_state.json");
  kmin["output"] = {{"state", kmin_path}};
  run_experiment(parse_config(kmin));
  std::ifstream kin(kmin_path);
  REQUIRE(kin.good());
  nlohmann::json kdump;
  kin >> kdump;
  REQUIRE(kdump.size() == 1);
  CHECK(kdump[0]["checkpoints"].size() == 25);  // horizon below the stride cap
  CHECK(kdump[0]["checkpoints"].back()["theta_hat"].size() == 2);
  std::filesystem::remove(kmin_path);
}

TEST_CASE("reference instances satisfy their declared shapes") {
  std::vector<ContinuousArm> arms = reference_kmax_arms();
  CHECK(arms.size() == 6);
  for (const ContinuousArm& arm : arms) CHECK(arm.lipschitz_upper <= 2.0 + 1e-9);
  ExpLinearModel model = reference_kmin_model();
  CHECK(model.n() == 8);
  CHECK(model.dim() == 3);
  CHECK(model.k == 2);
}

TEST_SUITE_END();
