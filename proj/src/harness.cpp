#include "kmax/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace kmax {

namespace {

std::uint64_t subset_key(const ActionSet& s) {
  std::uint64_t key = 0;
  for (int i : s) {
    if (i < 0 || i >= 64) throw std::invalid_argument("subset cache supports arm indices < 64");
    key |= std::uint64_t{1} << i;
  }
  return key;
}

ProblemKind parse_problem(const std::string& name) {
  if (name == "kmax_continuous") return ProblemKind::kmax_continuous;
  if (name == "kmin_exponential") return ProblemKind::kmin_exponential;
  throw std::invalid_argument("config: unknown problem '" + name + "'");
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "dck_ucb") return PolicyKind::dck_ucb;
  if (name == "mle_exp") return PolicyKind::mle_exp;
  if (name == "uniform_random") return PolicyKind::uniform_random;
  if (name == "oracle_known") return PolicyKind::oracle_known;
  throw std::invalid_argument("config: unknown policy '" + name + "'");
}

}  // namespace

std::string resolve_output_path(std::string path) {
  if (path.empty()) return path;
  const char* base = std::getenv("KMAX_OUTPUT_DIR");
  if (base != nullptr && *base != '\0' && std::filesystem::path(path).is_relative())
    return (std::filesystem::path(base) / path).string();
  return path;
}

std::optional<double> SubsetValueCache::get(const ActionSet& s) {
  auto it = map_.find(subset_key(s));
  if (it == map_.end()) return std::nullopt;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->value;
}

void SubsetValueCache::put(const ActionSet& s, double value) {
  std::uint64_t key = subset_key(s);
  auto it = map_.find(key);
  if (it != map_.end()) {
    it->second->value = value;
    order_.splice(order_.begin(), order_, it->second);
    return;
  }
  order_.push_front(Node{key, value});
  map_.emplace(key, order_.begin());
  if (map_.size() > capacity_) {
    map_.erase(order_.back().key);
    order_.pop_back();
  }
}

BestAction best_action_exact(const std::vector<ContinuousArm>& arms, int k, int quad_points,
                             double enumeration_cap, SubsetValueCache* cache) {
  const int n = static_cast<int>(arms.size());
  if (k < 1 || k > n) throw std::invalid_argument("best_action_exact: need 1 <= K <= N");
  if (subset_count(n, k) > enumeration_cap)
    throw CapacityError("best_action_exact: subset enumeration exceeds the cap");
  BestAction best;
  best.value = -1.0;
  for_each_subset(n, k, [&](const ActionSet& s) {
    double value = expected_max_exact(arms, s, quad_points);
    if (cache != nullptr) cache->put(s, value);
    if (value > best.value) {
      best.value = value;
      best.subset = s;
    }
  });
  return best;
}

BestAction best_action_exact(const ExpLinearModel& model, double enumeration_cap) {
  if (subset_count(model.n(), model.k) > enumeration_cap)
    throw CapacityError("best_action_exact: subset enumeration exceeds the cap");
  BestAction best;
  best.value = std::numeric_limits<double>::infinity();
  for_each_subset(model.n(), model.k, [&](const ActionSet& s) {
    double loss = expected_min_loss(model, s);
    if (loss < best.value) {
      best.value = loss;
      best.subset = s;
    }
  });
  return best;
}

ContinuousArm arm_from_spec(const nlohmann::json& spec, int label) {
  std::string kind = spec.at("kind").get<std::string>();
  if (kind == "truncated_gaussian")
    return truncated_gaussian_arm(spec.at("mu").get<double>(), spec.at("sigma").get<double>(),
                                  label);
  if (kind == "uniform_mixture") {
    std::vector<double> weights = spec.at("weights").get<std::vector<double>>();
    std::vector<std::pair<double, double>> intervals;
    for (const auto& pair : spec.at("intervals"))
      intervals.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    return uniform_mixture_arm(weights, intervals, label);
  }
  if (kind == "beta") return beta_arm(spec.at("a").get<double>(), spec.at("b").get<double>(), label);
  throw std::invalid_argument("config: unknown arm kind '" + kind + "'");
}

ExperimentConfig parse_config(const nlohmann::json& doc) {
  ExperimentConfig config;
  config.raw = doc;
  config.digest = fnv1a_digest(doc.dump());

  config.problem = parse_problem(doc.at("problem").get<std::string>());
  config.policy = parse_policy(doc.at("policy").get<std::string>());
  config.horizon = doc.at("horizon").get<std::int64_t>();
  if (config.horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
  config.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  if (config.seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
  config.k = doc.at("k").get<int>();

  config.diagnostics = doc.value("diagnostics", false);
  config.dump_state = doc.value("dump_state", false);
  config.workers = doc.value("workers", 1);
  if (config.workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (doc.contains("output")) {
    const auto& out = doc.at("output");
    config.output.csv_path = resolve_output_path(out.value("csv", ""));
    config.output.summary_path = resolve_output_path(out.value("summary", ""));
    config.output.state_path = resolve_output_path(out.value("state", ""));
  }

  if (config.problem == ProblemKind::kmax_continuous) {
    if (config.policy == PolicyKind::mle_exp)
      throw std::invalid_argument("config: mle_exp runs on kmin_exponential problems");
    const auto& arm_specs = doc.at("arms");
    int label = 0;
    for (const auto& spec : arm_specs) config.arms.push_back(arm_from_spec(spec, label++));
    const int n = static_cast<int>(config.arms.size());
    if (config.k < 1 || config.k > n) throw std::invalid_argument("config: need 1 <= k <= N");
    config.quad_points = doc.value("quad_points", 10001);

    nlohmann::json dck = doc.value("dck", nlohmann::json::object());
    config.dck.n = n;
    config.dck.k = config.k;
    config.dck.horizon = config.horizon;
    double max_arm_l = 1.0;
    for (const auto& arm : config.arms) max_arm_l = std::max(max_arm_l, arm.lipschitz_upper);
    config.dck.lipschitz = dck.value("lipschitz", max_arm_l);
    if (dck.contains("epsilon") && !dck.at("epsilon").is_null()) {
      config.dck.epsilon = dck.at("epsilon").get<double>();
    } else {
      config.dck.epsilon = default_epsilon(n, config.k, config.dck.lipschitz, config.horizon,
                                           dck.value("c0", 1.0));
    }
    std::string oracle = dck.value("oracle", "exact");
    if (oracle == "exact")
      config.dck.oracle_choice = OracleChoice::exact;
    else if (oracle == "greedy")
      config.dck.oracle_choice = OracleChoice::greedy;
    else
      throw std::invalid_argument("config: unknown oracle '" + oracle + "'");
    std::string log_arg = dck.value("bonus_log_arg", "NMT");
    if (log_arg == "NMT")
      config.dck.bonus_log_arg = BonusLogArg::NMT;
    else if (log_arg == "NMt")
      config.dck.bonus_log_arg = BonusLogArg::NMt;
    else
      throw std::invalid_argument("config: bonus_log_arg must be NMT or NMt");
    config.dck.enumeration_cap = dck.value("enumeration_cap", 1e6);
  } else {
    if (config.policy == PolicyKind::dck_ucb)
      throw std::invalid_argument("config: dck_ucb runs on kmax_continuous problems");
    const auto& model_doc = doc.at("model");
    std::vector<double> theta = model_doc.at("theta_star").get<std::vector<double>>();
    Eigen::VectorXd theta_star = Eigen::Map<Eigen::VectorXd>(theta.data(), theta.size());
    std::vector<Eigen::VectorXd> features;
    for (const auto& row : model_doc.at("features")) {
      std::vector<double> phi = row.get<std::vector<double>>();
      features.push_back(Eigen::Map<Eigen::VectorXd>(phi.data(), phi.size()));
    }
    double v_bound = model_doc.at("v_bound").get<double>();
    config.model = make_exp_linear_model(std::move(theta_star), std::move(features), v_bound,
                                         config.k);

    nlohmann::json mle = doc.value("mle", nlohmann::json::object());
    config.mle.delta = mle.contains("delta") && !mle.at("delta").is_null()
                           ? mle.at("delta").get<double>()
                           : 1.0 / static_cast<double>(config.horizon);
    config.mle.tol = mle.value("tol", 1e-9);
    if (mle.contains("lambda_override") && !mle.at("lambda_override").is_null())
      config.mle.lambda_override = mle.at("lambda_override").get<double>();
    if (mle.contains("gamma_override") && !mle.at("gamma_override").is_null())
      config.mle.gamma_override = mle.at("gamma_override").get<double>();
    config.mle.enumeration_cap = mle.value("enumeration_cap", 1e6);
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json doc;
  in >> doc;
  return parse_config(doc);
}

namespace {

struct SharedRunContext {
  // kmax
  BestAction best;
  ProbGrid q_star;               // diagnostics only
  SubsetValueCache value_cache;  // expected_max_exact per subset
  std::mutex cache_mutex;
  // kmin
  double l_star = 1.0;
};

struct SeedRunResult {
  RegretTrace trace;
  nlohmann::json state_dump;
};

// Re-raises a per-round failure with the seed and round attached.
[[noreturn]] void rethrow_with_round(const std::exception& e, std::uint64_t seed,
                                     std::int64_t round) {
  throw std::runtime_error(std::string(e.what()) + " [seed " + std::to_string(seed) +
                           ", round " + std::to_string(round) + "]");
}

double kmax_subset_value(const ExperimentConfig& config, SharedRunContext& shared,
                         const ActionSet& s) {
  {
    std::lock_guard<std::mutex> lock(shared.cache_mutex);
    if (auto hit = shared.value_cache.get(s)) return *hit;
  }
  double value = expected_max_exact(config.arms, s, config.quad_points);
  std::lock_guard<std::mutex> lock(shared.cache_mutex);
  shared.value_cache.put(s, value);
  return value;
}

nlohmann::json table_to_json(const Table<double>& table) {
  return nlohmann::json{{"rows", table.rows()}, {"cols", table.cols()}, {"data", table.data()}};
}

nlohmann::json table_to_json(const Table<std::int64_t>& table) {
  return nlohmann::json{{"rows", table.rows()}, {"cols", table.cols()}, {"data", table.data()}};
}

SeedRunResult run_kmax_seed(const ExperimentConfig& config, SharedRunContext& shared,
                            std::uint64_t seed) {
  const int n = static_cast<int>(config.arms.size());
  ContinuousEnv env{config.arms, config.k, seed};
  Rng rng(seed);

  SeedRunResult result;
  RegretTrace& trace = result.trace;
  trace.seed = seed;
  trace.config_digest = config.digest;
  if (config.diagnostics) {
    trace.diagnostic_names = {"realized"};
    if (config.policy == PolicyKind::dck_ucb) {
      trace.diagnostic_names.push_back("bonus");
      trace.diagnostic_names.push_back("bias");
    }
  }
  trace.rounds.reserve(config.horizon);

  DckState dck;
  if (config.policy == PolicyKind::dck_ucb) dck = DckState::init(config.dck);

  double cum = 0.0;
  for (std::int64_t t = 1; t <= config.horizon; ++t) try {
    ActionSet action;
    switch (config.policy) {
      case PolicyKind::dck_ucb:
        action = select_action(dck, config.dck);
        break;
      case PolicyKind::uniform_random:
        action = rng.sample_subset(n, config.k);
        break;
      case PolicyKind::oracle_known:
        action = shared.best.subset;
        break;
      default:
        throw std::logic_error("unsupported policy for kmax problems");
    }

    RoundRecord record;
    record.t = t;
    record.action = action;
    record.inst_regret = shared.best.value - kmax_subset_value(config, shared, action);
    if (record.inst_regret < -1e-12)
      throw std::logic_error("negative instantaneous regret: best action is not optimal");
    cum += record.inst_regret;
    record.cum_regret = cum;

    std::vector<double> outcomes = sample_outcomes(env, action, rng);
    ValueIndexFeedback fb = value_index_feedback(outcomes, action);
    if (config.diagnostics) {
      record.diagnostics.push_back(fb.reward);
      if (config.policy == PolicyKind::dck_ucb) {
        auto [bonus_t, bias_t] = bonus_bias_diagnostics(dck, action, shared.q_star, config.dck);
        record.diagnostics.push_back(bonus_t);
        record.diagnostics.push_back(bias_t);
      }
    }
    if (config.policy == PolicyKind::dck_ucb) {
      fb.bin = bin_of(fb.reward, dck.grid);
      update(dck, action, fb);
    }
    trace.rounds.push_back(std::move(record));
  } catch (const std::exception& e) {
    rethrow_with_round(e, seed, t);
  }

  if (config.dump_state && config.policy == PolicyKind::dck_ucb) {
    result.state_dump = {{"seed", seed},
                         {"t", dck.counters.t},
                         {"epsilon", dck.grid.epsilon},
                         {"m", dck.grid.m},
                         {"c", table_to_json(dck.counters.c)},
                         {"sc", table_to_json(dck.counters.sc)},
                         {"q_hat", table_to_json(dck.q_hat)}};
  }
  return result;
}

SeedRunResult run_kmin_seed(const ExperimentConfig& config, SharedRunContext& shared,
                            std::uint64_t seed) {
  const ExpLinearModel& model = *config.model;
  Rng rng(seed);

  SeedRunResult result;
  RegretTrace& trace = result.trace;
  trace.seed = seed;
  trace.config_digest = config.digest;
  if (config.diagnostics) {
    trace.diagnostic_names = {"realized"};
    if (config.policy == PolicyKind::mle_exp) {
      trace.diagnostic_names.push_back("gamma");
      trace.diagnostic_names.push_back("theta_err");
    }
  }
  trace.rounds.reserve(config.horizon);

  MleExpState state;
  if (config.policy == PolicyKind::mle_exp) {
    state = MleExpState::init(model, config.mle);
    state.l_star = shared.l_star;
    state.m1 = shared.l_star / std::sqrt(2.0);
  }

  nlohmann::json checkpoints = nlohmann::json::array();
  std::int64_t checkpoint_stride = std::max<std::int64_t>(1, config.horizon / 1024);

  double cum = 0.0;
  for (std::int64_t t = 1; t <= config.horizon; ++t) try {
    ActionSet action;
    double loss = 0.0;
    switch (config.policy) {
      case PolicyKind::mle_exp: {
        RoundOutcome outcome = run_round(model, state, config.mle, rng);
        action = std::move(outcome.subset);
        loss = outcome.loss;
        break;
      }
      case PolicyKind::uniform_random:
        action = rng.sample_subset(model.n(), config.k);
        loss = sample_min_loss(model, action, rng);
        break;
      case PolicyKind::oracle_known:
        action = shared.best.subset;
        loss = sample_min_loss(model, action, rng);
        break;
      default:
        throw std::logic_error("unsupported policy for kmin problems");
    }

    RoundRecord record;
    record.t = t;
    record.action = action;
    record.inst_regret = expected_min_loss(model, action) - shared.best.value;
    if (record.inst_regret < -1e-12)
      throw std::logic_error("negative instantaneous regret: best action is not optimal");
    cum += record.inst_regret;
    record.cum_regret = cum;
    if (config.diagnostics) {
      record.diagnostics.push_back(loss);
      if (config.policy == PolicyKind::mle_exp) {
        record.diagnostics.push_back(state.mle.gamma_t);
        record.diagnostics.push_back((state.mle.theta_hat - model.theta_star).norm());
      }
    }
    trace.rounds.push_back(std::move(record));

    if (config.dump_state && config.policy == PolicyKind::mle_exp &&
        (t % checkpoint_stride == 0 || t == config.horizon)) {
      std::vector<double> theta(state.mle.theta_hat.data(),
                                state.mle.theta_hat.data() + state.mle.theta_hat.size());
      checkpoints.push_back({{"t", t},
                             {"theta_hat", theta},
                             {"lambda", state.mle.lambda_t},
                             {"gamma", state.mle.gamma_t}});
    }
  } catch (const std::exception& e) {
    rethrow_with_round(e, seed, t);
  }

  if (config.dump_state && config.policy == PolicyKind::mle_exp)
    result.state_dump = {{"seed", seed}, {"checkpoints", std::move(checkpoints)}};
  return result;
}

}  // namespace

std::vector<RegretTrace> run_experiment(const ExperimentConfig& config) {
  SharedRunContext shared;
  const bool is_kmax = config.problem == ProblemKind::kmax_continuous;
  if (is_kmax) {
    shared.best = best_action_exact(config.arms, config.k, config.quad_points,
                                    config.dck.enumeration_cap, &shared.value_cache);
    if (config.diagnostics && config.policy == PolicyKind::dck_ucb) {
      BinGrid grid = BinGrid::from_epsilon(config.dck.epsilon);
      shared.q_star = p_to_q(cdf_to_p(config.arms, grid));
    }
  } else {
    shared.best = best_action_exact(*config.model, config.mle.enumeration_cap);
    shared.l_star = sup_expected_loss(*config.model, config.mle.enumeration_cap);
  }

  const std::size_t n_seeds = config.seeds.size();
  std::vector<SeedRunResult> results(n_seeds);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&]() {
    while (true) {
      std::size_t idx = next.fetch_add(1);
      if (idx >= n_seeds) return;
      try {
        results[idx] = is_kmax ? run_kmax_seed(config, shared, config.seeds[idx])
                               : run_kmin_seed(config, shared, config.seeds[idx]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  int n_workers = static_cast<int>(std::min<std::size_t>(config.workers, n_seeds));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  if (config.dump_state && !config.output.state_path.empty()) {
    nlohmann::json dump = nlohmann::json::array();
    for (const auto& r : results)
      if (!r.state_dump.is_null()) dump.push_back(r.state_dump);
    std::ofstream out(config.output.state_path);
    if (!out) throw std::runtime_error("cannot write state dump: " + config.output.state_path);
    out << dump.dump(2) << "\n";
  }

  std::vector<RegretTrace> traces;
  traces.reserve(n_seeds);
  for (auto& r : results) traces.push_back(std::move(r.trace));
  return traces;
}

std::vector<ExperimentConfig> expand_sweep(const nlohmann::json& base, const std::string& key,
                                           const std::vector<std::string>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  std::vector<ExperimentConfig> configs;
  for (const std::string& value : values) {
    nlohmann::json doc = base;
    std::string path = key;
    std::replace(path.begin(), path.end(), '.', '/');
    nlohmann::json::json_pointer pointer("/" + path);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      parsed = value;  // plain string value
    }
    doc[pointer] = parsed;

    // Suffix output files so sweep points do not overwrite each other.
    auto suffix = [&](const std::string& path) {
      if (path.empty()) return path;
      std::filesystem::path p(path);
      std::string stem = p.stem().string() + "_" + key + "=" + value;
      return (p.parent_path() / (stem + p.extension().string())).string();
    };
    if (doc.contains("output")) {
      for (const char* field : {"csv", "summary", "state"})
        if (doc["output"].contains(field))
          doc["output"][field] = suffix(doc["output"][field].get<std::string>());
    }
    configs.push_back(parse_config(doc));
  }
  return configs;
}

std::string config_schema() {
  return R"(Experiment config (JSON object):
  problem   : "kmax_continuous" | "kmin_exponential"
  policy    : "dck_ucb" | "mle_exp" | "uniform_random" | "oracle_known"
  horizon   : integer >= 1 (rounds per seed)
  seeds     : nonempty array of unsigned integers
  k         : subset size (1 <= k <= N)
  diagnostics : bool (default false) - extra per-round columns
  dump_state  : bool (default false) - write policy state to output.state
  workers   : integer >= 1 (seed-parallel worker pool; default 1)
  output    : {csv, summary, state} file paths; relative paths are joined
              onto $KMAX_OUTPUT_DIR when it is set

kmax_continuous fields:
  arms        : array of arm tables, one of
                  {"kind":"truncated_gaussian", "mu":x, "sigma":x}
                  {"kind":"uniform_mixture", "weights":[...],
                   "intervals":[[a,b],...]}   (must cover [0,1])
                  {"kind":"beta", "a":x, "b":x}
  quad_points : quadrature nodes for exact values (default 10001)
  dck         : {epsilon   : bin width; omit for the tuned default,
                 c0        : multiplier inside the epsilon default (1.0),
                 lipschitz : L for the bias term (default: max arm L),
                 oracle    : "exact" | "greedy",
                 bonus_log_arg : "NMT" | "NMt",
                 enumeration_cap : max C(N,K) for exact oracles (1e6)}

kmin_exponential fields:
  model : {theta_star:[...], features:[[...],...], v_bound:x}
  mle   : {delta : confidence level (default 1/horizon),
           tol   : Newton gradient tolerance (1e-9),
           lambda_override, gamma_override : fixed schedule values,
           enumeration_cap : max C(N,K) (1e6)}
)";
}

}  // namespace kmax
