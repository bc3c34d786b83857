#pragma once

#include <list>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kmax/common.hpp"
#include "kmax/dck_ucb.hpp"
#include "kmax/env_continuous.hpp"
#include "kmax/kmin_exp.hpp"

// Experiment orchestration: config parsing, policy loops with exact
// per-round regret, growth-exponent fits and CSV/JSON artifacts.

namespace kmax {

enum class ProblemKind { kmax_continuous, kmin_exponential };
enum class PolicyKind { dck_ucb, mle_exp, uniform_random, oracle_known };

struct OutputSpec {
  std::string csv_path;      // empty = no CSV
  std::string summary_path;  // empty = no summary
  std::string state_path;    // --dump-state target (JSON)
};

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::kmax_continuous;
  PolicyKind policy = PolicyKind::dck_ucb;
  std::int64_t horizon = 1;
  std::vector<std::uint64_t> seeds;
  int k = 1;

  // kmax_continuous
  std::vector<ContinuousArm> arms;
  DckConfig dck;
  int quad_points = 10001;

  // kmin_exponential
  std::optional<ExpLinearModel> model;
  MleExpConfig mle;

  bool diagnostics = false;
  bool dump_state = false;
  int workers = 1;
  OutputSpec output;

  std::string digest;  // FNV-1a of the canonical config text
  nlohmann::json raw;
};

// Parses and validates a config document; see config_schema() for the
// field reference. Relative output paths are resolved against the
// KMAX_OUTPUT_DIR environment variable when it is set.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
std::string config_schema();

// The KMAX_OUTPUT_DIR resolution applied to config output paths; exposed so
// paths supplied outside the config file route the same way.
std::string resolve_output_path(std::string path);

// Builds one of the builtin arms from its config table.
ContinuousArm arm_from_spec(const nlohmann::json& spec, int label);

struct RoundRecord {
  std::int64_t t = 0;  // 1-based round
  ActionSet action;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  std::vector<double> diagnostics;  // aligned with RegretTrace::diagnostic_names
};

struct RegretTrace {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<std::string> diagnostic_names;
  std::vector<RoundRecord> rounds;
};

struct BestAction {
  ActionSet subset;
  double value = 0.0;
};

// Bounded LRU map from subset (bitmask over at most 64 arms) to its exact
// expected reward; policies revisit few subsets after convergence.
class SubsetValueCache {
 public:
  explicit SubsetValueCache(std::size_t capacity = 100000) : capacity_(capacity) {}
  std::optional<double> get(const ActionSet& s);
  void put(const ActionSet& s, double value);
  std::size_t size() const { return map_.size(); }

 private:
  struct Node {
    std::uint64_t key;
    double value;
  };
  std::size_t capacity_;
  std::list<Node> order_;  // most recent first
  std::unordered_map<std::uint64_t, std::list<Node>::iterator> map_;
};

// Exact best action by exhaustive enumeration (capacity-capped).
// K-Max scores subsets with expected_max_exact (values cached);
// K-Min minimizes 1/(psi' theta*). Lexicographic tie-break.
BestAction best_action_exact(const std::vector<ContinuousArm>& arms, int k, int quad_points,
                             double enumeration_cap = 1e6, SubsetValueCache* cache = nullptr);
BestAction best_action_exact(const ExpLinearModel& model, double enumeration_cap = 1e6);

// Runs the configured policy for every seed (fanned out over
// config.workers threads, gathered in seed order) and records exact
// instantaneous regret per round.
std::vector<RegretTrace> run_experiment(const ExperimentConfig& config);

// Least-squares slope of log(cum regret) vs log(t) past the burn-in.
// Empty result when the post-burn-in regret is not strictly positive
// (distinguishes "no regret measured" from a fit of 0).
std::optional<double> fit_growth_exponent(const RegretTrace& trace,
                                          double burn_in_fraction = 0.2);

enum class EmitFormat { csv, json_summary };

// csv columns: t,seed,action,inst_regret,cum_regret[,diagnostics...];
// json_summary: per-seed final regret and fitted exponent, mean/std across
// seeds, config digest. Doubles are written in shortest round-trip form so
// emitted files are byte-stable.
void emit(const std::vector<RegretTrace>& traces, EmitFormat format, const std::string& path);
std::string emit_csv_string(const std::vector<RegretTrace>& traces);
nlohmann::json summary_json(const std::vector<RegretTrace>& traces);

// Inverse of the CSV emitter; emit(load(...)) reproduces identical bytes.
std::vector<RegretTrace> load_traces_csv(const std::string& path);

std::string fnv1a_digest(const std::string& text);

// Expands --vary key=v1,v2,... into one config per value (dotted keys
// address nested tables, e.g. dck.epsilon).
std::vector<ExperimentConfig> expand_sweep(const nlohmann::json& base, const std::string& key,
                                           const std::vector<std::string>& values);

}  // namespace kmax
