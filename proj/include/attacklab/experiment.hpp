#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attacklab/baselines.hpp"
#include "attacklab/graph_generator.hpp"
#include "attacklab/marl.hpp"

namespace attacklab {

enum class AttackerKind { Marl, RdEdge, RdNode, RlA1, RlA2, RlA3 };

const char* attacker_name(AttackerKind k);
AttackerKind parse_attacker(const std::string& name);

/// Which posts to attack, judged on the clean graph.
struct TargetSelector {
  int label_class = 1;                        // 1 = fake, 0 = real
  std::optional<Split> split = Split::Test;   // nullopt = all splits
  std::optional<int> min_degree;              // clean-graph degree, inclusive
  std::optional<int> max_degree;              // exclusive
  bool correct_only = true;  // drop posts the reporting model already misclassifies
};

struct PoolConfig {
  int bot = 8;
  int cyborg = 8;
  int crowd = 3;
  int bot_budget = 1;
  int cyborg_budget = 3;
  int crowd_budget = 5;
};

struct ExperimentConfig {
  std::string graph_path;  // empty: use the generator below
  GeneratorParams generator;
  std::uint64_t graph_seed = 42;

  GnnArch arch = GnnArch::Gcn;
  int surrogate_epochs = 200;
  double surrogate_lr = 0.02;
  double surrogate_momentum = 0.9;
  int surrogate_hidden = 32;

  PoolConfig pools;
  TargetSelector targets;
  AttackMode mode = AttackMode::Indirect;
  AttackerKind attacker = AttackerKind::Marl;
  MarlConfig marl;
  int repetitions = 5;
  std::uint64_t base_seed = 42;
  /// Evaluate reported success rates against an independently seeded victim of
  /// the same architecture (grey-box transfer) instead of the surrogate.
  bool use_victim = true;
  /// Real wall-clock times in the CSV; off by default so reruns are
  /// byte-identical.
  bool emit_timings = false;

  /// The default acceptance benchmark: generator 300/80/900, seed 42,
  /// low-degree fake test posts as targets.
  static ExperimentConfig benchmark();
  /// Larger graph whose fake posts populate all three degree buckets
  /// (500/80/3000 with a planted viral post); crowd-worker direct attacks.
  static ExperimentConfig degree_benchmark();

  void validate() const;
};

/// Flat key=value config file with [section] headers.
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg, const std::string& path);

struct ReportRow {
  std::string attacker;
  std::string arch;
  std::string mode;
  std::string target_class;
  std::string bucket = "all";
  std::string seed;  // repetition seed or "mean"
  double success_rate = 0.0;
  double edges_added = 0.0;
  long long wall_ms = 0;
};

std::string rows_to_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> csv_to_rows(const std::string& csv);

/// One repetition's full record: the JSON campaign log plus everything the
/// audit needs to replay it.
struct CampaignLog {
  std::uint64_t seed = 0;
  double success_rate = 0.0;  // against the reporting model
  std::vector<AddedEdge> edges;
  std::vector<InjectedUser> injected;  // rd-node only
  nlohmann::json json;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;  // one per repetition plus a mean row
  std::vector<CampaignLog> logs;

  std::shared_ptr<const EngagementGraph> graph;
  GnnModel surrogate;
  GnnModel reporting_model;  // the victim when use_victim, else the surrogate
  std::vector<int> targets;
  std::vector<AgentSpec> specs;
};

/// Posts matching the selector; correctness is judged against `model`.
std::vector<int> select_targets(const EngagementGraph& g, const GnnModel& model,
                                const TargetSelector& sel);

/// Pools drawn disjointly (crowd worker first, then cyborg, then bot).
std::vector<AgentSpec> build_pools(const EngagementGraph& g, const PoolConfig& pools,
                                   std::uint64_t seed);

/// Users with under 20% fake shares, uniformly sampled.
std::vector<int> good_user_pool(const EngagementGraph& g, int size, std::uint64_t seed);

/// Clean-graph degree buckets [0,10), [10,100), [100,inf).
std::vector<std::vector<int>> degree_buckets(const EngagementGraph& g,
                                             const std::vector<int>& posts);
const char* bucket_label(int bucket);

/// Trains surrogate (and victim), builds pools and targets, runs the
/// configured attacker `repetitions` times with seeds base..base+r, and
/// emits per-repetition rows plus a mean row. Deterministic per config
/// unless emit_timings is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Replays a campaign log onto the clean graph, revalidating legality and
/// budgets edge by edge, and recomputes the success rate. Returns an error
/// description on any mismatch.
std::optional<std::string> audit_campaign(const ExperimentResult& result, const CampaignLog& log,
                                          AttackMode mode);

struct SuiteResult {
  std::vector<ReportRow> rows;
  std::vector<ExperimentResult> runs;
};

/// Single-agent attacks with growing pool sizes; rows carry "pool=<n>" in the
/// bucket column.
SuiteResult sweep_budget(ExperimentConfig base, AgentType agent, const std::vector<int>& sizes);

/// One experiment per degree bucket of the target class; rows carry the
/// bucket label. Throws EmptyTargets if a bucket holds no eligible post.
SuiteResult by_degree(ExperimentConfig base);

/// Paired direct/indirect campaigns with a pool of "good" users (under 20%
/// fake shares) driving a single RL agent.
SuiteResult direct_vs_indirect(ExperimentConfig base, int good_pool_size);

/// Writes rows.csv and one campaign_<n>.json per repetition under out_dir.
void write_experiment_outputs(const ExperimentResult& result, const std::string& out_dir,
                              const std::string& stem);

}  // namespace attacklab
