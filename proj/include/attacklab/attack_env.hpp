#pragma once

#include <memory>
#include <optional>
#include <unordered_set>
#include <vector>

#include "attacklab/gnn.hpp"
#include "attacklab/graph.hpp"

namespace attacklab {

/// One attacker group: the users it controls and how many edges each of them
/// may add. cost_weight is reporting-only.
struct AgentSpec {
  AgentType type = AgentType::Bot;
  std::vector<int> controlled_users;
  int per_user_edge_budget = 1;
  double cost_weight = 1.0;

  /// Bot 1, Cyborg 3, CrowdWorker 5.
  static int default_edge_budget(AgentType t);
  static AgentSpec make(AgentType t, std::vector<int> users);
};

enum class AttackMode { Direct, Indirect };

const char* mode_name(AttackMode m);
AttackMode parse_mode(const std::string& name);

struct AttackAction {
  int agent_id = -1;
  int user = -1;
  int post = -1;
  bool operator==(const AttackAction&) const = default;
};

struct AddedEdge {
  int user = -1;
  int post = -1;
  int agent_id = -1;
  int step = -1;
};

/// Fixed campaign parameters shared by every state of one attack run.
struct CampaignContext {
  std::vector<AgentSpec> specs;
  std::vector<int> targets;
  AttackMode mode = AttackMode::Indirect;

  CampaignContext() = default;
  CampaignContext(std::vector<AgentSpec> specs, std::vector<int> targets, AttackMode mode);

  bool is_target(int post) const { return target_set_.count(post) > 0; }
  int agent_of_user(int user) const;  // -1 when uncontrolled
  int user_budget(int user) const;

 private:
  std::unordered_set<int> target_set_;
  std::vector<std::pair<int, int>> user_agent_;  // (user, agent_id), sorted
};

/// Perturbation overlay on an immutable base graph: the added-edge log, the
/// per-user spend counters and the step counter. Values are persistent --
/// apply_action returns a new state, the old one stays valid.
class GameState {
 public:
  static GameState clean(std::shared_ptr<const EngagementGraph> base);
  /// Rebuilds a state by replaying a log; validates against the context.
  static GameState replay(std::shared_ptr<const EngagementGraph> base,
                          const CampaignContext& ctx, const std::vector<AddedEdge>& log);

  const EngagementGraph& base() const { return *base_; }
  std::shared_ptr<const EngagementGraph> base_ptr() const { return base_; }
  const std::vector<AddedEdge>& added_edges() const { return added_; }
  int spend(int user) const;
  int step() const { return step_; }

  bool has_effective_edge(int u, int v) const;
  /// Does `user` currently share at least one target in E' = E + added?
  bool user_shares_target(const CampaignContext& ctx, int user) const;
  /// Base graph plus the added edges, materialized.
  EngagementGraph effective() const;

 private:
  std::shared_ptr<const EngagementGraph> base_;
  std::vector<AddedEdge> added_;
  std::vector<int> spend_;
  int step_ = 0;

  friend GameState apply_action(const GameState&, const CampaignContext&, const AttackAction&);
};

/// Legal actions of one agent. Direct mode: controlled user x unshared target.
/// Indirect mode: controlled user that shares a target x unshared real
/// non-target post. Users at budget contribute nothing.
std::vector<AttackAction> legal_actions(const GameState& state, const CampaignContext& ctx,
                                        int agent_id);
std::vector<AttackAction> all_legal_actions(const GameState& state, const CampaignContext& ctx);

GameState apply_action(const GameState& state, const CampaignContext& ctx,
                       const AttackAction& action);

struct EpisodeReward {
  std::vector<int> per_target;  // +1 flipped, -1 held
  int total = 0;
};

/// Eq-style terminal reward: +1 per misclassified target, -1 per correctly
/// classified target, evaluated on the perturbed graph. Shared by all agents.
EpisodeReward episode_reward(const GameState& state, const GnnModel& surrogate,
                             const std::vector<int>& targets);

bool is_terminal(const GameState& state, const CampaignContext& ctx);

double success_rate(const GnnModel& model, const EngagementGraph& g,
                    const std::vector<int>& targets);
double success_rate(const GnnModel& model, const GameState& state,
                    const std::vector<int>& targets);

/// Brute force over all single legal actions; ties break lexicographically by
/// (user, post). Guarded against large action sets.
std::optional<std::pair<AttackAction, int>> best_single_action_oracle(
    const GameState& state, const CampaignContext& ctx, const GnnModel& surrogate,
    int max_actions = 10000);

}  // namespace attacklab
