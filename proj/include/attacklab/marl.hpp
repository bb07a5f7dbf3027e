#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "attacklab/attack_env.hpp"
#include "attacklab/gnn.hpp"

namespace attacklab {

/// Action-value network: a 2-layer GraphSAGE encoder over the perturbed graph
/// plus two linear heads. Q(u, v) is the dot product of the ReLU-activated
/// head outputs on the two endpoint embeddings. The encoder is shared across
/// the campaign's agents by default; heads are per-agent.
struct QNetwork {
  std::shared_ptr<GnnEncoder> encoder;
  ad::Parameter head_user;  // output_dim x head_dim
  ad::Parameter head_post;  // output_dim x head_dim

  std::vector<ad::Parameter*> parameters();
};

struct MarlConfig {
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay = 0.995;  // multiplicative, per episode
  int episodes = 300;
  double lr = 0.005;
  int replay_capacity = 4096;
  int batch_size = 64;
  /// Actions per agent per controller round; empty derives counts from the
  /// agents' total budgets (round size 3, at least 1 per nonempty agent).
  std::vector<int> proportion;
  std::uint64_t seed = 0;
  int qnet_hidden_dim = 16;
  int qnet_head_dim = 16;
  bool per_agent_encoders = false;

  void validate() const;
};

/// Replayed experience. States are stored as added-edge logs (compact and
/// exact); embeddings are recomputed on demand.
struct Transition {
  std::vector<AddedEdge> state_log;
  AttackAction action;
  double reward = 0.0;
  std::vector<AddedEdge> next_log;
  bool terminal = false;
};

/// Embeddings of the 2-hop neighborhood around targets and controlled users,
/// keyed back to full-graph indices. Nodes outside the neighborhood have no
/// row; policies restrict the action space to embedded endpoints.
struct StateEmbedding {
  Matrix nodes;
  std::unordered_map<int, int> user_row;
  std::unordered_map<int, int> post_row;
};

std::vector<QNetwork> make_qnetworks(int n_agents, int feature_dim, const MarlConfig& cfg,
                                     Rng& rng);

StateEmbedding embed_state(const QNetwork& qnet, const GameState& state,
                           const CampaignContext& ctx);

/// relu(h_u W1) . relu(h_v W2)
double q_value(const QNetwork& qnet, const Eigen::RowVectorXd& h_u,
               const Eigen::RowVectorXd& h_v);

/// Argmax of q_value over this agent's legal actions with embedded endpoints;
/// ties break lexicographically by (user, post).
std::optional<AttackAction> greedy_action(const QNetwork& qnet, const GameState& state,
                                          const CampaignContext& ctx, int agent_id);
std::optional<AttackAction> epsilon_greedy_action(const QNetwork& qnet, const GameState& state,
                                                  const CampaignContext& ctx, int agent_id,
                                                  double epsilon, Rng& rng);

struct RoundRecord {
  int agent_id = -1;
  AttackAction action;
  std::vector<AddedEdge> before;
  std::vector<AddedEdge> after;
};

struct RoundResult {
  GameState state;
  std::vector<RoundRecord> applied;
};

/// One controller round: agents act in fixed order (bot, cyborg, crowd
/// worker), each taking up to proportion[i] epsilon-greedy actions, applied
/// immediately so later picks see the refreshed state.
RoundResult controller_round(const GameState& state, const CampaignContext& ctx,
                             std::vector<QNetwork>& qnets, const std::vector<int>& proportion,
                             double epsilon, Rng& rng);

/// Round-size-3 allocation proportional to |controlled| x budget, at least one
/// action per nonempty agent.
std::vector<int> default_proportion(const std::vector<AgentSpec>& specs);

/// Mean squared error of Q(s, a) against r + gamma * max_a' Q(s', a')
/// (r alone on terminal transitions); accumulates gradients into the
/// network's parameters.
double q_loss_and_grads(QNetwork& qnet, const std::vector<Transition>& batch,
                        std::shared_ptr<const EngagementGraph> base, const CampaignContext& ctx,
                        int agent_id, double gamma);

/// One gradient step on the loss above. Returns the mean batch loss.
double q_update(QNetwork& qnet, const std::vector<Transition>& batch,
                std::shared_ptr<const EngagementGraph> base, const CampaignContext& ctx,
                int agent_id, double gamma, double lr);

struct EpisodeStats {
  int total_reward = 0;
  double success_rate = 0.0;
};

struct MarlResult {
  std::vector<QNetwork> qnets;
  std::vector<EpisodeStats> history;
};

MarlResult train_marl(std::shared_ptr<const EngagementGraph> g,
                      const std::vector<AgentSpec>& specs, const std::vector<int>& targets,
                      const GnnModel& surrogate, AttackMode mode, const MarlConfig& cfg);

struct AttackReport {
  double success_rate = 0.0;
  std::vector<std::uint8_t> flipped;  // per target
  std::vector<AddedEdge> edges;
  std::vector<int> episode_rewards;
};

/// Deterministic greedy rollout (epsilon = 0) with the trained networks.
AttackReport attack(std::shared_ptr<const EngagementGraph> g, const std::vector<AgentSpec>& specs,
                    const std::vector<int>& targets, const GnnModel& surrogate, AttackMode mode,
                    std::vector<QNetwork>& qnets);

/// Checkpoint: the gnn-model format with a `qnet` header token; shared encoder
/// blocks first, then per-agent head blocks.
void save_qnetworks(const std::vector<QNetwork>& qnets, const std::string& path);
std::vector<QNetwork> load_qnetworks(const std::string& path);

}  // namespace attacklab
