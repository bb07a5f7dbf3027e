#include "attacklab/attack_env.hpp"

#include <algorithm>

namespace attacklab {

int AgentSpec::default_edge_budget(AgentType t) {
  switch (t) {
    case AgentType::Bot:
      return 1;
    case AgentType::Cyborg:
      return 3;
    case AgentType::CrowdWorker:
      return 5;
  }
  return 1;
}

AgentSpec AgentSpec::make(AgentType t, std::vector<int> users) {
  AgentSpec s;
  s.type = t;
  s.controlled_users = std::move(users);
  s.per_user_edge_budget = default_edge_budget(t);
  s.cost_weight = t == AgentType::Bot ? 1.0 : (t == AgentType::Cyborg ? 2.0 : 3.0);
  return s;
}

const char* mode_name(AttackMode m) { return m == AttackMode::Direct ? "direct" : "indirect"; }

AttackMode parse_mode(const std::string& name) {
  if (name == "direct") return AttackMode::Direct;
  if (name == "indirect") return AttackMode::Indirect;
  throw ConfigError("unknown attack mode '" + name + "'");
}

CampaignContext::CampaignContext(std::vector<AgentSpec> s, std::vector<int> t, AttackMode m) {
  specs = std::move(s);
  targets = std::move(t);
  mode = m;
  target_set_.insert(targets.begin(), targets.end());
  for (int i = 0; i < static_cast<int>(specs.size()); ++i)
    for (int u : specs[i].controlled_users) user_agent_.emplace_back(u, i);
  std::sort(user_agent_.begin(), user_agent_.end());
  for (size_t i = 1; i < user_agent_.size(); ++i)
    if (user_agent_[i].first == user_agent_[i - 1].first)
      throw InvalidParams("CampaignContext: user " + std::to_string(user_agent_[i].first) +
                          " controlled by two agents");
}

int CampaignContext::agent_of_user(int user) const {
  auto it = std::lower_bound(user_agent_.begin(), user_agent_.end(), std::make_pair(user, -1));
  if (it != user_agent_.end() && it->first == user) return it->second;
  return -1;
}

int CampaignContext::user_budget(int user) const {
  const int agent = agent_of_user(user);
  return agent < 0 ? 0 : specs[agent].per_user_edge_budget;
}

GameState GameState::clean(std::shared_ptr<const EngagementGraph> base) {
  GameState s;
  s.spend_.assign(base->user_count(), 0);
  s.base_ = std::move(base);
  return s;
}

GameState GameState::replay(std::shared_ptr<const EngagementGraph> base,
                            const CampaignContext& ctx, const std::vector<AddedEdge>& log) {
  GameState s = clean(std::move(base));
  for (const AddedEdge& e : log)
    s = apply_action(s, ctx, {e.agent_id, e.user, e.post});
  return s;
}

int GameState::spend(int user) const {
  if (user < 0 || user >= static_cast<int>(spend_.size()))
    throw InvalidIndex("spend: user " + std::to_string(user));
  return spend_[user];
}

bool GameState::has_effective_edge(int u, int v) const {
  if (base_->has_edge(u, v)) return true;
  for (const AddedEdge& e : added_)
    if (e.user == u && e.post == v) return true;
  return false;
}

bool GameState::user_shares_target(const CampaignContext& ctx, int user) const {
  for (int v : base_->user_neighbors(user))
    if (ctx.is_target(v)) return true;
  for (const AddedEdge& e : added_)
    if (e.user == user && ctx.is_target(e.post)) return true;
  return false;
}

EngagementGraph GameState::effective() const {
  auto edges = base_->edges();
  edges.reserve(edges.size() + added_.size());
  for (const AddedEdge& e : added_) edges.emplace_back(e.user, e.post);
  return EngagementGraph(base_->user_features, base_->post_features, base_->labels(),
                         base_->splits(), std::move(edges));
}

std::vector<AttackAction> legal_actions(const GameState& state, const CampaignContext& ctx,
                                        int agent_id) {
  if (agent_id < 0 || agent_id >= static_cast<int>(ctx.specs.size()))
    throw InvalidIndex("legal_actions: agent " + std::to_string(agent_id));
  const AgentSpec& spec = ctx.specs[agent_id];
  const EngagementGraph& g = state.base();
  std::vector<AttackAction> out;
  for (int u : spec.controlled_users) {
    if (state.spend(u) >= spec.per_user_edge_budget) continue;
    if (ctx.mode == AttackMode::Direct) {
      for (int v : ctx.targets)
        if (!state.has_effective_edge(u, v)) out.push_back({agent_id, u, v});
    } else {
      if (!state.user_shares_target(ctx, u)) continue;
      for (int v = 0; v < g.post_count(); ++v) {
        if (ctx.is_target(v) || g.label(v) != 0) continue;
        if (!state.has_effective_edge(u, v)) out.push_back({agent_id, u, v});
      }
    }
  }
  return out;
}

std::vector<AttackAction> all_legal_actions(const GameState& state, const CampaignContext& ctx) {
  std::vector<AttackAction> out;
  for (int i = 0; i < static_cast<int>(ctx.specs.size()); ++i) {
    auto a = legal_actions(state, ctx, i);
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

GameState apply_action(const GameState& state, const CampaignContext& ctx,
                       const AttackAction& action) {
  if (action.agent_id < 0 || action.agent_id >= static_cast<int>(ctx.specs.size()))
    throw IllegalAction("apply_action: bad agent id");
  const AgentSpec& spec = ctx.specs[action.agent_id];
  const EngagementGraph& g = state.base();
  if (action.user < 0 || action.user >= g.user_count() || action.post < 0 ||
      action.post >= g.post_count())
    throw IllegalAction("apply_action: index out of range");
  if (std::find(spec.controlled_users.begin(), spec.controlled_users.end(), action.user) ==
      spec.controlled_users.end())
    throw IllegalAction("apply_action: user " + std::to_string(action.user) +
                        " not controlled by agent " + std::to_string(action.agent_id));
  if (state.spend(action.user) >= spec.per_user_edge_budget)
    throw IllegalAction("apply_action: user " + std::to_string(action.user) + " exhausted budget");
  if (state.has_effective_edge(action.user, action.post))
    throw IllegalAction("apply_action: duplicate edge (" + std::to_string(action.user) + ", " +
                        std::to_string(action.post) + ")");
  if (ctx.mode == AttackMode::Direct) {
    if (!ctx.is_target(action.post))
      throw IllegalAction("apply_action: direct mode requires a target post");
  } else {
    if (ctx.is_target(action.post))
      throw IllegalAction("apply_action: indirect mode forbids target posts");
    if (g.label(action.post) != 0)
      throw IllegalAction("apply_action: indirect mode requires a real-labeled post");
    if (!state.user_shares_target(ctx, action.user))
      throw IllegalAction("apply_action: user " + std::to_string(action.user) +
                          " shares no target");
  }

  GameState next = state;
  next.added_.push_back({action.user, action.post, action.agent_id, state.step()});
  next.spend_[action.user] += 1;
  next.step_ += 1;
  return next;
}

EpisodeReward episode_reward(const GameState& state, const GnnModel& surrogate,
                             const std::vector<int>& targets) {
  EpisodeReward r;
  if (targets.empty()) return r;
  const EngagementGraph g = state.effective();
  const std::vector<int> pred = predict(surrogate, g, targets);
  r.per_target.reserve(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    const int reward = pred[i] != g.label(targets[i]) ? 1 : -1;
    r.per_target.push_back(reward);
    r.total += reward;
  }
  return r;
}

bool is_terminal(const GameState& state, const CampaignContext& ctx) {
  for (int i = 0; i < static_cast<int>(ctx.specs.size()); ++i)
    if (!legal_actions(state, ctx, i).empty()) return false;
  return true;
}

double success_rate(const GnnModel& model, const EngagementGraph& g,
                    const std::vector<int>& targets) {
  if (targets.empty()) throw EmptyTargets("success_rate: no targets");
  const std::vector<int> pred = predict(model, g, targets);
  int flipped = 0;
  for (size_t i = 0; i < targets.size(); ++i) flipped += pred[i] != g.label(targets[i]);
  return static_cast<double>(flipped) / static_cast<double>(targets.size());
}

double success_rate(const GnnModel& model, const GameState& state,
                    const std::vector<int>& targets) {
  return success_rate(model, state.effective(), targets);
}

std::optional<std::pair<AttackAction, int>> best_single_action_oracle(
    const GameState& state, const CampaignContext& ctx, const GnnModel& surrogate,
    int max_actions) {
  std::vector<AttackAction> actions = all_legal_actions(state, ctx);
  if (static_cast<int>(actions.size()) > max_actions)
    throw TooManyActions("best_single_action_oracle: " + std::to_string(actions.size()) +
                         " legal actions exceed the guard of " + std::to_string(max_actions));
  if (actions.empty()) return std::nullopt;
  std::sort(actions.begin(), actions.end(), [](const AttackAction& a, const AttackAction& b) {
    return std::tie(a.user, a.post, a.agent_id) < std::tie(b.user, b.post, b.agent_id);
  });
  std::optional<std::pair<AttackAction, int>> best;
  for (const AttackAction& a : actions) {
    const GameState next = apply_action(state, ctx, a);
    const int reward = episode_reward(next, surrogate, ctx.targets).total;
    if (!best || reward > best->second) best = {a, reward};
  }
  return best;
}

}  // namespace attacklab
