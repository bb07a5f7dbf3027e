#include "attacklab/baselines.hpp"

#include <algorithm>

namespace attacklab {

const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::RdEdge:
      return "rd-edge";
    case BaselineKind::RdNode:
      return "rd-node";
    case BaselineKind::RlA1:
      return "rl-a1";
    case BaselineKind::RlA2:
      return "rl-a2";
    case BaselineKind::RlA3:
      return "rl-a3";
  }
  return "?";
}

namespace {

/// Random placement core shared by rd_edge and rd_node: every controlled user
/// draws endpoints uniformly from its current legal set until its budget is
/// met or the set runs dry.
GameState random_placement(std::shared_ptr<const EngagementGraph> g, const CampaignContext& ctx,
                           Rng& rng) {
  GameState state = GameState::clean(std::move(g));
  for (int agent = 0; agent < static_cast<int>(ctx.specs.size()); ++agent) {
    const AgentSpec& spec = ctx.specs[agent];
    for (int u : spec.controlled_users) {
      for (int e = 0; e < spec.per_user_edge_budget; ++e) {
        std::vector<AttackAction> mine;
        for (const AttackAction& a : legal_actions(state, ctx, agent))
          if (a.user == u) mine.push_back(a);
        if (mine.empty()) break;
        state = apply_action(state, ctx, mine[uniform_index(rng, static_cast<int>(mine.size()))]);
      }
    }
  }
  return state;
}

AttackReport report_from_state(const GameState& state, const GnnModel& surrogate,
                               const std::vector<int>& targets) {
  const EpisodeReward er = episode_reward(state, surrogate, targets);
  AttackReport report;
  report.success_rate = (static_cast<double>(er.total) + static_cast<double>(targets.size())) /
                        (2.0 * static_cast<double>(targets.size()));
  report.flipped.reserve(targets.size());
  for (int r : er.per_target) report.flipped.push_back(r > 0 ? 1 : 0);
  report.edges = state.added_edges();
  report.episode_rewards = {er.total};
  return report;
}

}  // namespace

AttackReport rd_edge(std::shared_ptr<const EngagementGraph> g, const std::vector<AgentSpec>& specs,
                     const std::vector<int>& targets, AttackMode mode, const GnnModel& surrogate,
                     std::uint64_t seed) {
  if (targets.empty()) throw EmptyTargets("rd_edge: no targets");
  CampaignContext ctx(specs, targets, mode);
  Rng rng(seed);
  const GameState state = random_placement(std::move(g), ctx, rng);
  return report_from_state(state, surrogate, targets);
}

RdNodeReport rd_node(std::shared_ptr<const EngagementGraph> g, const std::vector<int>& targets,
                     AttackMode mode, const GnnModel& surrogate, std::uint64_t seed,
                     int users_per_type, int feature_samples) {
  if (targets.empty()) throw EmptyTargets("rd_node: no targets");
  Rng rng(seed);

  const AgentType types[] = {AgentType::Bot, AgentType::Cyborg, AgentType::CrowdWorker};
  std::vector<InjectedUser> injected;
  for (AgentType t : types) {
    const auto candidates = pool_candidates(*g, AgentPoolCriteria::for_type(t));
    if (static_cast<int>(candidates.size()) < feature_samples)
      throw InsufficientCandidates("rd_node: " + std::to_string(candidates.size()) + " " +
                                   agent_type_name(t) + " candidates, need " +
                                   std::to_string(feature_samples));
    for (int i = 0; i < users_per_type; ++i) {
      const auto sampled = sample_without_replacement(candidates, feature_samples, rng);
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(g->feature_dim());
      for (int u : sampled) mean += g->user_features.row(u);
      mean /= static_cast<double>(feature_samples);
      injected.push_back({t, std::move(mean)});
    }
  }

  // Augmented graph: injected users appended after the original ones.
  Matrix uf(g->user_count() + static_cast<int>(injected.size()), g->feature_dim());
  uf.topRows(g->user_count()) = g->user_features;
  for (size_t i = 0; i < injected.size(); ++i)
    uf.row(g->user_count() + static_cast<Eigen::Index>(i)) = injected[i].features;
  auto augmented = std::make_shared<EngagementGraph>(
      std::move(uf), g->post_features, g->labels(), g->splits(), g->edges());

  std::vector<AgentSpec> specs;
  for (int t = 0; t < 3; ++t) {
    std::vector<int> users;
    for (int i = 0; i < users_per_type; ++i)
      users.push_back(g->user_count() + t * users_per_type + i);
    specs.push_back(AgentSpec::make(types[t], std::move(users)));
  }

  CampaignContext ctx(specs, targets, mode);
  const GameState state = random_placement(augmented, ctx, rng);

  RdNodeReport out;
  out.report = report_from_state(state, surrogate, targets);
  out.injected = std::move(injected);
  out.augmented = augmented;
  return out;
}

SingleAgentResult single_agent_rl(std::shared_ptr<const EngagementGraph> g, const AgentSpec& spec,
                                  const std::vector<int>& targets, const GnnModel& surrogate,
                                  AttackMode mode, const MarlConfig& cfg) {
  std::vector<AgentSpec> specs = {spec};
  MarlResult trained = train_marl(g, specs, targets, surrogate, mode, cfg);
  SingleAgentResult out;
  out.report = attack(std::move(g), specs, targets, surrogate, mode, trained.qnets);
  out.history = std::move(trained.history);
  return out;
}

}  // namespace attacklab
