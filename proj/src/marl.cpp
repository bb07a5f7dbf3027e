#include "attacklab/marl.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "attacklab/gnn_io.hpp"

namespace attacklab {

using ad::Value;

void MarlConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0) throw InvalidParams("MarlConfig: gamma must be in [0, 1]");
  if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0 ||
      epsilon_decay <= 0.0 || epsilon_decay > 1.0)
    throw InvalidParams("MarlConfig: epsilon schedule out of range");
  if (episodes < 1 || replay_capacity < 1 || batch_size < 1)
    throw InvalidParams("MarlConfig: counts must be >= 1");
  if (lr <= 0.0) throw InvalidParams("MarlConfig: lr must be > 0");
  if (qnet_hidden_dim < 1 || qnet_head_dim < 1)
    throw InvalidParams("MarlConfig: qnet dims must be >= 1");
}

std::vector<ad::Parameter*> QNetwork::parameters() {
  std::vector<ad::Parameter*> out = encoder->parameters();
  out.push_back(&head_user);
  out.push_back(&head_post);
  return out;
}

std::vector<QNetwork> make_qnetworks(int n_agents, int feature_dim, const MarlConfig& cfg,
                                     Rng& rng) {
  cfg.validate();
  GnnConfig enc_cfg = GnnConfig::defaults(GnnArch::Sage);
  enc_cfg.num_layers = 2;
  enc_cfg.hidden_dim = cfg.qnet_hidden_dim;

  std::vector<QNetwork> qnets;
  qnets.reserve(n_agents);
  std::shared_ptr<GnnEncoder> shared;
  if (!cfg.per_agent_encoders)
    shared = std::make_shared<GnnEncoder>(make_gnn_encoder(enc_cfg, feature_dim, rng));
  for (int i = 0; i < n_agents; ++i) {
    QNetwork q;
    q.encoder = cfg.per_agent_encoders
                    ? std::make_shared<GnnEncoder>(make_gnn_encoder(enc_cfg, feature_dim, rng))
                    : shared;
    q.head_user = ad::Parameter(glorot_uniform(q.encoder->output_dim, cfg.qnet_head_dim, rng),
                                "agent" + std::to_string(i) + ".head_user");
    q.head_post = ad::Parameter(glorot_uniform(q.encoder->output_dim, cfg.qnet_head_dim, rng),
                                "agent" + std::to_string(i) + ".head_post");
    qnets.push_back(std::move(q));
  }
  return qnets;
}

namespace {

struct TapeEmbedding {
  Value nodes;
  std::unordered_map<int, int> user_row;
  std::unordered_map<int, int> post_row;
};

std::vector<NodeRef> embedding_seeds(const CampaignContext& ctx) {
  std::vector<NodeRef> seeds;
  for (int v : ctx.targets) seeds.push_back(post_ref(v));
  for (const AgentSpec& spec : ctx.specs)
    for (int u : spec.controlled_users) seeds.push_back(user_ref(u));
  return seeds;
}

/// Encoder forward on the 2-hop subgraph around targets and controlled users
/// of the perturbed graph.
TapeEmbedding embed_state_tape(ad::Tape& tape, const QNetwork& qnet, const GameState& state,
                               const CampaignContext& ctx) {
  const EngagementGraph effective = state.effective();
  Subgraph sub = k_hop_subgraph(effective, embedding_seeds(ctx), 2);
  TapeEmbedding out;
  out.nodes = encode_nodes(tape, *qnet.encoder, sub.graph);
  for (int i = 0; i < static_cast<int>(sub.user_map.size()); ++i)
    out.user_row[sub.user_map[i]] = i;
  const int sub_users = static_cast<int>(sub.user_map.size());
  for (int i = 0; i < static_cast<int>(sub.post_map.size()); ++i)
    out.post_row[sub.post_map[i]] = sub_users + i;
  return out;
}

std::vector<AttackAction> embedded_actions(const StateEmbedding& emb,
                                           std::vector<AttackAction> actions) {
  std::erase_if(actions, [&](const AttackAction& a) {
    return !emb.user_row.count(a.user) || !emb.post_row.count(a.post);
  });
  std::sort(actions.begin(), actions.end(), [](const AttackAction& a, const AttackAction& b) {
    return std::tie(a.user, a.post) < std::tie(b.user, b.post);
  });
  return actions;
}

}  // namespace

StateEmbedding embed_state(const QNetwork& qnet, const GameState& state,
                           const CampaignContext& ctx) {
  ad::Tape tape;
  TapeEmbedding t = embed_state_tape(tape, qnet, state, ctx);
  StateEmbedding out;
  out.nodes = t.nodes.mat();
  out.user_row = std::move(t.user_row);
  out.post_row = std::move(t.post_row);
  return out;
}

double q_value(const QNetwork& qnet, const Eigen::RowVectorXd& h_u,
               const Eigen::RowVectorXd& h_v) {
  if (h_u.cols() != qnet.head_user.value.rows() || h_v.cols() != qnet.head_post.value.rows())
    throw ShapeMismatch("q_value: embedding dims do not match the heads");
  const Eigen::RowVectorXd a = (h_u * qnet.head_user.value).cwiseMax(0.0);
  const Eigen::RowVectorXd b = (h_v * qnet.head_post.value).cwiseMax(0.0);
  return a.dot(b);
}

namespace {

/// Best embedded action and its Q-value; embeddings supplied by the caller.
std::optional<std::pair<AttackAction, double>> best_embedded_action(
    const QNetwork& qnet, const StateEmbedding& emb, const GameState& state,
    const CampaignContext& ctx, int agent_id) {
  const auto actions = embedded_actions(emb, legal_actions(state, ctx, agent_id));
  if (actions.empty()) return std::nullopt;
  std::optional<std::pair<AttackAction, double>> best;
  std::unordered_map<int, Eigen::RowVectorXd> user_act;
  std::unordered_map<int, Eigen::RowVectorXd> post_act;
  for (const AttackAction& a : actions) {
    auto uit = user_act.find(a.user);
    if (uit == user_act.end()) {
      Eigen::RowVectorXd h =
          (emb.nodes.row(emb.user_row.at(a.user)) * qnet.head_user.value).cwiseMax(0.0);
      uit = user_act.emplace(a.user, std::move(h)).first;
    }
    auto pit = post_act.find(a.post);
    if (pit == post_act.end()) {
      Eigen::RowVectorXd h =
          (emb.nodes.row(emb.post_row.at(a.post)) * qnet.head_post.value).cwiseMax(0.0);
      pit = post_act.emplace(a.post, std::move(h)).first;
    }
    const double q = uit->second.dot(pit->second);
    if (!best || q > best->second) best = {a, q};
  }
  return best;
}

}  // namespace

std::optional<AttackAction> greedy_action(const QNetwork& qnet, const GameState& state,
                                          const CampaignContext& ctx, int agent_id) {
  const StateEmbedding emb = embed_state(qnet, state, ctx);
  auto best = best_embedded_action(qnet, emb, state, ctx, agent_id);
  if (!best) return std::nullopt;
  return best->first;
}

std::optional<AttackAction> epsilon_greedy_action(const QNetwork& qnet, const GameState& state,
                                                  const CampaignContext& ctx, int agent_id,
                                                  double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw InvalidParams("epsilon must be in [0, 1]");
  if (epsilon > 0.0 && bernoulli(rng, epsilon)) {
    const StateEmbedding emb = embed_state(qnet, state, ctx);
    const auto actions = embedded_actions(emb, legal_actions(state, ctx, agent_id));
    if (actions.empty()) return std::nullopt;
    return actions[uniform_index(rng, static_cast<int>(actions.size()))];
  }
  return greedy_action(qnet, state, ctx, agent_id);
}

std::vector<int> default_proportion(const std::vector<AgentSpec>& specs) {
  const int n = static_cast<int>(specs.size());
  std::vector<double> weight(n, 0.0);
  double total = 0.0;
  int nonempty = 0;
  for (int i = 0; i < n; ++i) {
    weight[i] = static_cast<double>(specs[i].controlled_users.size()) *
                static_cast<double>(specs[i].per_user_edge_budget);
    total += weight[i];
    nonempty += weight[i] > 0.0;
  }
  std::vector<int> out(n, 0);
  if (nonempty == 0) return out;
  const int size = std::max(3, nonempty);
  for (int i = 0; i < n; ++i) out[i] = weight[i] > 0.0 ? 1 : 0;
  int extra = size - nonempty;
  std::vector<double> quota(n, 0.0);
  std::vector<int> given(n, 0);
  for (int i = 0; i < n; ++i) quota[i] = weight[i] / total * extra;
  for (int i = 0; i < n && extra > 0; ++i) {
    const int whole = static_cast<int>(quota[i]);
    const int take = std::min(whole, extra);
    out[i] += take;
    given[i] = take;
    extra -= take;
  }
  while (extra > 0) {
    int pick = -1;
    double best_frac = -1.0;
    for (int i = 0; i < n; ++i) {
      if (weight[i] <= 0.0) continue;
      const double frac = quota[i] - given[i];
      if (frac > best_frac) {
        best_frac = frac;
        pick = i;
      }
    }
    out[pick] += 1;
    given[pick] += 1;
    --extra;
  }
  return out;
}

RoundResult controller_round(const GameState& state, const CampaignContext& ctx,
                             std::vector<QNetwork>& qnets, const std::vector<int>& proportion,
                             double epsilon, Rng& rng) {
  if (proportion.size() != ctx.specs.size())
    throw InvalidParams("controller_round: one proportion entry per agent required");
  RoundResult result{state, {}};
  for (int agent = 0; agent < static_cast<int>(ctx.specs.size()); ++agent) {
    for (int k = 0; k < proportion[agent]; ++k) {
      auto action = epsilon_greedy_action(qnets[agent], result.state, ctx, agent, epsilon, rng);
      if (!action) break;
      RoundRecord rec;
      rec.agent_id = agent;
      rec.action = *action;
      rec.before = result.state.added_edges();
      result.state = apply_action(result.state, ctx, *action);
      rec.after = result.state.added_edges();
      result.applied.push_back(std::move(rec));
    }
  }
  return result;
}

double q_loss_and_grads(QNetwork& qnet, const std::vector<Transition>& batch,
                        std::shared_ptr<const EngagementGraph> base, const CampaignContext& ctx,
                        int agent_id, double gamma) {
  if (batch.empty()) throw InvalidParams("q_update: empty batch");

  auto digest_key = [](const std::vector<AddedEdge>& log) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(log.size());
    for (const AddedEdge& e : log) pairs.emplace_back(e.user, e.post);
    std::sort(pairs.begin(), pairs.end());
    std::string key;
    for (auto [u, v] : pairs) key += std::to_string(u) + "," + std::to_string(v) + ";";
    return key;
  };

  // Bootstrap targets, evaluated with the current parameters (no gradient).
  std::vector<double> targets(batch.size());
  std::unordered_map<std::string, std::pair<GameState, StateEmbedding>> next_cache;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = batch[i];
    if (tr.terminal) {
      targets[i] = tr.reward;
      continue;
    }
    const std::string key = digest_key(tr.next_log);
    auto it = next_cache.find(key);
    if (it == next_cache.end()) {
      GameState next = GameState::replay(base, ctx, tr.next_log);
      StateEmbedding emb = embed_state(qnet, next, ctx);
      it = next_cache.emplace(key, std::make_pair(std::move(next), std::move(emb))).first;
    }
    const auto best = best_embedded_action(qnet, it->second.second, it->second.first, ctx, agent_id);
    targets[i] = tr.reward + gamma * (best ? best->second : 0.0);
  }

  // Batch regression loss on one tape; per-state encoder forwards are shared
  // across transitions with the same digest.
  ad::Tape tape;
  std::unordered_map<std::string, TapeEmbedding> embeddings;
  Value w_user = tape.leaf(qnet.head_user);
  Value w_post = tape.leaf(qnet.head_post);
  Value loss_sum;
  bool first = true;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = batch[i];
    const std::string key = digest_key(tr.state_log);
    auto it = embeddings.find(key);
    if (it == embeddings.end()) {
      GameState s = GameState::replay(base, ctx, tr.state_log);
      it = embeddings.emplace(key, embed_state_tape(tape, qnet, s, ctx)).first;
    }
    const TapeEmbedding& emb = it->second;
    if (!emb.user_row.count(tr.action.user) || !emb.post_row.count(tr.action.post))
      throw Error("q_update: transition endpoints outside the embedded neighborhood");
    Value row_u = ad::row_gather(emb.nodes, {emb.user_row.at(tr.action.user)});
    Value row_v = ad::row_gather(emb.nodes, {emb.post_row.at(tr.action.post)});
    Value hu = ad::relu(ad::matmul(row_u, w_user));
    Value hv = ad::relu(ad::matmul(row_v, w_post));
    Value q = ad::matmul(hu, ad::transpose(hv));
    Value err = ad::sub(q, tape.constant(Matrix::Constant(1, 1, targets[i])));
    Value sq = ad::hadamard(err, err);
    loss_sum = first ? sq : ad::add(loss_sum, sq);
    first = false;
  }
  Value loss = ad::scale(loss_sum, 1.0 / static_cast<double>(batch.size()));
  const double loss_value = loss.mat()(0, 0);
  tape.backward(loss);
  return loss_value;
}

double q_update(QNetwork& qnet, const std::vector<Transition>& batch,
                std::shared_ptr<const EngagementGraph> base, const CampaignContext& ctx,
                int agent_id, double gamma, double lr) {
  const double loss = q_loss_and_grads(qnet, batch, std::move(base), ctx, agent_id, gamma);
  ad::sgd_step(qnet.parameters(), lr);
  return loss;
}

MarlResult train_marl(std::shared_ptr<const EngagementGraph> g,
                      const std::vector<AgentSpec>& specs, const std::vector<int>& targets,
                      const GnnModel& surrogate, AttackMode mode, const MarlConfig& cfg) {
  cfg.validate();
  if (targets.empty()) throw EmptyTargets("train_marl: no targets");
  CampaignContext ctx(specs, targets, mode);
  Rng rng(cfg.seed);
  const int n_agents = static_cast<int>(specs.size());
  std::vector<QNetwork> qnets = make_qnetworks(n_agents, g->feature_dim(), cfg, rng);
  const std::vector<int> proportion =
      cfg.proportion.empty() ? default_proportion(specs) : cfg.proportion;

  std::vector<std::deque<Transition>> replay(n_agents);
  double epsilon = cfg.epsilon_start;
  MarlResult result;
  result.history.reserve(cfg.episodes);

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    GameState state = GameState::clean(g);
    std::vector<std::vector<Transition>> pending(n_agents);
    int rounds = 0;
    while (!is_terminal(state, ctx)) {
      RoundResult rr = controller_round(state, ctx, qnets, proportion, epsilon, rng);
      if (rr.applied.empty()) break;  // restricted policies may stall before budgets run out
      ++rounds;
      for (RoundRecord& rec : rr.applied) {
        Transition tr;
        tr.state_log = std::move(rec.before);
        tr.action = rec.action;
        tr.next_log = std::move(rec.after);
        pending[rec.agent_id].push_back(std::move(tr));
      }
      state = std::move(rr.state);
    }

    // Terminal-only shared reward; intermediate transitions keep reward 0 and
    // gamma carries the credit backward through the bootstrap.
    const EpisodeReward er = episode_reward(state, surrogate, targets);
    for (int agent = 0; agent < n_agents; ++agent) {
      if (!pending[agent].empty()) {
        pending[agent].back().reward = static_cast<double>(er.total);
        pending[agent].back().terminal = true;
      }
      for (Transition& tr : pending[agent]) {
        replay[agent].push_back(std::move(tr));
        if (static_cast<int>(replay[agent].size()) > cfg.replay_capacity)
          replay[agent].pop_front();
      }
    }

    for (int r = 0; r < rounds; ++r)
      for (int agent = 0; agent < n_agents; ++agent) {
        if (static_cast<int>(replay[agent].size()) < cfg.batch_size) continue;
        std::vector<Transition> batch;
        batch.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b)
          batch.push_back(replay[agent][uniform_index(rng, static_cast<int>(replay[agent].size()))]);
        q_update(qnets[agent], batch, g, ctx, agent, cfg.gamma, cfg.lr);
      }

    EpisodeStats stats;
    stats.total_reward = er.total;
    stats.success_rate = (static_cast<double>(er.total) + static_cast<double>(targets.size())) /
                         (2.0 * static_cast<double>(targets.size()));
    result.history.push_back(stats);
    epsilon = std::max(cfg.epsilon_end, epsilon * cfg.epsilon_decay);
  }

  result.qnets = std::move(qnets);
  return result;
}

AttackReport attack(std::shared_ptr<const EngagementGraph> g, const std::vector<AgentSpec>& specs,
                    const std::vector<int>& targets, const GnnModel& surrogate, AttackMode mode,
                    std::vector<QNetwork>& qnets) {
  if (targets.empty()) throw EmptyTargets("attack: no targets");
  CampaignContext ctx(specs, targets, mode);
  const std::vector<int> proportion = default_proportion(specs);
  Rng rng(0);  // unused at epsilon 0; greedy rollouts are deterministic
  GameState state = GameState::clean(g);
  while (!is_terminal(state, ctx)) {
    RoundResult rr = controller_round(state, ctx, qnets, proportion, 0.0, rng);
    if (rr.applied.empty()) break;
    state = std::move(rr.state);
  }
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

void save_qnetworks(const std::vector<QNetwork>& qnets, const std::string& path) {
  if (qnets.empty()) throw InvalidParams("save_qnetworks: nothing to save");
  std::ofstream out(path);
  if (!out) throw Error("save_qnetworks: cannot open " + path);
  const GnnConfig& cfg = qnets[0].encoder->config;
  out << "#gnn-model v1 qnet " << arch_name(cfg.arch) << ' ' << cfg.num_layers << ' '
      << cfg.hidden_dim << ' ' << combine_name(cfg.combine) << '\n';
  const bool shared = std::all_of(qnets.begin(), qnets.end(),
                                  [&](const QNetwork& q) { return q.encoder == qnets[0].encoder; });
  out << "agents " << qnets.size() << ' ' << (shared ? 1 : 0) << '\n';
  if (shared) {
    for (const auto& p : qnets[0].encoder->params) write_param_block(out, p);
  } else {
    for (size_t i = 0; i < qnets.size(); ++i)
      for (const auto& p : qnets[i].encoder->params) {
        ad::Parameter named(p.value, "agent" + std::to_string(i) + "." + p.name);
        write_param_block(out, named);
      }
  }
  for (const auto& q : qnets) {
    write_param_block(out, q.head_user);
    write_param_block(out, q.head_post);
  }
  if (!out) throw Error("save_qnetworks: write failed for " + path);
}

std::vector<QNetwork> load_qnetworks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_qnetworks: cannot open " + path);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty qnet file");
  ++line_no;
  std::istringstream header(line);
  std::string magic, version, kind, arch, combine;
  GnnConfig cfg;
  if (!(header >> magic >> version >> kind >> arch >> cfg.num_layers >> cfg.hidden_dim >>
        combine) ||
      magic != "#gnn-model" || version != "v1" || kind != "qnet")
    throw ParseError(line_no, "expected '#gnn-model v1 qnet <arch> <layers> <hidden> <combine>'");
  cfg.arch = parse_arch(arch);
  cfg.combine = parse_combine(combine);
  cfg.aggregator = GnnConfig::defaults(cfg.arch).aggregator;

  if (!std::getline(in, line)) throw ParseError(line_no + 1, "missing agents line");
  ++line_no;
  std::istringstream agents_line(line);
  std::string tag;
  int n_agents = 0, shared = 1;
  if (!(agents_line >> tag >> n_agents >> shared) || tag != "agents" || n_agents < 1)
    throw ParseError(line_no, "bad agents line");

  std::vector<ad::Parameter> params;
  while (in.peek() != EOF) params.push_back(read_param_block(in, line_no));

  std::vector<QNetwork> qnets(n_agents);
  auto take = [&](const std::string& name) -> ad::Parameter {
    for (auto& p : params)
      if (p.name == name) return std::move(p);
    throw ParseError(line_no, "missing param '" + name + "'");
  };

  if (shared) {
    auto enc = std::make_shared<GnnEncoder>();
    enc->config = cfg;
    for (auto& p : params)
      if (p.name.rfind("layer", 0) == 0) enc->params.push_back(p);
    if (enc->params.empty()) throw ParseError(line_no, "no encoder params");
    enc->feature_dim = static_cast<int>(cfg.combine == Combine::Concat
                                            ? enc->param("layer0.weight").value.rows() / 2
                                            : enc->param("layer0.weight").value.rows());
    enc->output_dim = cfg.hidden_dim;
    for (auto& q : qnets) q.encoder = enc;
  } else {
    for (int i = 0; i < n_agents; ++i) {
      auto enc = std::make_shared<GnnEncoder>();
      enc->config = cfg;
      const std::string prefix = "agent" + std::to_string(i) + ".layer";
      for (auto& p : params)
        if (p.name.rfind(prefix, 0) == 0) {
          ad::Parameter renamed(p.value, p.name.substr(prefix.size() - 5));
          enc->params.push_back(std::move(renamed));
        }
      if (enc->params.empty()) throw ParseError(line_no, "no encoder params for agent " + std::to_string(i));
      enc->feature_dim = static_cast<int>(cfg.combine == Combine::Concat
                                              ? enc->param("layer0.weight").value.rows() / 2
                                              : enc->param("layer0.weight").value.rows());
      enc->output_dim = cfg.hidden_dim;
      qnets[i].encoder = enc;
    }
  }
  for (int i = 0; i < n_agents; ++i) {
    qnets[i].head_user = take("agent" + std::to_string(i) + ".head_user");
    qnets[i].head_post = take("agent" + std::to_string(i) + ".head_post");
  }
  return qnets;
}

}  // namespace attacklab
