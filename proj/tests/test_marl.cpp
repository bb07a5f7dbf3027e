#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "attacklab/marl.hpp"
#include "attacklab/graph_generator.hpp"
#include "oracles.hpp"
#include "tiny_instance.hpp"

#include <filesystem>
#include <map>

using namespace attacklab;

namespace {

struct Campaign {
  std::shared_ptr<const EngagementGraph> graph;
  GnnModel surrogate;
  std::vector<AgentSpec> specs;
  std::vector<int> targets;
};

Campaign small_campaign(std::uint64_t seed, AttackMode mode = AttackMode::Direct) {
  GeneratorParams p;
  p.user_count = 40;
  p.post_count = 16;
  p.edge_count = 110;
  auto g = std::make_shared<const EngagementGraph>(generate_synthetic(p, seed));
  TrainConfig tc;
  tc.epochs = 60;
  tc.lr = 0.02;
  tc.momentum = 0.9;
  tc.seed = seed + 5;
  Campaign c{g, train_new(GnnConfig::defaults(GnnArch::Gcn), *g, tc).model, {}, {}};
  for (int v = 0; v < g->post_count(); ++v)
    if (g->label(v) == 1 && degree(*g, post_ref(v)) < 10) c.targets.push_back(v);
  std::vector<int> bots, cyborgs;
  for (int u = 0; u < g->user_count(); ++u) {
    const int d = degree(*g, user_ref(u));
    if (d == 1 && bots.size() < 3)
      bots.push_back(u);
    else if (d >= 3 && cyborgs.size() < 3)
      cyborgs.push_back(u);
  }
  c.specs.push_back(AgentSpec::make(AgentType::Bot, bots));
  AgentSpec cy = AgentSpec::make(AgentType::Cyborg, cyborgs);
  cy.per_user_edge_budget = 2;
  c.specs.push_back(cy);
  (void)mode;
  return c;
}

}  // namespace

TEST_CASE("q_value: zero embeddings, identity heads, recompute oracle") {
  Rng rng(3);
  MarlConfig cfg;
  cfg.qnet_hidden_dim = 4;
  cfg.qnet_head_dim = 4;
  auto qnets = make_qnetworks(1, 3, cfg, rng);
  QNetwork& q = qnets[0];

  Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(q.encoder->output_dim);
  CHECK(q_value(q, zero, zero) == 0.0);

  // identity heads: Q = ||h||^2 for nonnegative h
  q.head_user.value = Matrix::Identity(4, 4);
  q.head_post.value = Matrix::Identity(4, 4);
  Eigen::RowVectorXd h(4);
  h << 0.5, 1.0, 0.0, 2.0;
  CHECK(q_value(q, h, h) == doctest::Approx(h.squaredNorm()));

  // random case against a hand-rolled recompute
  Rng r2(9);
  q.head_user.value = gaussian_matrix(4, 4, r2);
  q.head_post.value = gaussian_matrix(4, 4, r2);
  Eigen::RowVectorXd hu = gaussian_matrix(1, 4, r2).row(0);
  Eigen::RowVectorXd hv = gaussian_matrix(1, 4, r2).row(0);
  Eigen::RowVectorXd a = hu * q.head_user.value;
  Eigen::RowVectorXd b = hv * q.head_post.value;
  double want = 0.0;
  for (int i = 0; i < 4; ++i) want += std::max(0.0, a(i)) * std::max(0.0, b(i));
  CHECK(q_value(q, hu, hv) == doctest::Approx(want).epsilon(1e-12));
  CHECK(q_value(q, hu, hv) >= 0.0);

  Eigen::RowVectorXd bad(3);
  bad.setZero();
  CHECK_THROWS_AS(q_value(q, bad, hv), ShapeMismatch);
}

TEST_CASE("embed_state: seeds, locality, and full-graph agreement") {
  // two components: A = {u0, u1, p0, p1}, B = {u2, u3, p2, p3}
  Rng rng(21);
  Matrix uf = gaussian_matrix(4, 3, rng);
  Matrix pf = gaussian_matrix(4, 3, rng);
  std::vector<int> labels = {1, 0, 0, 0};
  std::vector<Split> splits(4, Split::Test);
  auto g = std::make_shared<const EngagementGraph>(
      uf, pf, labels, splits, std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {1, 1}, {2, 2}, {3, 3}});

  AgentSpec spec = AgentSpec::make(AgentType::Cyborg, {0});
  CampaignContext ctx({spec}, {0}, AttackMode::Indirect);
  MarlConfig cfg;
  Rng qrng(5);
  auto qnets = make_qnetworks(1, 3, cfg, qrng);
  GameState s = GameState::clean(g);
  StateEmbedding emb = embed_state(qnets[0], s, ctx);

  // component A is fully covered; component B is absent
  CHECK(emb.user_row.count(0));
  CHECK(emb.user_row.count(1));
  CHECK(emb.post_row.count(0));
  CHECK(emb.post_row.count(1));
  CHECK(!emb.user_row.count(2));
  CHECK(!emb.post_row.count(3));

  // the component equals its own 2-hop ball, so subgraph embeddings match a
  // full-graph encoder run
  ad::Tape tape;
  Matrix full = encode_nodes(tape, *qnets[0].encoder, *g).mat();
  CHECK((emb.nodes.row(emb.user_row[0]) - full.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((emb.nodes.row(emb.post_row[1]) - full.row(4 + 1)).cwiseAbs().maxCoeff() < 1e-12);

  // a controlled user far from every target still seeds its own ball
  AgentSpec far_spec = AgentSpec::make(AgentType::Cyborg, {2});
  CampaignContext far_ctx({far_spec}, {0}, AttackMode::Indirect);
  StateEmbedding far_emb = embed_state(qnets[0], s, far_ctx);
  CHECK(far_emb.user_row.count(2));
  CHECK(far_emb.post_row.count(2));

  // adding an edge inside component B leaves component A's embeddings alone
  CampaignContext b_ctx({far_spec}, {3}, AttackMode::Direct);
  GameState s2 = apply_action(s, b_ctx, {0, 2, 3});
  StateEmbedding emb2 = embed_state(qnets[0], s2, ctx);
  CHECK((emb2.nodes.row(emb2.user_row[0]) - emb.nodes.row(emb.user_row[0])).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((emb2.nodes.row(emb2.post_row[0]) - emb.nodes.row(emb.post_row[0])).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("greedy_action agrees with an exhaustive scan and breaks ties lexicographically") {
  tiny::Instance inst = tiny::make_instance(3);
  MarlConfig cfg;
  Rng rng(8);
  auto qnets = make_qnetworks(1, inst.graph->feature_dim(), cfg, rng);
  GameState s = GameState::clean(inst.graph);

  auto got = greedy_action(qnets[0], s, inst.ctx, 0);
  REQUIRE(got.has_value());

  // exhaustive scan over legal actions with embedded endpoints
  StateEmbedding emb = embed_state(qnets[0], s, inst.ctx);
  std::optional<AttackAction> want;
  double best_q = -1.0;
  auto acts = legal_actions(s, inst.ctx, 0);
  std::sort(acts.begin(), acts.end(), [](const AttackAction& a, const AttackAction& b) {
    return std::tie(a.user, a.post) < std::tie(b.user, b.post);
  });
  for (const auto& a : acts) {
    if (!emb.user_row.count(a.user) || !emb.post_row.count(a.post)) continue;
    const double q = q_value(qnets[0], emb.nodes.row(emb.user_row[a.user]),
                             emb.nodes.row(emb.post_row[a.post]));
    if (q > best_q) {
      best_q = q;
      want = a;
    }
  }
  REQUIRE(want.has_value());
  CHECK(*got == *want);

  // argmax invariance: scaling all head outputs leaves the choice unchanged
  QNetwork& q = qnets[0];
  q.head_user.value *= 3.0;
  auto scaled = greedy_action(q, s, inst.ctx, 0);
  REQUIRE(scaled.has_value());
  CHECK(*scaled == *got);
}

TEST_CASE("epsilon_greedy: 0 equals greedy, 1 is uniform, none when stuck") {
  tiny::Instance inst = tiny::make_instance(5);
  MarlConfig cfg;
  Rng rng(6);
  auto qnets = make_qnetworks(1, inst.graph->feature_dim(), cfg, rng);
  GameState s = GameState::clean(inst.graph);

  Rng r0(1);
  auto greedy = greedy_action(qnets[0], s, inst.ctx, 0);
  auto eps0 = epsilon_greedy_action(qnets[0], s, inst.ctx, 0, 0.0, r0);
  REQUIRE(greedy.has_value());
  REQUIRE(eps0.has_value());
  CHECK(*greedy == *eps0);

  // epsilon = 1: chi-square uniformity over the (embedded) legal set
  StateEmbedding emb = embed_state(qnets[0], s, inst.ctx);
  std::map<std::pair<int, int>, int> counts;
  int k = 0;
  for (const auto& a : legal_actions(s, inst.ctx, 0))
    if (emb.user_row.count(a.user) && emb.post_row.count(a.post)) {
      counts[{a.user, a.post}] = 0;
      ++k;
    }
  REQUIRE(k >= 2);
  const int n = 10000;
  Rng r1(12345);
  for (int i = 0; i < n; ++i) {
    auto a = epsilon_greedy_action(qnets[0], s, inst.ctx, 0, 1.0, r1);
    REQUIRE(a.has_value());
    counts[{a->user, a->post}] += 1;
  }
  const double expect = static_cast<double>(n) / k;
  const double sigma = std::sqrt(expect * (1.0 - 1.0 / k));
  for (auto& [key, c] : counts) CHECK(std::abs(c - expect) <= 3.0 * sigma);

  // exhausted budget: none
  auto first = epsilon_greedy_action(qnets[0], s, inst.ctx, 0, 0.0, r1);
  GameState s2 = apply_action(s, inst.ctx, *first);
  CHECK(!epsilon_greedy_action(qnets[0], s2, inst.ctx, 0, 0.5, r1).has_value());
  CHECK_THROWS_AS(epsilon_greedy_action(qnets[0], s, inst.ctx, 0, 1.5, r1), InvalidParams);
}

TEST_CASE("default_proportion allocates round size three with a floor of one") {
  AgentSpec bot = AgentSpec::make(AgentType::Bot, {0, 1, 2, 3});          // weight 4
  AgentSpec cy = AgentSpec::make(AgentType::Cyborg, {4, 5});              // weight 6
  AgentSpec cw = AgentSpec::make(AgentType::CrowdWorker, {6});            // weight 5
  auto prop = default_proportion({bot, cy, cw});
  CHECK(prop.size() == 3);
  CHECK(prop[0] >= 1);
  CHECK(prop[1] >= 1);
  CHECK(prop[2] >= 1);
  CHECK(prop[0] + prop[1] + prop[2] == 3);

  AgentSpec empty = AgentSpec::make(AgentType::Bot, {});
  auto prop2 = default_proportion({empty, cy});
  CHECK(prop2[0] == 0);
  CHECK(prop2[1] == 3);
}

TEST_CASE("controller_round: proportions, legality, terminal no-op") {
  Campaign c = small_campaign(61);
  REQUIRE(!c.targets.empty());
  CampaignContext ctx(c.specs, c.targets, AttackMode::Direct);
  MarlConfig cfg;
  Rng rng(2);
  auto qnets = make_qnetworks(static_cast<int>(c.specs.size()), c.graph->feature_dim(), cfg, rng);

  GameState s = GameState::clean(c.graph);
  Rng rrng(3);
  // proportion (1, 0): only the bot agent acts
  RoundResult r1 = controller_round(s, ctx, qnets, {1, 0}, 0.4, rrng);
  for (const auto& rec : r1.applied) CHECK(rec.agent_id == 0);
  CHECK(r1.applied.size() <= 1);

  // full round: applied count bounded by the proportion sum, all legal when applied
  RoundResult r2 = controller_round(s, ctx, qnets, {2, 2}, 0.5, rrng);
  CHECK(r2.applied.size() <= 4);
  GameState replayc = s;
  for (const auto& rec : r2.applied) {
    // legality at application time: apply_action would throw otherwise
    replayc = apply_action(replayc, ctx, rec.action);
  }
  CHECK(replayc.added_edges().size() == r2.state.added_edges().size());

  // a terminal state passes through unchanged
  GameState t = s;
  while (!is_terminal(t, ctx)) {
    auto acts = all_legal_actions(t, ctx);
    t = apply_action(t, ctx, acts.front());
  }
  RoundResult r3 = controller_round(t, ctx, qnets, {2, 2}, 0.5, rrng);
  CHECK(r3.applied.empty());
  CHECK(r3.state.added_edges().size() == t.added_edges().size());
}

TEST_CASE("q_update: terminal fixed point and myopic gamma") {
  tiny::Instance inst = tiny::make_instance(6);
  MarlConfig cfg;
  cfg.qnet_hidden_dim = 4;
  cfg.qnet_head_dim = 4;
  Rng rng(4);
  auto qnets = make_qnetworks(1, inst.graph->feature_dim(), cfg, rng);

  GameState s = GameState::clean(inst.graph);
  auto action = legal_actions(s, inst.ctx, 0).front();
  GameState s2 = apply_action(s, inst.ctx, action);

  // fixed point: force heads to zero so Q == 0 and target == 0
  Transition tr;
  tr.state_log = {};
  tr.action = action;
  tr.reward = 0.0;
  tr.next_log = s2.added_edges();
  tr.terminal = true;
  QNetwork& q = qnets[0];
  q.head_user.value.setZero();
  q.head_post.value.setZero();
  std::vector<Matrix> before;
  for (auto* p : q.parameters()) before.push_back(p->value);
  const double loss = q_update(q, {tr}, inst.graph, inst.ctx, 0, 0.9, 0.05);
  CHECK(loss == 0.0);
  auto params = q.parameters();
  for (size_t i = 0; i < params.size(); ++i) CHECK(params[i]->value == before[i]);

  // gamma = 0: the target is exactly the stored reward
  Rng rng2(7);
  auto qnets2 = make_qnetworks(1, inst.graph->feature_dim(), cfg, rng2);
  Transition tr2 = tr;
  tr2.terminal = false;
  tr2.reward = 1.0;
  // with gamma 0, loss should equal (Q - 1)^2 regardless of s'
  StateEmbedding emb = embed_state(qnets2[0], s, inst.ctx);
  const double qv = q_value(qnets2[0], emb.nodes.row(emb.user_row.at(action.user)),
                            emb.nodes.row(emb.post_row.at(action.post)));
  const double loss2 = q_loss_and_grads(qnets2[0], {tr2}, inst.graph, inst.ctx, 0, 0.0);
  CHECK(loss2 == doctest::Approx((qv - 1.0) * (qv - 1.0)).epsilon(1e-9));
}

TEST_CASE("q_update gradients match finite differences") {
  tiny::Instance inst = tiny::make_instance(7);
  MarlConfig cfg;
  cfg.qnet_hidden_dim = 4;
  cfg.qnet_head_dim = 3;
  Rng rng(11);
  auto qnets = make_qnetworks(1, inst.graph->feature_dim(), cfg, rng);
  QNetwork& q = qnets[0];

  GameState s = GameState::clean(inst.graph);
  auto acts = legal_actions(s, inst.ctx, 0);
  REQUIRE(acts.size() >= 2);
  std::vector<Transition> batch;
  {
    Transition tr;
    tr.action = acts[0];
    tr.reward = 2.0;
    tr.next_log = apply_action(s, inst.ctx, acts[0]).added_edges();
    tr.terminal = true;
    batch.push_back(tr);
    Transition tr2;
    tr2.action = acts[1];
    tr2.reward = 0.0;
    tr2.next_log = apply_action(s, inst.ctx, acts[1]).added_edges();
    tr2.terminal = false;
    batch.push_back(tr2);
  }

  const double gamma = 0.9;
  auto params = q.parameters();

  // Freeze the bootstrap targets at the current parameters (the analytic
  // gradient is the semi-gradient of the regression loss, so the numeric
  // check must hold the targets fixed while differencing).
  std::vector<double> frozen_targets;
  for (const Transition& tr : batch) {
    if (tr.terminal) {
      frozen_targets.push_back(tr.reward);
      continue;
    }
    GameState next = GameState::replay(inst.graph, inst.ctx, tr.next_log);
    StateEmbedding emb = embed_state(q, next, inst.ctx);
    double best = 0.0;
    for (const auto& a : legal_actions(next, inst.ctx, 0)) {
      if (!emb.user_row.count(a.user) || !emb.post_row.count(a.post)) continue;
      best = std::max(best, q_value(q, emb.nodes.row(emb.user_row.at(a.user)),
                                    emb.nodes.row(emb.post_row.at(a.post))));
    }
    frozen_targets.push_back(tr.reward + gamma * best);
  }
  auto frozen_loss = [&]() {
    double total = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
      GameState s_i = GameState::replay(inst.graph, inst.ctx, batch[i].state_log);
      StateEmbedding emb = embed_state(q, s_i, inst.ctx);
      const double qv = q_value(q, emb.nodes.row(emb.user_row.at(batch[i].action.user)),
                                emb.nodes.row(emb.post_row.at(batch[i].action.post)));
      total += (qv - frozen_targets[i]) * (qv - frozen_targets[i]);
    }
    return total / static_cast<double>(batch.size());
  };

  ad::zero_grads(params);
  const double analytic_loss = q_loss_and_grads(q, batch, inst.graph, inst.ctx, 0, gamma);
  CHECK(analytic_loss == doctest::Approx(frozen_loss()).epsilon(1e-9));
  CHECK(oracles::max_fd_rel_error(params, frozen_loss) < 1e-4);
}

TEST_CASE("train_marl: bookkeeping, invariants, determinism") {
  Campaign c = small_campaign(63);
  REQUIRE(!c.targets.empty());
  MarlConfig cfg;
  cfg.episodes = 6;
  cfg.batch_size = 4;
  cfg.epsilon_decay = 0.8;
  cfg.seed = 17;
  cfg.qnet_hidden_dim = 8;
  cfg.qnet_head_dim = 8;

  MarlResult r1 = train_marl(c.graph, c.specs, c.targets, c.surrogate, AttackMode::Direct, cfg);
  CHECK(r1.history.size() == 6);
  // running maximum of success rate is non-decreasing by construction
  double run_max = 0.0;
  for (const auto& ep : r1.history) {
    run_max = std::max(run_max, ep.success_rate);
    CHECK(ep.success_rate <= run_max);
    CHECK(ep.success_rate >= 0.0);
    CHECK(ep.success_rate <= 1.0);
  }

  MarlResult r2 = train_marl(c.graph, c.specs, c.targets, c.surrogate, AttackMode::Direct, cfg);
  REQUIRE(r1.history.size() == r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i)
    CHECK(r1.history[i].total_reward == r2.history[i].total_reward);
  for (size_t a = 0; a < r1.qnets.size(); ++a) {
    CHECK(r1.qnets[a].head_user.value == r2.qnets[a].head_user.value);
    CHECK(r1.qnets[a].head_post.value == r2.qnets[a].head_post.value);
  }
}

TEST_CASE("attack: zero budgets, budget bound, deterministic reports") {
  Campaign c = small_campaign(65);
  REQUIRE(!c.targets.empty());
  MarlConfig cfg;
  cfg.episodes = 4;
  cfg.batch_size = 4;
  cfg.seed = 23;

  // zero budgets: success rate equals the clean-graph misclassification rate
  std::vector<AgentSpec> zero_specs = c.specs;
  for (auto& s : zero_specs) s.per_user_edge_budget = 0;
  MarlResult z = train_marl(c.graph, zero_specs, c.targets, c.surrogate, AttackMode::Direct, cfg);
  AttackReport zr = attack(c.graph, zero_specs, c.targets, c.surrogate, AttackMode::Direct, z.qnets);
  CHECK(zr.edges.empty());
  CHECK(zr.success_rate ==
        doctest::Approx(success_rate(c.surrogate, *c.graph, c.targets)));

  MarlResult t = train_marl(c.graph, c.specs, c.targets, c.surrogate, AttackMode::Direct, cfg);
  AttackReport a1 = attack(c.graph, c.specs, c.targets, c.surrogate, AttackMode::Direct, t.qnets);
  AttackReport a2 = attack(c.graph, c.specs, c.targets, c.surrogate, AttackMode::Direct, t.qnets);
  CHECK(a1.success_rate == a2.success_rate);
  REQUIRE(a1.edges.size() == a2.edges.size());
  for (size_t i = 0; i < a1.edges.size(); ++i) {
    CHECK(a1.edges[i].user == a2.edges[i].user);
    CHECK(a1.edges[i].post == a2.edges[i].post);
  }
  long long cap = 0;
  for (const auto& s : c.specs)
    cap += static_cast<long long>(s.controlled_users.size()) * s.per_user_edge_budget;
  CHECK(static_cast<long long>(a1.edges.size()) <= cap);

  // every logged action replays legally onto the clean graph
  CampaignContext ctx(c.specs, c.targets, AttackMode::Direct);
  CHECK_NOTHROW(GameState::replay(c.graph, ctx, a1.edges));
}

TEST_CASE("qnet checkpoints round-trip") {
  Campaign c = small_campaign(67);
  MarlConfig cfg;
  cfg.episodes = 2;
  cfg.batch_size = 4;
  cfg.seed = 29;
  MarlResult t = train_marl(c.graph, c.specs, c.targets, c.surrogate, AttackMode::Direct, cfg);
  const std::string path = std::filesystem::temp_directory_path() / "qnets_test.txt";
  save_qnetworks(t.qnets, path);
  auto loaded = load_qnetworks(path);
  REQUIRE(loaded.size() == t.qnets.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].head_user.value == t.qnets[i].head_user.value);
    CHECK(loaded[i].head_post.value == t.qnets[i].head_post.value);
  }
  CHECK(loaded[0].encoder->params.size() == t.qnets[0].encoder->params.size());
  for (size_t i = 0; i < loaded[0].encoder->params.size(); ++i)
    CHECK(loaded[0].encoder->params[i].value == t.qnets[0].encoder->params[i].value);
  // shared encoder stays shared
  CHECK(loaded[0].encoder == loaded[1].encoder);
  std::filesystem::remove(path);
}
