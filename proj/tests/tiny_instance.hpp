// Small planted attack instances shared by the MARL tests and the acceptance
// suite: one boundary-ish fake target, one eligible controlled user with
// budget 1, and a handful of real posts of varying realness and degree, so
// the single legal actions have genuinely different payoffs.
#pragma once

#include <memory>

#include "attacklab/attack_env.hpp"
#include "attacklab/gnn.hpp"
#include "attacklab/graph_generator.hpp"

namespace tiny {

using namespace attacklab;

struct Instance {
  std::shared_ptr<const EngagementGraph> graph;
  GnnModel surrogate;
  CampaignContext ctx;
  AgentSpec spec;
};

inline Instance make_instance(std::uint64_t seed) {
  Rng rng(seed);
  const int dim = 6;
  const int users = 12, posts = 9;
  const double mu = 2.0 / std::sqrt(static_cast<double>(dim));

  // posts: 0 = target (fake, near the boundary), 1..2 fake, 3..8 real with
  // decreasing "realness"
  Matrix pf = gaussian_matrix(posts, dim, rng, 0.0, 0.6);
  std::vector<int> labels(posts, 0);
  labels[0] = labels[1] = labels[2] = 1;
  pf.row(0).array() += mu * (0.55 + 0.2 * uniform_real(rng));  // weakly fake
  pf.row(1).array() += 1.6 * mu;
  pf.row(2).array() += 1.5 * mu;
  for (int v = 3; v < posts; ++v)
    pf.row(v).array() -= mu * (0.2 + 0.3 * (v - 3));  // progressively more real

  // users: 0 is the controlled cyborg-ish account; 1..4 bad; 5..11 good
  Matrix uf = gaussian_matrix(users, dim, rng, 0.0, 0.5);
  const double mu_u = 3.0 / std::sqrt(static_cast<double>(dim));
  for (int u = 1; u <= 4; ++u) uf.row(u).array() += mu_u;

  std::vector<std::pair<int, int>> edges;
  edges.push_back({0, 0});  // eligibility: the controlled user shares the target
  edges.push_back({1, 0});
  edges.push_back({2, 0});
  // bad users also share the other fakes
  edges.push_back({1, 1});
  edges.push_back({2, 2});
  edges.push_back({3, 1});
  edges.push_back({4, 2});
  // the target's sharers touch every real post (their off-class shares), which
  // keeps the whole candidate set inside the 2-hop ball of the target
  for (int v = 3; v < posts; ++v) edges.push_back({1 + (v % 2), v});
  // good users add varying extra degree
  int gu = 5;
  for (int v = 3; v < posts; ++v) {
    const int fanin = v % 3;
    for (int j = 0; j < fanin; ++j) {
      edges.push_back({5 + (gu + j) % 7, v});
    }
    gu += 2;
  }

  std::vector<Split> splits(posts, Split::Train);
  splits[0] = Split::Test;
  splits[4] = Split::Val;
  splits[2] = Split::Val;

  auto graph = std::make_shared<const EngagementGraph>(std::move(uf), std::move(pf),
                                                       std::move(labels), std::move(splits),
                                                       std::move(edges));

  TrainConfig tc;
  tc.epochs = 120;
  tc.lr = 0.02;
  tc.momentum = 0.9;
  tc.seed = seed * 31 + 7;
  GnnModel surrogate = train_new(GnnConfig::defaults(GnnArch::Gcn), *graph, tc).model;

  Instance inst{graph, std::move(surrogate),
                CampaignContext({}, {}, AttackMode::Indirect),
                AgentSpec::make(AgentType::Cyborg, {0})};
  inst.spec.per_user_edge_budget = 1;
  inst.ctx = CampaignContext({inst.spec}, {0}, AttackMode::Indirect);
  return inst;
}

}  // namespace tiny
