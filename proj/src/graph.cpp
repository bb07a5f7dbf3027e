#include "attacklab/graph.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace attacklab {

EngagementGraph::EngagementGraph(Matrix uf, Matrix pf, std::vector<int> labels,
                                 std::vector<Split> splits, std::vector<std::pair<int, int>> edges)
    : user_features(std::move(uf)),
      post_features(std::move(pf)),
      labels_(std::move(labels)),
      splits_(std::move(splits)) {
  if (user_features.cols() != post_features.cols())
    throw ShapeMismatch("EngagementGraph: user/post feature dims differ");
  if (static_cast<int>(labels_.size()) != post_count() ||
      static_cast<int>(splits_.size()) != post_count())
    throw InconsistentCounts("EngagementGraph: one label and split per post required");
  for (int y : labels_)
    if (y != 0 && y != 1) throw InvalidParams("EngagementGraph: labels must be 0 or 1");

  user_adj_.resize(user_count());
  post_adj_.resize(post_count());
  edges_.reserve(edges.size());
  for (auto [u, v] : edges) {
    check_user(u);
    check_post(v);
    if (!edge_set_.insert(edge_key(u, v)).second)
      throw DuplicateEdge("EngagementGraph: duplicate edge (" + std::to_string(u) + ", " +
                          std::to_string(v) + ")");
    edges_.emplace_back(u, v);
    user_adj_[u].push_back(v);
    post_adj_[v].push_back(u);
  }
}

void EngagementGraph::check_user(int u) const {
  if (u < 0 || u >= user_count()) throw InvalidIndex("user index " + std::to_string(u));
}

void EngagementGraph::check_post(int v) const {
  if (v < 0 || v >= post_count()) throw InvalidIndex("post index " + std::to_string(v));
}

const std::vector<int>& EngagementGraph::user_neighbors(int u) const {
  check_user(u);
  return user_adj_[u];
}

const std::vector<int>& EngagementGraph::post_neighbors(int v) const {
  check_post(v);
  return post_adj_[v];
}

std::vector<int> EngagementGraph::posts_in_split(Split s) const {
  std::vector<int> out;
  for (int v = 0; v < post_count(); ++v)
    if (splits_[v] == s) out.push_back(v);
  return out;
}

ad::AdjacencyPtr EngagementGraph::adjacency() const {
  if (!adjacency_) {
    auto adj = std::make_shared<ad::Adjacency>();
    adj->neighbors.resize(node_count());
    for (auto [u, v] : edges_) {
      adj->neighbors[user_node(u)].push_back(post_node(v));
      adj->neighbors[post_node(v)].push_back(user_node(u));
    }
    adjacency_ = std::move(adj);
  }
  return adjacency_;
}

Matrix EngagementGraph::stacked_features() const {
  Matrix x(node_count(), feature_dim());
  x.topRows(user_count()) = user_features;
  x.bottomRows(post_count()) = post_features;
  return x;
}

bool EngagementGraph::operator==(const EngagementGraph& other) const {
  if (user_count() != other.user_count() || post_count() != other.post_count() ||
      edge_count() != other.edge_count() || feature_dim() != other.feature_dim())
    return false;
  if (user_features != other.user_features || post_features != other.post_features) return false;
  if (labels_ != other.labels_ || splits_ != other.splits_) return false;
  auto sorted = [](std::vector<std::pair<int, int>> e) {
    std::sort(e.begin(), e.end());
    return e;
  };
  return sorted(edges_) == sorted(other.edges_);
}

EngagementGraph add_edge(const EngagementGraph& g, int u, int v) {
  g.check_user(u);
  g.check_post(v);
  if (g.has_edge(u, v))
    throw DuplicateEdge("add_edge: (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") already present");
  EngagementGraph out = g;
  out.edges_.emplace_back(u, v);
  out.edge_set_.insert(EngagementGraph::edge_key(u, v));
  out.user_adj_[u].push_back(v);
  out.post_adj_[v].push_back(u);
  out.adjacency_.reset();
  return out;
}

int degree(const EngagementGraph& g, NodeRef n) {
  if (n.kind == NodeKind::User) return static_cast<int>(g.user_neighbors(n.index).size());
  return static_cast<int>(g.post_neighbors(n.index).size());
}

Subgraph k_hop_subgraph(const EngagementGraph& g, const std::vector<NodeRef>& seeds, int k) {
  if (k < 0) throw InvalidParams("k_hop_subgraph: k must be >= 0");
  std::vector<int> user_dist(g.user_count(), -1);
  std::vector<int> post_dist(g.post_count(), -1);
  std::deque<NodeRef> frontier;
  for (NodeRef s : seeds) {
    auto& dist = s.kind == NodeKind::User ? user_dist : post_dist;
    if (s.index < 0 ||
        s.index >= (s.kind == NodeKind::User ? g.user_count() : g.post_count()))
      throw InvalidIndex("k_hop_subgraph: bad seed index " + std::to_string(s.index));
    if (dist[s.index] == -1) {
      dist[s.index] = 0;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    NodeRef cur = frontier.front();
    frontier.pop_front();
    const int d = cur.kind == NodeKind::User ? user_dist[cur.index] : post_dist[cur.index];
    if (d == k) continue;
    if (cur.kind == NodeKind::User) {
      for (int v : g.user_neighbors(cur.index))
        if (post_dist[v] == -1) {
          post_dist[v] = d + 1;
          frontier.push_back(post_ref(v));
        }
    } else {
      for (int u : g.post_neighbors(cur.index))
        if (user_dist[u] == -1) {
          user_dist[u] = d + 1;
          frontier.push_back(user_ref(u));
        }
    }
  }

  Subgraph out;
  std::vector<int> user_rev(g.user_count(), -1);
  std::vector<int> post_rev(g.post_count(), -1);
  for (int u = 0; u < g.user_count(); ++u)
    if (user_dist[u] >= 0) {
      user_rev[u] = static_cast<int>(out.user_map.size());
      out.user_map.push_back(u);
    }
  for (int v = 0; v < g.post_count(); ++v)
    if (post_dist[v] >= 0) {
      post_rev[v] = static_cast<int>(out.post_map.size());
      out.post_map.push_back(v);
    }

  Matrix uf(out.user_map.size(), g.feature_dim());
  for (size_t i = 0; i < out.user_map.size(); ++i) uf.row(i) = g.user_features.row(out.user_map[i]);
  Matrix pf(out.post_map.size(), g.feature_dim());
  std::vector<int> labels(out.post_map.size());
  std::vector<Split> splits(out.post_map.size());
  for (size_t i = 0; i < out.post_map.size(); ++i) {
    pf.row(i) = g.post_features.row(out.post_map[i]);
    labels[i] = g.label(out.post_map[i]);
    splits[i] = g.split(out.post_map[i]);
  }
  std::vector<std::pair<int, int>> edges;
  for (auto [u, v] : g.edges())
    if (user_rev[u] >= 0 && post_rev[v] >= 0) edges.emplace_back(user_rev[u], post_rev[v]);

  out.graph = EngagementGraph(std::move(uf), std::move(pf), std::move(labels), std::move(splits),
                              std::move(edges));
  return out;
}

const char* agent_type_name(AgentType t) {
  switch (t) {
    case AgentType::Bot:
      return "bot";
    case AgentType::Cyborg:
      return "cyborg";
    case AgentType::CrowdWorker:
      return "crowd_worker";
  }
  return "?";
}

AgentPoolCriteria AgentPoolCriteria::for_type(AgentType t) {
  AgentPoolCriteria c;
  c.agent_type = t;
  switch (t) {
    case AgentType::Bot:
      c.min_degree = 1;
      c.max_degree = 1;
      break;
    case AgentType::Cyborg:
      c.min_degree = 11;
      break;
    case AgentType::CrowdWorker:
      c.min_degree = 21;
      c.min_real_fraction = 1.0;
      break;
  }
  return c;
}

bool AgentPoolCriteria::matches(const EngagementGraph& g, int user) const {
  const int d = static_cast<int>(g.user_neighbors(user).size());
  if (d < min_degree || d > max_degree) return false;
  if (min_real_fraction) {
    if (d == 0) return false;
    const double real_fraction = 1.0 - user_fake_share_ratio(g, user);
    if (real_fraction < *min_real_fraction) return false;
  }
  return true;
}

std::vector<int> pool_candidates(const EngagementGraph& g, const AgentPoolCriteria& criteria,
                                 const std::vector<int>& exclude) {
  std::unordered_set<int> skip(exclude.begin(), exclude.end());
  std::vector<int> out;
  for (int u = 0; u < g.user_count(); ++u)
    if (!skip.count(u) && criteria.matches(g, u)) out.push_back(u);
  return out;
}

std::vector<int> select_agent_pool(const EngagementGraph& g, const AgentPoolCriteria& criteria,
                                   int pool_size, std::uint64_t rng_seed,
                                   const std::vector<int>& exclude) {
  if (pool_size < 1) throw InvalidParams("select_agent_pool: pool_size must be >= 1");
  std::vector<int> candidates = pool_candidates(g, criteria, exclude);
  if (static_cast<int>(candidates.size()) < pool_size)
    throw InsufficientCandidates("select_agent_pool: " + std::to_string(candidates.size()) +
                                 " candidates for " + std::string(agent_type_name(criteria.agent_type)) +
                                 " pool of " + std::to_string(pool_size));
  Rng rng(rng_seed);
  std::vector<int> pool = sample_without_replacement(std::move(candidates), pool_size, rng);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double user_fake_share_ratio(const EngagementGraph& g, int u) {
  const auto& posts = g.user_neighbors(u);
  if (posts.empty()) throw IsolatedUser("user " + std::to_string(u) + " has no shares");
  int fake = 0;
  for (int v : posts) fake += g.label(v);
  return static_cast<double>(fake) / static_cast<double>(posts.size());
}

}  // namespace attacklab
