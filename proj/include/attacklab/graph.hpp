#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_set>
#include <vector>

#include "attacklab/autodiff.hpp"
#include "attacklab/errors.hpp"
#include "attacklab/random.hpp"

namespace attacklab {

enum class NodeKind { User, Post };

struct NodeRef {
  NodeKind kind;
  int index;
  bool operator==(const NodeRef&) const = default;
};

inline NodeRef user_ref(int i) { return {NodeKind::User, i}; }
inline NodeRef post_ref(int i) { return {NodeKind::Post, i}; }

enum class Split { Train, Val, Test };

/// Bipartite user-post engagement graph. Immutable after construction;
/// mutations go through add_edge which returns a new graph.
class EngagementGraph {
 public:
  EngagementGraph() = default;
  /// Validates bipartite indices, rejects duplicate edges, builds adjacency.
  EngagementGraph(Matrix user_features, Matrix post_features, std::vector<int> labels,
                  std::vector<Split> splits, std::vector<std::pair<int, int>> edges);

  int user_count() const { return static_cast<int>(user_features.rows()); }
  int post_count() const { return static_cast<int>(post_features.rows()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int feature_dim() const { return static_cast<int>(user_features.cols()); }

  /// Edges in insertion order.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  bool has_edge(int u, int v) const { return edge_set_.count(edge_key(u, v)) > 0; }
  /// Posts shared by user u.
  const std::vector<int>& user_neighbors(int u) const;
  /// Users sharing post v.
  const std::vector<int>& post_neighbors(int v) const;

  int label(int v) const { return labels_[v]; }
  Split split(int v) const { return splits_[v]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<Split>& splits() const { return splits_; }
  std::vector<int> posts_in_split(Split s) const;

  /// Unified node index space: users first, then posts.
  int node_count() const { return user_count() + post_count(); }
  int user_node(int u) const { return u; }
  int post_node(int v) const { return user_count() + v; }

  /// Neighbor lists over the unified index space, shared with the numerics
  /// primitives. Built lazily once.
  ad::AdjacencyPtr adjacency() const;
  /// Features stacked over the unified index space (users then posts).
  Matrix stacked_features() const;

  bool operator==(const EngagementGraph& other) const;

  Matrix user_features;
  Matrix post_features;

 private:
  void check_user(int u) const;
  void check_post(int v) const;
  static std::int64_t edge_key(int u, int v) {
    return (static_cast<std::int64_t>(u) << 32) | static_cast<std::uint32_t>(v);
  }

  std::vector<int> labels_;
  std::vector<Split> splits_;
  std::vector<std::pair<int, int>> edges_;
  std::unordered_set<std::int64_t> edge_set_;
  std::vector<std::vector<int>> user_adj_;
  std::vector<std::vector<int>> post_adj_;
  mutable ad::AdjacencyPtr adjacency_;

  friend EngagementGraph add_edge(const EngagementGraph&, int, int);
};

/// Returns a copy of g with the edge (u, v) added; g itself is untouched.
EngagementGraph add_edge(const EngagementGraph& g, int u, int v);

int degree(const EngagementGraph& g, NodeRef n);

struct Subgraph {
  EngagementGraph graph;
  std::vector<int> user_map;  // subgraph user index -> full-graph user index
  std::vector<int> post_map;  // subgraph post index -> full-graph post index
};

/// Induced subgraph on all nodes within BFS distance <= k of any seed, with
/// index mappings back to the full graph. Features, labels and splits are
/// copied through.
Subgraph k_hop_subgraph(const EngagementGraph& g, const std::vector<NodeRef>& seeds, int k);

enum class AgentType { Bot, Cyborg, CrowdWorker };

const char* agent_type_name(AgentType t);

/// Degree interval plus an optional purity requirement on the fraction of
/// real-news neighbors.
struct AgentPoolCriteria {
  AgentType agent_type;
  int min_degree = 0;
  int max_degree = std::numeric_limits<int>::max();  // inclusive
  std::optional<double> min_real_fraction;

  /// Bot: degree == 1. Cyborg: degree > 10. CrowdWorker: degree > 20 with
  /// 100% real-news neighbors.
  static AgentPoolCriteria for_type(AgentType t);

  bool matches(const EngagementGraph& g, int user) const;
};

/// All users matching the criteria, ascending.
std::vector<int> pool_candidates(const EngagementGraph& g, const AgentPoolCriteria& criteria,
                                 const std::vector<int>& exclude = {});

/// Uniform sample without replacement from the qualifying users; deterministic
/// per seed; sorted ascending. Throws InsufficientCandidates if fewer
/// qualifying users than pool_size.
std::vector<int> select_agent_pool(const EngagementGraph& g, const AgentPoolCriteria& criteria,
                                   int pool_size, std::uint64_t rng_seed,
                                   const std::vector<int>& exclude = {});

/// Fraction of u's shared posts that are labeled fake. Throws IsolatedUser on
/// degree-0 users.
double user_fake_share_ratio(const EngagementGraph& g, int u);

}  // namespace attacklab
