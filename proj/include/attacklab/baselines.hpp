#pragma once

#include <cstdint>

#include "attacklab/marl.hpp"

namespace attacklab {

enum class BaselineKind { RdEdge, RdNode, RlA1, RlA2, RlA3 };

const char* baseline_name(BaselineKind k);

/// Each controlled user adds its type's edge count (bot 1, cyborg 3, crowd
/// worker 5) to uniformly sampled legal endpoints; users without enough legal
/// endpoints place as many as possible.
AttackReport rd_edge(std::shared_ptr<const EngagementGraph> g, const std::vector<AgentSpec>& specs,
                     const std::vector<int>& targets, AttackMode mode, const GnnModel& surrogate,
                     std::uint64_t seed);

/// A user injected by rd_node: its agent type and synthesized feature vector
/// (the mean of 20 sampled same-type candidates).
struct InjectedUser {
  AgentType type = AgentType::Bot;
  Eigen::RowVectorXd features;
};

struct RdNodeReport {
  AttackReport report;                 // edges refer to the augmented graph
  std::vector<InjectedUser> injected;  // appended after the original users
  std::shared_ptr<const EngagementGraph> augmented;
};

/// Injects 5 synthetic users per agent type, each with the mean features of
/// 20 sampled candidates of that type, then places edges per the rd_edge
/// scheme. Requires >= 20 candidates per type.
RdNodeReport rd_node(std::shared_ptr<const EngagementGraph> g, const std::vector<int>& targets,
                     AttackMode mode, const GnnModel& surrogate, std::uint64_t seed,
                     int users_per_type = 5, int feature_samples = 20);

/// MARL restricted to a single agent; trains and then runs the greedy attack.
struct SingleAgentResult {
  AttackReport report;
  std::vector<EpisodeStats> history;
};

SingleAgentResult single_agent_rl(std::shared_ptr<const EngagementGraph> g, const AgentSpec& spec,
                                  const std::vector<int>& targets, const GnnModel& surrogate,
                                  AttackMode mode, const MarlConfig& cfg);

}  // namespace attacklab
