#pragma once

#include <iosfwd>
#include <string>

#include "attacklab/graph.hpp"

namespace attacklab {

/// Line-oriented text format, exact round-trip (17 significant digits):
///   #engagement-graph v1
///   counts <users> <posts> <edges> <feature_dim>
///   U <index> <f_0> ... <f_{d-1}>
///   P <index> <label 0|1> <split T|V|S> <f_0> ... <f_{d-1}>
///   E <user_index> <post_index>
EngagementGraph load_graph(const std::string& path);
EngagementGraph read_graph(std::istream& in);
void save_graph(const EngagementGraph& g, const std::string& path);
void write_graph(const EngagementGraph& g, std::ostream& out);

}  // namespace attacklab
