#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "attacklab/gnn.hpp"

namespace attacklab {

/// Checkpoint format, exact round-trip:
///   #gnn-model v1 <arch> <layers> <hidden> <combine>
///   [aggregator <mean|sum>]        # only when not the arch default
///   [heads <n>]                    # only for GAT with more than one head
///   param <name> <rows> <cols>
///   <rows lines of cols floats, 17 significant digits>
void save_model(const GnnModel& model, const std::string& path);
GnnModel load_model(const std::string& path);
void write_model(const GnnModel& model, std::ostream& out);
GnnModel read_model(std::istream& in);

// Shared param-block helpers (also used by the Q-network checkpoints).
void write_param_block(std::ostream& out, const ad::Parameter& p);
ad::Parameter read_param_block(std::istream& in, int& line_no);

}  // namespace attacklab
