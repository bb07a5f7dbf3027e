#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attacklab/autodiff.hpp"
#include "attacklab/graph.hpp"

namespace attacklab {

enum class GnnArch { Gcn, Gat, Sage };
enum class Combine { Concat, Sum };
enum class Aggregator { Mean, Sum, Attention };

const char* arch_name(GnnArch a);
GnnArch parse_arch(const std::string& name);
const char* combine_name(Combine c);
Combine parse_combine(const std::string& name);

struct GnnConfig {
  GnnArch arch = GnnArch::Gcn;
  int num_layers = 2;
  int hidden_dim = 32;
  Combine combine = Combine::Sum;
  Aggregator aggregator = Aggregator::Sum;
  int attention_heads = 1;  // GAT only

  /// Conventional per-arch defaults: Concat combine for SAGE, Sum for
  /// GCN/GAT; Attention aggregator iff GAT.
  static GnnConfig defaults(GnnArch arch);
  void validate() const;
};

/// The message-passing stack: per-layer weights (plus attention parameters
/// for GAT). Embeds every node, users and posts alike.
struct GnnEncoder {
  GnnConfig config;
  int feature_dim = 0;
  int output_dim = 0;
  std::vector<ad::Parameter> params;

  std::vector<ad::Parameter*> parameters();
  ad::Parameter& param(const std::string& name);
  const ad::Parameter& param(const std::string& name) const;
};

/// Encoder plus the classification head mapping post embeddings to 2 logits.
struct GnnModel {
  GnnEncoder encoder;
  ad::Parameter head_weight;  // output_dim x 2
  ad::Parameter head_bias;    // 1 x 2

  std::vector<ad::Parameter*> parameters();
  const GnnConfig& config() const { return encoder.config; }
  int feature_dim() const { return encoder.feature_dim; }
};

GnnEncoder make_gnn_encoder(const GnnConfig& config, int feature_dim, Rng& rng);
GnnModel make_gnn_model(const GnnConfig& config, int feature_dim, std::uint64_t seed);

// Per-layer aggregation primitives over the unified node index space.
ad::Value gcn_aggregate(ad::Value h, const EngagementGraph& g);
ad::Value sage_aggregate(ad::Value h, const EngagementGraph& g, Aggregator mode);
/// z is the linearly transformed feature matrix; att_src/att_dst are column
/// parameter leaves. Returns the attention-weighted neighbor sum of z.
ad::Value gat_aggregate(ad::Value z, const EngagementGraph& g, ad::Value att_src,
                        ad::Value att_dst);

/// Final-layer embeddings of all nodes (users then posts), n x output_dim.
ad::Value encode_nodes(ad::Tape& tape, const GnnEncoder& enc, const EngagementGraph& g);
/// Post logits (post_count x 2) through the classification head.
ad::Value post_logits(ad::Tape& tape, const GnnModel& model, const EngagementGraph& g);
/// Convenience forward pass without gradient bookkeeping.
Matrix forward(const GnnModel& model, const EngagementGraph& g);
/// Softmax class probabilities per post (post_count x 2).
Matrix predict_proba(const GnnModel& model, const EngagementGraph& g);

/// Mean cross-entropy of the masked posts, on-tape (for training).
ad::Value masked_loss(ad::Tape& tape, ad::Value logits, const EngagementGraph& g, Split mask);
/// Plain evaluation of the same quantity.
double loss(const Matrix& logits, const EngagementGraph& g, Split mask);

/// Argmax labels; exact ties resolve to 0 (real).
std::vector<int> predict(const GnnModel& model, const EngagementGraph& g,
                         const std::vector<int>& posts);
std::vector<int> predict_all(const GnnModel& model, const EngagementGraph& g);

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // fake (1) as the positive class
};
Metrics metrics(const GnnModel& model, const EngagementGraph& g, Split mask);

struct TrainConfig {
  int epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
  int early_stop_patience = 20;
  double momentum = 0.0;

  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  GnnModel model;
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

/// Full-batch gradient descent on the train-split loss; returns the snapshot
/// with the best validation accuracy. Deterministic per (seed, config, graph).
TrainResult train(GnnModel model, const EngagementGraph& g, const TrainConfig& cfg);
/// Builds a model seeded by cfg.seed, then trains it.
TrainResult train_new(const GnnConfig& config, const EngagementGraph& g, const TrainConfig& cfg);

}  // namespace attacklab
