#include "attacklab/gnn.hpp"

#include <algorithm>
#include <cmath>

namespace attacklab {

using ad::Value;

const char* arch_name(GnnArch a) {
  switch (a) {
    case GnnArch::Gcn:
      return "gcn";
    case GnnArch::Gat:
      return "gat";
    case GnnArch::Sage:
      return "sage";
  }
  return "?";
}

GnnArch parse_arch(const std::string& name) {
  if (name == "gcn") return GnnArch::Gcn;
  if (name == "gat") return GnnArch::Gat;
  if (name == "sage") return GnnArch::Sage;
  throw ConfigError("unknown architecture '" + name + "'");
}

const char* combine_name(Combine c) { return c == Combine::Concat ? "concat" : "sum"; }

Combine parse_combine(const std::string& name) {
  if (name == "concat") return Combine::Concat;
  if (name == "sum") return Combine::Sum;
  throw ConfigError("unknown combine '" + name + "'");
}

GnnConfig GnnConfig::defaults(GnnArch arch) {
  GnnConfig c;
  c.arch = arch;
  switch (arch) {
    case GnnArch::Gcn:
      c.combine = Combine::Sum;
      c.aggregator = Aggregator::Sum;
      break;
    case GnnArch::Gat:
      c.combine = Combine::Sum;
      c.aggregator = Aggregator::Attention;
      break;
    case GnnArch::Sage:
      c.combine = Combine::Concat;
      c.aggregator = Aggregator::Mean;
      break;
  }
  return c;
}

void GnnConfig::validate() const {
  if (num_layers < 1 || hidden_dim < 1) throw InvalidParams("GnnConfig: layers and hidden dim must be >= 1");
  if ((aggregator == Aggregator::Attention) != (arch == GnnArch::Gat))
    throw InvalidParams("GnnConfig: attention aggregator is used iff arch is GAT");
  if (arch == GnnArch::Gat) {
    if (attention_heads < 1) throw InvalidParams("GnnConfig: attention_heads must be >= 1");
    if (hidden_dim % attention_heads != 0)
      throw InvalidParams("GnnConfig: hidden_dim must be divisible by attention_heads");
  }
}

std::vector<ad::Parameter*> GnnEncoder::parameters() {
  std::vector<ad::Parameter*> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(&p);
  return out;
}

ad::Parameter& GnnEncoder::param(const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p;
  throw Error("GnnEncoder: no parameter named '" + name + "'");
}

const ad::Parameter& GnnEncoder::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw Error("GnnEncoder: no parameter named '" + name + "'");
}

std::vector<ad::Parameter*> GnnModel::parameters() {
  auto out = encoder.parameters();
  out.push_back(&head_weight);
  out.push_back(&head_bias);
  return out;
}

namespace {

/// Output dimension of layer l given its input dimension.
int layer_output_dim(const GnnConfig& cfg, int in_dim) {
  (void)in_dim;
  if (cfg.arch == GnnArch::Gat && cfg.combine == Combine::Concat) return 2 * cfg.hidden_dim;
  return cfg.hidden_dim;
}

}  // namespace

GnnEncoder make_gnn_encoder(const GnnConfig& config, int feature_dim, Rng& rng) {
  config.validate();
  if (feature_dim < 1) throw InvalidParams("make_gnn_encoder: feature_dim must be >= 1");
  GnnEncoder enc;
  enc.config = config;
  enc.feature_dim = feature_dim;
  int dim = feature_dim;
  for (int l = 0; l < config.num_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    if (config.arch == GnnArch::Gat) {
      const int dh = config.hidden_dim / config.attention_heads;
      for (int k = 0; k < config.attention_heads; ++k) {
        const std::string hp = prefix + "head" + std::to_string(k) + ".";
        enc.params.emplace_back(glorot_uniform(dim, dh, rng), hp + "weight");
        enc.params.emplace_back(glorot_uniform(dh, 1, rng), hp + "att_src");
        enc.params.emplace_back(glorot_uniform(dh, 1, rng), hp + "att_dst");
      }
    } else {
      const int in = config.combine == Combine::Concat ? 2 * dim : dim;
      enc.params.emplace_back(glorot_uniform(in, config.hidden_dim, rng), prefix + "weight");
    }
    dim = layer_output_dim(config, dim);
  }
  enc.output_dim = dim;
  return enc;
}

GnnModel make_gnn_model(const GnnConfig& config, int feature_dim, std::uint64_t seed) {
  Rng rng(seed);
  GnnModel model;
  model.encoder = make_gnn_encoder(config, feature_dim, rng);
  model.head_weight = ad::Parameter(glorot_uniform(model.encoder.output_dim, 2, rng), "head.weight");
  model.head_bias = ad::Parameter(Matrix::Zero(1, 2), "head.bias");
  return model;
}

Value gcn_aggregate(Value h, const EngagementGraph& g) {
  return ad::neighbor_normalized_sum(h, g.adjacency());
}

Value sage_aggregate(Value h, const EngagementGraph& g, Aggregator mode) {
  switch (mode) {
    case Aggregator::Mean:
      return ad::neighbor_mean(h, g.adjacency());
    case Aggregator::Sum:
      return ad::neighbor_sum(h, g.adjacency());
    case Aggregator::Attention:
      break;
  }
  throw InvalidParams("sage_aggregate: mode must be Mean or Sum");
}

Value gat_aggregate(Value z, const EngagementGraph& g, Value att_src, Value att_dst) {
  Value s_src = ad::matmul(z, att_src);
  Value s_dst = ad::matmul(z, att_dst);
  return ad::attention_weighted_sum(z, s_src, s_dst, g.adjacency());
}

Value encode_nodes(ad::Tape& tape, const GnnEncoder& enc, const EngagementGraph& g) {
  if (g.feature_dim() != enc.feature_dim)
    throw ShapeMismatch("encode_nodes: graph feature dim " + std::to_string(g.feature_dim()) +
                        " vs encoder " + std::to_string(enc.feature_dim));
  const GnnConfig& cfg = enc.config;
  Value h = tape.constant(g.stacked_features());
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    if (cfg.arch == GnnArch::Gat) {
      // Per head: transform, score, attend; heads concatenate.
      Value z_all, agg_all;
      for (int k = 0; k < cfg.attention_heads; ++k) {
        const std::string hp = prefix + "head" + std::to_string(k) + ".";
        Value w = tape.leaf(enc.param(hp + "weight"));
        Value as = tape.leaf(enc.param(hp + "att_src"));
        Value ad_ = tape.leaf(enc.param(hp + "att_dst"));
        Value z = ad::matmul(h, w);
        Value agg = gat_aggregate(z, g, as, ad_);
        z_all = k == 0 ? z : ad::concat_cols(z_all, z);
        agg_all = k == 0 ? agg : ad::concat_cols(agg_all, agg);
      }
      Value combined = cfg.combine == Combine::Sum ? ad::add(z_all, agg_all)
                                                   : ad::concat_cols(z_all, agg_all);
      h = ad::elu(combined);
    } else {
      Value agg = cfg.arch == GnnArch::Gcn ? gcn_aggregate(h, g)
                                           : sage_aggregate(h, g, cfg.aggregator);
      Value combined =
          cfg.combine == Combine::Sum ? ad::add(h, agg) : ad::concat_cols(h, agg);
      Value w = tape.leaf(enc.param(prefix + "weight"));
      h = ad::relu(ad::matmul(combined, w));
    }
  }
  return h;
}

Value post_logits(ad::Tape& tape, const GnnModel& model, const EngagementGraph& g) {
  Value emb = encode_nodes(tape, model.encoder, g);
  std::vector<int> rows(g.post_count());
  for (int v = 0; v < g.post_count(); ++v) rows[v] = g.post_node(v);
  Value posts = ad::row_gather(emb, std::move(rows));
  Value w = tape.leaf(model.head_weight);
  Value b = tape.leaf(model.head_bias);
  return ad::add_rowvec(ad::matmul(posts, w), b);
}

Matrix forward(const GnnModel& model, const EngagementGraph& g) {
  ad::Tape tape;
  return post_logits(tape, model, g).mat();
}

Matrix predict_proba(const GnnModel& model, const EngagementGraph& g) {
  ad::Tape tape;
  Value logits = post_logits(tape, model, g);
  return ad::softmax_rows(logits).mat();
}

Value masked_loss(ad::Tape& tape, Value logits, const EngagementGraph& g, Split mask) {
  if (logits.rows() != g.post_count())
    throw ShapeMismatch("masked_loss: one logit row per post required");
  std::vector<int> rows;
  std::vector<int> labels;
  for (int v = 0; v < g.post_count(); ++v)
    if (g.split(v) == mask) {
      rows.push_back(v);
      labels.push_back(g.label(v));
    }
  if (rows.empty()) throw EmptyMask("masked_loss: no posts in the requested split");
  Value masked = ad::row_gather(logits, std::move(rows));
  return ad::cross_entropy_logits(masked, std::move(labels));
}

double loss(const Matrix& logits, const EngagementGraph& g, Split mask) {
  ad::Tape tape;
  Value l = tape.constant(logits);
  return masked_loss(tape, l, g, mask).mat()(0, 0);
}

std::vector<int> predict(const GnnModel& model, const EngagementGraph& g,
                         const std::vector<int>& posts) {
  for (int v : posts)
    if (v < 0 || v >= g.post_count()) throw InvalidIndex("predict: post " + std::to_string(v));
  const Matrix logits = forward(model, g);
  std::vector<int> out;
  out.reserve(posts.size());
  for (int v : posts) out.push_back(logits(v, 1) > logits(v, 0) ? 1 : 0);
  return out;
}

std::vector<int> predict_all(const GnnModel& model, const EngagementGraph& g) {
  std::vector<int> posts(g.post_count());
  for (int v = 0; v < g.post_count(); ++v) posts[v] = v;
  return predict(model, g, posts);
}

Metrics metrics(const GnnModel& model, const EngagementGraph& g, Split mask) {
  std::vector<int> posts;
  for (int v = 0; v < g.post_count(); ++v)
    if (g.split(v) == mask) posts.push_back(v);
  if (posts.empty()) throw EmptyMask("metrics: no posts in the requested split");
  const std::vector<int> pred = predict(model, g, posts);
  int correct = 0, tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < posts.size(); ++i) {
    const int y = g.label(posts[i]);
    const int p = pred[i];
    correct += (p == y);
    if (p == 1 && y == 1) ++tp;
    if (p == 1 && y == 0) ++fp;
    if (p == 0 && y == 1) ++fn;
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(posts.size());
  const int denom = 2 * tp + fp + fn;
  m.f1 = denom == 0 ? 0.0 : 2.0 * tp / static_cast<double>(denom);
  return m;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidParams("TrainConfig: epochs must be >= 1");
  if (lr <= 0.0) throw InvalidParams("TrainConfig: lr must be > 0");
  if (early_stop_patience < 1) throw InvalidParams("TrainConfig: patience must be >= 1");
}

TrainResult train(GnnModel model, const EngagementGraph& g, const TrainConfig& cfg) {
  cfg.validate();
  if (g.posts_in_split(Split::Train).empty())
    throw EmptyMask("train: empty train split");
  const bool has_val = !g.posts_in_split(Split::Val).empty();
  const Split eval_split = has_val ? Split::Val : Split::Train;

  auto params = model.parameters();
  ad::Sgd opt(cfg.lr, cfg.momentum);

  std::vector<Matrix> best_values;
  best_values.reserve(params.size());
  for (auto* p : params) best_values.push_back(p->value);
  double best_acc = -1.0;
  double best_eval_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  std::vector<EpochStats> history;
  history.reserve(cfg.epochs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    Value logits = post_logits(tape, model, g);
    Value l = masked_loss(tape, logits, g, Split::Train);
    const double train_loss = l.mat()(0, 0);
    tape.backward(l);
    opt.step(params);

    const double acc = metrics(model, g, eval_split).accuracy;
    const double eval_loss = loss(forward(model, g), g, eval_split);
    history.push_back({train_loss, acc});
    // Accuracy drives the snapshot; validation loss breaks accuracy ties so a
    // saturated (tiny) validation split does not freeze an early model.
    if (acc > best_acc || (acc == best_acc && eval_loss < best_eval_loss)) {
      best_acc = acc;
      best_eval_loss = eval_loss;
      best_epoch = epoch;
      for (size_t i = 0; i < params.size(); ++i) best_values[i] = params[i]->value;
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  return {std::move(model), std::move(history), best_epoch};
}

TrainResult train_new(const GnnConfig& config, const EngagementGraph& g, const TrainConfig& cfg) {
  return train(make_gnn_model(config, g.feature_dim(), cfg.seed), g, cfg);
}

}  // namespace attacklab
