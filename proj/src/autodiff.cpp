#include "attacklab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace attacklab::ad {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

Matrix stable_softmax_rows(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    Eigen::RowVectorXd e = (a.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

}  // namespace

const Matrix& Value::mat() const { return tape->value(node); }

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

int Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(std::vector<Matrix>& grads, int node, const Matrix& delta) const {
  if (!nodes_[node].needs_grad) return;
  if (grads[node].size() == 0)
    grads[node] = delta;
  else
    grads[node] += delta;
}

Value Tape::constant(Matrix m) {
  Node n;
  n.value = std::move(m);
  return {this, push(std::move(n))};
}

Value Tape::leaf(const Parameter& param) {
  Node n;
  n.value = param.value;
  n.needs_grad = true;
  n.param = &param;
  return {this, push(std::move(n))};
}

void Tape::backward(Value loss) {
  if (loss.tape != this || loss.node < 0 || loss.node >= size())
    throw DetachedLoss("backward: loss was not recorded on this tape");
  if (nodes_[loss.node].value.rows() != 1 || nodes_[loss.node].value.cols() != 1)
    throw ShapeMismatch("backward: loss must be 1x1");

  std::vector<Matrix> grads(nodes_.size());
  grads[loss.node] = Matrix::Ones(1, 1);
  for (int i = loss.node; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || grads[i].size() == 0) continue;
    if (n.param) n.param->grad += grads[i];
    if (n.pull) n.pull(grads[i], grads);
  }
}

class OpBuilder {
 public:
  static bool needs_grad(const Tape& t, int node) { return t.nodes_[node].needs_grad; }
  static void accumulate(const Tape& t, std::vector<Matrix>& grads, int node,
                         const Matrix& delta) {
    t.accumulate(grads, node, delta);
  }
  static Value make(Tape* tape, Matrix value, bool needs,
                    std::function<void(const Matrix&, std::vector<Matrix>&)> pull) {
    Tape::Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    if (needs) n.pull = std::move(pull);
    return {tape, tape->push(std::move(n))};
  }
};

namespace {

bool wants(Value v) { return OpBuilder::needs_grad(*v.tape, v.node); }

Value make_node(Tape* tape, Matrix value, bool needs_grad,
                std::function<void(const Matrix&, std::vector<Matrix>&)> pull) {
  return OpBuilder::make(tape, std::move(value), needs_grad, std::move(pull));
}

void check_same_tape(Value a, Value b, const char* op) {
  if (a.tape != b.tape) throw DetachedLoss(std::string(op) + ": operands on different tapes");
}

}  // namespace

Value matmul(Value a, Value b) {
  check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()));
  Tape* t = a.tape;
  const int ia = a.node, ib = b.node;
  Matrix out = a.mat() * b.mat();
  return make_node(t, std::move(out), wants(a) || wants(b),
                   [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g * t->value(ib).transpose());
                     OpBuilder::accumulate(*t, grads, ib, t->value(ia).transpose() * g);
                   });
}

Value add(Value a, Value b) {
  check_same_tape(a, b, "add");
  check_same_shape(a.mat(), b.mat(), "add");
  Tape* t = a.tape;
  const int ia = a.node, ib = b.node;
  return make_node(t, a.mat() + b.mat(), wants(a) || wants(b),
                   [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g);
                     OpBuilder::accumulate(*t, grads, ib, g);
                   });
}

Value sub(Value a, Value b) {
  check_same_tape(a, b, "sub");
  check_same_shape(a.mat(), b.mat(), "sub");
  Tape* t = a.tape;
  const int ia = a.node, ib = b.node;
  return make_node(t, a.mat() - b.mat(), wants(a) || wants(b),
                   [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g);
                     OpBuilder::accumulate(*t, grads, ib, -g);
                   });
}

Value add_rowvec(Value a, Value row) {
  check_same_tape(a, row, "add_rowvec");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeMismatch("add_rowvec: expected 1x" + std::to_string(a.cols()));
  Tape* t = a.tape;
  const int ia = a.node, ir = row.node;
  Matrix out = a.mat().rowwise() + Eigen::RowVectorXd(row.mat().row(0));
  return make_node(t, std::move(out), wants(a) || wants(row),
                   [t, ia, ir](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g);
                     OpBuilder::accumulate(*t, grads, ir, g.colwise().sum());
                   });
}

Value scale(Value a, double c) {
  Tape* t = a.tape;
  const int ia = a.node;
  return make_node(t, a.mat() * c, wants(a),
                   [t, ia, c](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g * c);
                   });
}

Value hadamard(Value a, Value b) {
  check_same_tape(a, b, "hadamard");
  check_same_shape(a.mat(), b.mat(), "hadamard");
  Tape* t = a.tape;
  const int ia = a.node, ib = b.node;
  return make_node(t, a.mat().cwiseProduct(b.mat()), wants(a) || wants(b),
                   [t, ia, ib](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g.cwiseProduct(t->value(ib)));
                     OpBuilder::accumulate(*t, grads, ib, g.cwiseProduct(t->value(ia)));
                   });
}

Value transpose(Value a) {
  Tape* t = a.tape;
  const int ia = a.node;
  return make_node(t, a.mat().transpose(), wants(a),
                   [t, ia](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g.transpose());
                   });
}

Value elementwise(EltOp op, Value a) {
  Tape* t = a.tape;
  const int ia = a.node;
  const Matrix& x = a.mat();
  Matrix y(x.rows(), x.cols());
  Matrix dydx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    switch (op) {
      case EltOp::Relu:
        y(i) = v > 0.0 ? v : 0.0;
        dydx(i) = v > 0.0 ? 1.0 : 0.0;
        break;
      case EltOp::Sigmoid: {
        const double s = 1.0 / (1.0 + std::exp(-v));
        y(i) = s;
        dydx(i) = s * (1.0 - s);
        break;
      }
      case EltOp::Elu:
        if (v > 0.0) {
          y(i) = v;
          dydx(i) = 1.0;
        } else {
          y(i) = std::exp(v) - 1.0;
          dydx(i) = std::exp(v);
        }
        break;
      case EltOp::Exp:
        y(i) = std::exp(v);
        dydx(i) = y(i);
        break;
      case EltOp::Log:
        if (v <= 0.0) throw DomainError("log: non-positive entry " + std::to_string(v));
        y(i) = std::log(v);
        dydx(i) = 1.0 / v;
        break;
    }
  }
  return make_node(t, std::move(y), wants(a),
                   [t, ia, dydx = std::move(dydx)](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g.cwiseProduct(dydx));
                   });
}

Value relu(Value a) { return elementwise(EltOp::Relu, a); }
Value sigmoid(Value a) { return elementwise(EltOp::Sigmoid, a); }
Value elu(Value a) { return elementwise(EltOp::Elu, a); }

Value softmax_rows(Value a) {
  Tape* t = a.tape;
  const int ia = a.node;
  Matrix p = stable_softmax_rows(a.mat());
  return make_node(t, p, wants(a),
                   [t, ia, p](const Matrix& g, std::vector<Matrix>& grads) {
                     Matrix gx(p.rows(), p.cols());
                     for (Eigen::Index i = 0; i < p.rows(); ++i) {
                       const double dot = g.row(i).dot(p.row(i));
                       gx.row(i) = p.row(i).cwiseProduct(g.row(i) - Eigen::RowVectorXd::Constant(p.cols(), dot));
                     }
                     OpBuilder::accumulate(*t, grads, ia, gx);
                   });
}

Value row_gather(Value a, std::vector<int> rows) {
  Tape* t = a.tape;
  const int ia = a.node;
  const Matrix& x = a.mat();
  for (int r : rows)
    if (r < 0 || r >= x.rows()) throw InvalidIndex("row_gather: row " + std::to_string(r));
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  const Eigen::Index nrows = x.rows(), ncols = x.cols();
  return make_node(t, std::move(out), wants(a),
                   [t, ia, rows = std::move(rows), nrows, ncols](const Matrix& g,
                                                                 std::vector<Matrix>& grads) {
                     Matrix gx = Matrix::Zero(nrows, ncols);
                     for (size_t k = 0; k < rows.size(); ++k)
                       gx.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
                     OpBuilder::accumulate(*t, grads, ia, gx);
                   });
}

Value concat_cols(Value a, Value b) {
  check_same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows()) throw ShapeMismatch("concat_cols: row counts differ");
  Tape* t = a.tape;
  const int ia = a.node, ib = b.node;
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.mat();
  out.rightCols(b.cols()) = b.mat();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return make_node(t, std::move(out), wants(a) || wants(b),
                   [t, ia, ib, ca, cb](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, g.leftCols(ca));
                     OpBuilder::accumulate(*t, grads, ib, g.rightCols(cb));
                   });
}

Value reduce_sum(Value a) {
  Tape* t = a.tape;
  const int ia = a.node;
  const Eigen::Index r = a.rows(), c = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.mat().sum();
  return make_node(t, std::move(out), wants(a),
                   [t, ia, r, c](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, Matrix::Constant(r, c, g(0, 0)));
                   });
}

Value reduce_mean(Value a) {
  Tape* t = a.tape;
  const int ia = a.node;
  const Eigen::Index r = a.rows(), c = a.cols();
  const double n = static_cast<double>(r * c);
  Matrix out(1, 1);
  out(0, 0) = a.mat().mean();
  return make_node(t, std::move(out), wants(a),
                   [t, ia, r, c, n](const Matrix& g, std::vector<Matrix>& grads) {
                     OpBuilder::accumulate(*t, grads, ia, Matrix::Constant(r, c, g(0, 0) / n));
                   });
}

Value cross_entropy_logits(Value logits, std::vector<int> labels) {
  Tape* t = logits.tape;
  const int il = logits.node;
  const Matrix& z = logits.mat();
  if (static_cast<Eigen::Index>(labels.size()) != z.rows())
    throw ShapeMismatch("cross_entropy_logits: one label per row required");
  for (int y : labels)
    if (y < 0 || y >= z.cols()) throw InvalidIndex("cross_entropy_logits: label out of range");
  Matrix p = stable_softmax_rows(z);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) total -= std::log(p(i, labels[i]));
  const double m = static_cast<double>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = total / m;
  return make_node(t, std::move(out), wants(logits),
                   [t, il, p = std::move(p), labels = std::move(labels), m](
                       const Matrix& g, std::vector<Matrix>& grads) {
                     Matrix gz = p;
                     for (Eigen::Index i = 0; i < gz.rows(); ++i) gz(i, labels[i]) -= 1.0;
                     OpBuilder::accumulate(*t, grads, il, gz * (g(0, 0) / m));
                   });
}

namespace {

enum class NeighborMode { Sum, Mean, NormalizedSum };

Value neighbor_aggregate(Value h, AdjacencyPtr adj, NeighborMode mode) {
  Tape* t = h.tape;
  const int ih = h.node;
  const Matrix& x = h.mat();
  if (adj->size() != x.rows())
    throw ShapeMismatch("neighbor aggregate: adjacency size " + std::to_string(adj->size()) +
                        " vs " + std::to_string(x.rows()) + " rows");
  const int n = adj->size();
  Matrix out = Matrix::Zero(n, x.cols());
  for (int i = 0; i < n; ++i) {
    const auto& nb = adj->neighbors[i];
    for (int j : nb) {
      double w = 1.0;
      if (mode == NeighborMode::Mean)
        w = 1.0 / static_cast<double>(nb.size());
      else if (mode == NeighborMode::NormalizedSum)
        w = 1.0 / std::sqrt(static_cast<double>((adj->degree(i) + 1)) *
                            static_cast<double>(adj->degree(j) + 1));
      out.row(i) += w * x.row(j);
    }
  }
  return make_node(t, std::move(out), wants(h),
                   [t, ih, adj = std::move(adj), mode](const Matrix& g, std::vector<Matrix>& grads) {
                     Matrix gx = Matrix::Zero(g.rows(), g.cols());
                     for (int i = 0; i < adj->size(); ++i) {
                       const auto& nb = adj->neighbors[i];
                       for (int j : nb) {
                         double w = 1.0;
                         if (mode == NeighborMode::Mean)
                           w = 1.0 / static_cast<double>(nb.size());
                         else if (mode == NeighborMode::NormalizedSum)
                           w = 1.0 / std::sqrt(static_cast<double>(adj->degree(i) + 1) *
                                               static_cast<double>(adj->degree(j) + 1));
                         gx.row(j) += w * g.row(i);
                       }
                     }
                     OpBuilder::accumulate(*t, grads, ih, gx);
                   });
}

}  // namespace

Value neighbor_sum(Value h, AdjacencyPtr adj) {
  return neighbor_aggregate(h, std::move(adj), NeighborMode::Sum);
}
Value neighbor_mean(Value h, AdjacencyPtr adj) {
  return neighbor_aggregate(h, std::move(adj), NeighborMode::Mean);
}
Value neighbor_normalized_sum(Value h, AdjacencyPtr adj) {
  return neighbor_aggregate(h, std::move(adj), NeighborMode::NormalizedSum);
}

std::vector<std::vector<double>> attention_coefficients(const Matrix& src_scores,
                                                        const Matrix& dst_scores,
                                                        const Adjacency& adj,
                                                        double leaky_slope) {
  std::vector<std::vector<double>> coeffs(adj.size());
  for (int i = 0; i < adj.size(); ++i) {
    const auto& nb = adj.neighbors[i];
    if (nb.empty()) continue;
    std::vector<double> e(nb.size());
    double emax = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < nb.size(); ++k) {
      const double raw = src_scores(nb[k], 0) + dst_scores(i, 0);
      e[k] = raw > 0.0 ? raw : leaky_slope * raw;
      emax = std::max(emax, e[k]);
    }
    double z = 0.0;
    for (double& v : e) {
      v = std::exp(v - emax);
      z += v;
    }
    coeffs[i].resize(nb.size());
    for (size_t k = 0; k < nb.size(); ++k) coeffs[i][k] = e[k] / z;
  }
  return coeffs;
}

Value attention_weighted_sum(Value z, Value src_scores, Value dst_scores, AdjacencyPtr adj,
                             double leaky_slope) {
  check_same_tape(z, src_scores, "attention_weighted_sum");
  check_same_tape(z, dst_scores, "attention_weighted_sum");
  Tape* t = z.tape;
  const Matrix& x = z.mat();
  if (adj->size() != x.rows() || src_scores.rows() != x.rows() || dst_scores.rows() != x.rows() ||
      src_scores.cols() != 1 || dst_scores.cols() != 1)
    throw ShapeMismatch("attention_weighted_sum: inconsistent shapes");

  auto alpha = attention_coefficients(src_scores.mat(), dst_scores.mat(), *adj, leaky_slope);
  const int n = adj->size();
  Matrix out = Matrix::Zero(n, x.cols());
  for (int i = 0; i < n; ++i) {
    const auto& nb = adj->neighbors[i];
    for (size_t k = 0; k < nb.size(); ++k) out.row(i) += alpha[i][k] * x.row(nb[k]);
  }

  const int iz = z.node, is = src_scores.node, id = dst_scores.node;
  const bool ng = wants(z) || wants(src_scores) || wants(dst_scores);
  return make_node(
      t, std::move(out), ng,
      [t, iz, is, id, adj = std::move(adj), alpha = std::move(alpha), leaky_slope](
          const Matrix& g, std::vector<Matrix>& grads) {
        const Matrix& zv = t->value(iz);
        const Matrix& sv = t->value(is);
        const Matrix& dv = t->value(id);
        Matrix gz = Matrix::Zero(zv.rows(), zv.cols());
        Matrix gs = Matrix::Zero(sv.rows(), 1);
        Matrix gd = Matrix::Zero(dv.rows(), 1);
        for (int i = 0; i < adj->size(); ++i) {
          const auto& nb = adj->neighbors[i];
          if (nb.empty()) continue;
          const auto& a = alpha[i];
          // dL/dalpha_k = g_i . z_k ; softmax backward gives dL/de, then the
          // leaky-relu slope routes into the raw score sums.
          std::vector<double> dalpha(nb.size());
          double inner = 0.0;
          for (size_t k = 0; k < nb.size(); ++k) {
            dalpha[k] = g.row(i).dot(zv.row(nb[k]));
            inner += a[k] * dalpha[k];
            gz.row(nb[k]) += a[k] * g.row(i);
          }
          for (size_t k = 0; k < nb.size(); ++k) {
            const double de = a[k] * (dalpha[k] - inner);
            const double raw = sv(nb[k], 0) + dv(i, 0);
            const double draw = de * (raw > 0.0 ? 1.0 : leaky_slope);
            gs(nb[k], 0) += draw;
            gd(i, 0) += draw;
          }
        }
        OpBuilder::accumulate(*t, grads, iz, gz);
        OpBuilder::accumulate(*t, grads, is, gs);
        OpBuilder::accumulate(*t, grads, id, gd);
      });
}

void sgd_step(const std::vector<Parameter*>& params, double lr) {
  if (lr < 0.0) throw InvalidParams("sgd_step: lr must be >= 0");
  for (Parameter* p : params) {
    p->value -= lr * p->grad;
    p->zero_grad();
  }
}

Sgd::Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (lr < 0.0 || momentum < 0.0 || momentum >= 1.0)
    throw InvalidParams("Sgd: lr must be >= 0 and momentum in [0, 1)");
}

void Sgd::step(const std::vector<Parameter*>& params) {
  if (momentum_ == 0.0) {
    sgd_step(params, lr_);
    return;
  }
  for (Parameter* p : params) {
    Matrix* v = nullptr;
    for (auto& slot : velocity_)
      if (slot.first == p) v = &slot.second;
    if (!v) {
      velocity_.emplace_back(p, Matrix::Zero(p->value.rows(), p->value.cols()));
      v = &velocity_.back().second;
    }
    *v = momentum_ * *v + p->grad;
    p->value -= lr_ * *v;
    p->zero_grad();
  }
}

}  // namespace attacklab::ad
