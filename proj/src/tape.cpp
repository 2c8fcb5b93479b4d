#include "vfm/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace vfm::ad {

Tape::NodeId Tape::push(Mat value, bool requires_grad, std::function<void()> pull) {
  Node n;
  n.value = std::move(value);
  n.pull = std::move(pull);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::leaf(Mat value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

const Mat& Tape::grad(NodeId id) const {
  if (!ran_backward_) throw std::logic_error("Tape::grad: backward() has not run");
  return nodes_[id].adj;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const bool rg = needs(a) || needs(b);
  NodeId id = push(nodes_[a].value * nodes_[b].value, rg, nullptr);
  nodes_[id].pull = [this, a, b, id] {
    if (needs(a)) adj(a).noalias() += nodes_[id].adj * nodes_[b].value.transpose();
    if (needs(b)) adj(b).noalias() += nodes_[a].value.transpose() * nodes_[id].adj;
  };
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const bool rg = needs(a) || needs(b);
  NodeId id = push(nodes_[a].value + nodes_[b].value, rg, nullptr);
  nodes_[id].pull = [this, a, b, id] {
    if (needs(a)) adj(a) += nodes_[id].adj;
    if (needs(b)) adj(b) += nodes_[id].adj;
  };
  return id;
}

Tape::NodeId Tape::add_bias(NodeId a, NodeId bias) {
  if (nodes_[bias].value.cols() != 1)
    throw std::invalid_argument("add_bias: bias must be a column vector");
  const bool rg = needs(a) || needs(bias);
  NodeId id = push(nodes_[a].value.colwise() +
                       Eigen::VectorXd(nodes_[bias].value.col(0)),
                   rg, nullptr);
  nodes_[id].pull = [this, a, bias, id] {
    if (needs(a)) adj(a) += nodes_[id].adj;
    if (needs(bias)) adj(bias) += nodes_[id].adj.rowwise().sum();
  };
  return id;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const bool rg = needs(a) || needs(b);
  NodeId id = push(nodes_[a].value - nodes_[b].value, rg, nullptr);
  nodes_[id].pull = [this, a, b, id] {
    if (needs(a)) adj(a) += nodes_[id].adj;
    if (needs(b)) adj(b) -= nodes_[id].adj;
  };
  return id;
}

Tape::NodeId Tape::sub_const(NodeId a, const Mat& c) {
  NodeId id = push(nodes_[a].value - c, needs(a), nullptr);
  nodes_[id].pull = [this, a, id] {
    if (needs(a)) adj(a) += nodes_[id].adj;
  };
  return id;
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
  const bool rg = needs(a) || needs(b);
  NodeId id = push(nodes_[a].value.cwiseProduct(nodes_[b].value), rg, nullptr);
  nodes_[id].pull = [this, a, b, id] {
    if (needs(a)) adj(a) += nodes_[id].adj.cwiseProduct(nodes_[b].value);
    if (needs(b)) adj(b) += nodes_[id].adj.cwiseProduct(nodes_[a].value);
  };
  return id;
}

Tape::NodeId Tape::cmul(NodeId a, const Mat& c) {
  NodeId id = push(nodes_[a].value.cwiseProduct(c), needs(a), nullptr);
  Mat cc = c;
  nodes_[id].pull = [this, a, id, cc] {
    if (needs(a)) adj(a) += nodes_[id].adj.cwiseProduct(cc);
  };
  return id;
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  NodeId id = push(nodes_[a].value * s, needs(a), nullptr);
  nodes_[id].pull = [this, a, id, s] {
    if (needs(a)) adj(a) += nodes_[id].adj * s;
  };
  return id;
}

Tape::NodeId Tape::tanh(NodeId a) {
  NodeId id = push(nodes_[a].value.array().tanh().matrix(), needs(a), nullptr);
  nodes_[id].pull = [this, a, id] {
    if (needs(a))
      adj(a).array() +=
          nodes_[id].adj.array() * (1.0 - nodes_[id].value.array().square());
  };
  return id;
}

Tape::NodeId Tape::one_minus_square(NodeId a) {
  NodeId id = push((1.0 - nodes_[a].value.array().square()).matrix(), needs(a),
                   nullptr);
  nodes_[id].pull = [this, a, id] {
    if (needs(a))
      adj(a).array() -= 2.0 * nodes_[id].adj.array() * nodes_[a].value.array();
  };
  return id;
}

Tape::NodeId Tape::row(NodeId a, int r) {
  NodeId id = push(nodes_[a].value.row(r), needs(a), nullptr);
  nodes_[id].pull = [this, a, id, r] {
    if (needs(a)) adj(a).row(r) += nodes_[id].adj;
  };
  return id;
}

Tape::NodeId Tape::gather_cols(NodeId a, std::vector<int> idx) {
  Mat v(nodes_[a].value.rows(), idx.size());
  for (size_t k = 0; k < idx.size(); ++k) v.col(k) = nodes_[a].value.col(idx[k]);
  NodeId id = push(std::move(v), needs(a), nullptr);
  nodes_[id].pull = [this, a, id, idx = std::move(idx)] {
    if (!needs(a)) return;
    for (size_t k = 0; k < idx.size(); ++k)
      adj(a).col(idx[k]) += nodes_[id].adj.col(k);
  };
  return id;
}

Tape::NodeId Tape::sparse_apply(const Eigen::SparseMatrix<double>& s, NodeId a) {
  if (nodes_[a].value.rows() != 1)
    throw std::invalid_argument("sparse_apply: expected a 1xN row node");
  NodeId id = push(s * nodes_[a].value.transpose(), needs(a), nullptr);
  nodes_[id].pull = [this, a, id, s] {
    if (needs(a)) adj(a) += (s.transpose() * nodes_[id].adj).transpose();
  };
  return id;
}

Tape::NodeId Tape::huber_sum(NodeId res, double beta, Mat weights) {
  if (!(beta > 0.0)) throw std::invalid_argument("huber_sum: beta must be > 0");
  const Mat& x = nodes_[res].value;
  const bool weighted = weights.size() > 0;
  if (weighted && (weights.rows() != x.rows() || weights.cols() != x.cols()))
    throw std::invalid_argument("huber_sum: weight shape mismatch");
  double total = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double ax = std::abs(x(r, c));
      const double h = ax < beta ? 0.5 * x(r, c) * x(r, c) / beta : ax - 0.5 * beta;
      total += weighted ? weights(r, c) * h : h;
    }
  NodeId id = push(Mat::Constant(1, 1, total), needs(res), nullptr);
  nodes_[id].pull = [this, res, id, beta, weighted, w = std::move(weights)] {
    if (!needs(res)) return;
    const double g = nodes_[id].adj(0, 0);
    const Mat& x = nodes_[res].value;
    Mat& a = adj(res);
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double d = std::abs(x(r, c)) < beta
                             ? x(r, c) / beta
                             : (x(r, c) > 0.0 ? 1.0 : -1.0);
        a(r, c) += g * d * (weighted ? w(r, c) : 1.0);
      }
  };
  return id;
}

Tape::NodeId Tape::dot_const(const Mat& c, NodeId a) {
  if (c.rows() != nodes_[a].value.rows() || c.cols() != nodes_[a].value.cols())
    throw std::invalid_argument("dot_const: shape mismatch");
  NodeId id = push(Mat::Constant(1, 1, c.cwiseProduct(nodes_[a].value).sum()),
                   needs(a), nullptr);
  Mat cc = c;
  nodes_[id].pull = [this, a, id, cc] {
    if (needs(a)) adj(a) += nodes_[id].adj(0, 0) * cc;
  };
  return id;
}

Tape::NodeId Tape::sum_squares(NodeId a) {
  NodeId id =
      push(Mat::Constant(1, 1, nodes_[a].value.squaredNorm()), needs(a), nullptr);
  nodes_[id].pull = [this, a, id] {
    if (needs(a)) adj(a) += 2.0 * nodes_[id].adj(0, 0) * nodes_[a].value;
  };
  return id;
}

Tape::NodeId Tape::weighted_sum(const std::vector<NodeId>& ids,
                                const std::vector<double>& coefs) {
  if (ids.size() != coefs.size())
    throw std::invalid_argument("weighted_sum: size mismatch");
  double total = 0.0;
  bool rg = false;
  for (size_t k = 0; k < ids.size(); ++k) {
    if (nodes_[ids[k]].value.size() != 1)
      throw std::invalid_argument("weighted_sum: operands must be scalar nodes");
    total += coefs[k] * nodes_[ids[k]].value(0, 0);
    rg = rg || needs(ids[k]);
  }
  NodeId id = push(Mat::Constant(1, 1, total), rg, nullptr);
  nodes_[id].pull = [this, id, ids, coefs] {
    for (size_t k = 0; k < ids.size(); ++k)
      if (needs(ids[k])) adj(ids[k])(0, 0) += coefs[k] * nodes_[id].adj(0, 0);
  };
  return id;
}

void Tape::backward(NodeId root) {
  if (ran_backward_) throw std::logic_error("Tape::backward: tape is single-use");
  if (nodes_[root].value.size() != 1)
    throw std::invalid_argument("Tape::backward: root must be a scalar node");
  ran_backward_ = true;
  for (auto& n : nodes_) n.adj = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[root].adj(0, 0) = 1.0;
  for (NodeId id = root; id >= 0; --id)
    if (nodes_[id].pull && nodes_[id].requires_grad) nodes_[id].pull();
}

}  // namespace vfm::ad
