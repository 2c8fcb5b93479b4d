#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace vfm::ad {

using Mat = Eigen::MatrixXd;

/// Reverse-mode automatic differentiation over matrix-valued nodes.
///
/// A tape is single-use: build the graph by calling ops (creation order is a
/// valid topological order), call backward() on a scalar root once, then read
/// adjoints with grad(). Batches live in columns, so an MLP forward over N
/// points is a handful of dense matrix products rather than a scalar graph.
class Tape {
 public:
  using NodeId = int;

  NodeId leaf(Mat value, bool requires_grad = true);
  NodeId constant(Mat value) { return leaf(std::move(value), false); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  /// a + bias with bias a column vector broadcast across a's columns.
  NodeId add_bias(NodeId a, NodeId bias);
  NodeId sub(NodeId a, NodeId b);
  NodeId sub_const(NodeId a, const Mat& c);
  NodeId hadamard(NodeId a, NodeId b);
  /// Elementwise product with a constant of the same shape.
  NodeId cmul(NodeId a, const Mat& c);
  NodeId scale(NodeId a, double s);
  NodeId tanh(NodeId a);
  /// 1 - a .* a (the tanh derivative written on the activation).
  NodeId one_minus_square(NodeId a);
  NodeId row(NodeId a, int r);
  NodeId gather_cols(NodeId a, std::vector<int> idx);
  /// S * a^T for a 1xN row node; result is a column vector.
  NodeId sparse_apply(const Eigen::SparseMatrix<double>& s, NodeId a);
  /// Scalar sum_i w_i * huber(res_i); empty weights mean w = 1.
  NodeId huber_sum(NodeId res, double beta, Mat weights = Mat());
  /// Scalar inner product of a constant with a node of the same shape.
  NodeId dot_const(const Mat& c, NodeId a);
  NodeId sum_squares(NodeId a);
  /// Scalar linear combination sum_k coef_k * node_k of scalar nodes.
  NodeId weighted_sum(const std::vector<NodeId>& ids,
                      const std::vector<double>& coefs);

  const Mat& value(NodeId id) const { return nodes_[id].value; }
  double scalar(NodeId id) const { return nodes_[id].value(0, 0); }
  const Mat& grad(NodeId id) const;

  /// Seeds the scalar root with 1 and sweeps the tape in reverse.
  void backward(NodeId root);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    Mat adj;
    std::function<void()> pull;  // accumulates this node's adjoint into parents
    bool requires_grad = false;
  };

  NodeId push(Mat value, bool requires_grad, std::function<void()> pull);
  Mat& adj(NodeId id) { return nodes_[id].adj; }
  bool needs(NodeId id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace vfm::ad
