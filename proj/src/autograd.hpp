#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace ear::ag {

using Mat = Eigen::MatrixXd;

class Graph;

// Cheap handle into a Graph. Copyable, valid as long as its graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over double matrices. One graph per forward/backward
// pass; nodes are appended in topological order, so backward is a single
// reverse sweep. Values are 64-bit throughout so finite-difference checks
// can be tight.
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf node holding a copy of `value`. Gradients of leaves are readable
  // after backward(); parameters enter the graph this way.
  Var input(const Mat& value);
  Var input(Mat&& value);

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var add_rowvec(Var a, Var rowv);  // broadcast a 1 x c row over all rows of a
  Var row(Var a, Eigen::Index i);
  Var pick(Var a, Eigen::Index i, Eigen::Index j);  // 1x1 element
  Var concat_cols(const std::vector<Var>& parts);
  Var sum(Var a);   // 1x1
  Var mean(Var a);  // 1x1
  Var log(Var a);
  Var gelu(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_row(Var a);  // a must be 1 x k
  // Rows of p are probability distributions; returns an r x 1 column of
  // Shannon entropies in nats, with the 0*log 0 = 0 convention.
  Var entropy_rows(Var p);
  // Per-row normalization over the feature dimension, then affine with
  // gain/bias (both 1 x c).
  Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-6);
  // out(i, :) = table(ids[i], :). Backward scatter-adds into the table.
  Var rows_lookup(Var table, const std::vector<int>& ids);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape. `loss` must be 1x1.
  void backward(Var loss);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Graph&)> backprop;  // adds into operand grads
  };

  Var emplace(Mat value, std::function<void(Graph&)> backprop);
  Mat& grad_ref(int id) { return nodes_[id].grad; }
  const Mat& value_ref(int id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
  int cursor_ = -1;  // node whose backprop is running, set by backward()
};

inline const Mat& Var::value() const { return graph->value(*this); }

}  // namespace ear::ag
