#include "autograd.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>

#include "common.hpp"

namespace ear::ag {

namespace {
void check_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw internal_error("autograd: operands from different graphs");
}
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Var Graph::emplace(Mat value, std::function<void(Graph&)> backprop) {
  nodes_.push_back(Node{std::move(value), Mat(), std::move(backprop)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(const Mat& value) { return emplace(value, nullptr); }
Var Graph::input(Mat&& value) { return emplace(std::move(value), nullptr); }

Var Graph::matmul(Var a, Var b) {
  check_same_graph(a, b);
  if (a.cols() != b.rows()) throw internal_error("matmul: inner dimensions differ");
  const int ia = a.id, ib = b.id;
  Mat out = value_ref(ia) * value_ref(ib);
  return emplace(std::move(out), [ia, ib](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    g.grad_ref(ia).noalias() += go * g.value_ref(ib).transpose();
    g.grad_ref(ib).noalias() += g.value_ref(ia).transpose() * go;
  });
}

Var Graph::matmul_nt(Var a, Var b) {
  check_same_graph(a, b);
  if (a.cols() != b.cols()) throw internal_error("matmul_nt: inner dimensions differ");
  const int ia = a.id, ib = b.id;
  Mat out = value_ref(ia) * value_ref(ib).transpose();
  return emplace(std::move(out), [ia, ib](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    g.grad_ref(ia).noalias() += go * g.value_ref(ib);
    g.grad_ref(ib).noalias() += go.transpose() * g.value_ref(ia);
  });
}

Var Graph::add(Var a, Var b) {
  check_same_graph(a, b);
  const int ia = a.id, ib = b.id;
  Mat out = value_ref(ia) + value_ref(ib);
  return emplace(std::move(out), [ia, ib](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    g.grad_ref(ia) += go;
    g.grad_ref(ib) += go;
  });
}

Var Graph::sub(Var a, Var b) {
  check_same_graph(a, b);
  const int ia = a.id, ib = b.id;
  Mat out = value_ref(ia) - value_ref(ib);
  return emplace(std::move(out), [ia, ib](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    g.grad_ref(ia) += go;
    g.grad_ref(ib) -= go;
  });
}

Var Graph::mul(Var a, Var b) {
  check_same_graph(a, b);
  const int ia = a.id, ib = b.id;
  Mat out = value_ref(ia).cwiseProduct(value_ref(ib));
  return emplace(std::move(out), [ia, ib](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    g.grad_ref(ia) += go.cwiseProduct(g.value_ref(ib));
    g.grad_ref(ib) += go.cwiseProduct(g.value_ref(ia));
  });
}

Var Graph::scale(Var a, double c) {
  const int ia = a.id;
  Mat out = value_ref(ia) * c;
  return emplace(std::move(out), [ia, c](Graph& g) { g.grad_ref(ia) += g.grad_ref(g.cursor_) * c; });
}

Var Graph::add_rowvec(Var a, Var rowv) {
  check_same_graph(a, rowv);
  if (rowv.rows() != 1 || rowv.cols() != a.cols())
    throw internal_error("add_rowvec: row vector shape mismatch");
  const int ia = a.id, ir = rowv.id;
  Mat out = value_ref(ia).rowwise() + value_ref(ir).row(0);
  return emplace(std::move(out), [ia, ir](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    g.grad_ref(ia) += go;
    g.grad_ref(ir).row(0) += go.colwise().sum();
  });
}

Var Graph::row(Var a, Eigen::Index i) {
  const int ia = a.id;
  Mat out = value_ref(ia).row(i);
  return emplace(std::move(out), [ia, i](Graph& g) {
    g.grad_ref(ia).row(i) += g.grad_ref(g.cursor_).row(0);
  });
}

Var Graph::pick(Var a, Eigen::Index i, Eigen::Index j) {
  const int ia = a.id;
  Mat out(1, 1);
  out(0, 0) = value_ref(ia)(i, j);
  return emplace(std::move(out), [ia, i, j](Graph& g) {
    g.grad_ref(ia)(i, j) += g.grad_ref(g.cursor_)(0, 0);
  });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw internal_error("concat_cols: no parts");
  std::vector<int> ids;
  Eigen::Index rows = parts.front().rows(), cols = 0;
  for (Var p : parts) {
    check_same_graph(parts.front(), p);
    if (p.rows() != rows) throw internal_error("concat_cols: row count mismatch");
    ids.push_back(p.id);
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index off = 0;
  for (int id : ids) {
    out.middleCols(off, value_ref(id).cols()) = value_ref(id);
    off += value_ref(id).cols();
  }
  return emplace(std::move(out), [ids](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index w = g.value_ref(id).cols();
      g.grad_ref(id) += go.middleCols(off, w);
      off += w;
    }
  });
}

Var Graph::sum(Var a) {
  const int ia = a.id;
  Mat out(1, 1);
  out(0, 0) = value_ref(ia).sum();
  return emplace(std::move(out), [ia](Graph& g) {
    g.grad_ref(ia).array() += g.grad_ref(g.cursor_)(0, 0);
  });
}

Var Graph::mean(Var a) {
  const int ia = a.id;
  const double n = static_cast<double>(a.rows() * a.cols());
  Mat out(1, 1);
  out(0, 0) = value_ref(ia).sum() / n;
  return emplace(std::move(out), [ia, n](Graph& g) {
    g.grad_ref(ia).array() += g.grad_ref(g.cursor_)(0, 0) / n;
  });
}

Var Graph::log(Var a) {
  const int ia = a.id;
  Mat out = value_ref(ia).array().log().matrix();
  return emplace(std::move(out), [ia](Graph& g) {
    g.grad_ref(ia).array() +=
        g.grad_ref(g.cursor_).array() / g.value_ref(ia).array();
  });
}

Var Graph::gelu(Var a) {
  const int ia = a.id;
  const Mat& x = value_ref(ia);
  Mat out = (x.array() * 0.5 * (1.0 + (x.array() * kInvSqrt2).erf())).matrix();
  return emplace(std::move(out), [ia](Graph& g) {
    const auto x = g.value_ref(ia).array();
    const auto phi = 0.5 * (1.0 + (x * kInvSqrt2).erf());
    const auto pdf = kInvSqrt2Pi * (-0.5 * x.square()).exp();
    g.grad_ref(ia).array() += g.grad_ref(g.cursor_).array() * (phi + x * pdf);
  });
}

Var Graph::softmax_rows(Var a) {
  const int ia = a.id;
  const Mat& x = value_ref(ia);
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - m).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return emplace(std::move(out), [ia](Graph& g) {
    const Mat& p = g.value_ref(g.cursor_);
    const Mat& gp = g.grad_ref(g.cursor_);
    Mat& gx = g.grad_ref(ia);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double dot = gp.row(i).dot(p.row(i));
      gx.row(i).array() += p.row(i).array() * (gp.row(i).array() - dot);
    }
  });
}

Var Graph::log_softmax_row(Var a) {
  if (a.rows() != 1) throw internal_error("log_softmax_row: expects a 1 x k row");
  const int ia = a.id;
  const Mat& x = value_ref(ia);
  const double m = x.row(0).maxCoeff();
  const double lse = std::log((x.row(0).array() - m).exp().sum()) + m;
  Mat out = (x.array() - lse).matrix();
  return emplace(std::move(out), [ia](Graph& g) {
    const Mat& ls = g.value_ref(g.cursor_);
    const Mat& go = g.grad_ref(g.cursor_);
    const double gsum = go.sum();
    g.grad_ref(ia).array() += go.array() - ls.array().exp() * gsum;
  });
}

Var Graph::entropy_rows(Var p) {
  const int ip = p.id;
  const Mat& pv = value_ref(ip);
  Mat out(pv.rows(), 1);
  for (Eigen::Index i = 0; i < pv.rows(); ++i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < pv.cols(); ++j) {
      const double pij = pv(i, j);
      if (pij > 0.0) h -= pij * std::log(pij);
    }
    out(i, 0) = h;
  }
  return emplace(std::move(out), [ip](Graph& g) {
    const Mat& pv = g.value_ref(ip);
    const Mat& gh = g.grad_ref(g.cursor_);
    Mat& gp = g.grad_ref(ip);
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
      for (Eigen::Index j = 0; j < pv.cols(); ++j) {
        const double pij = pv(i, j);
        if (pij > 0.0) gp(i, j) -= gh(i, 0) * (std::log(pij) + 1.0);
      }
    }
  });
}

Var Graph::layer_norm(Var a, Var gain, Var bias, double eps) {
  check_same_graph(a, gain);
  check_same_graph(a, bias);
  if (gain.rows() != 1 || gain.cols() != a.cols() || bias.rows() != 1 || bias.cols() != a.cols())
    throw internal_error("layer_norm: gain/bias must be 1 x cols");
  const int ia = a.id, ig = gain.id, ib = bias.id;
  const Mat& x = value_ref(ia);
  const Eigen::Index d = x.cols();
  Mat out(x.rows(), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const Eigen::RowVectorXd c = x.row(i).array() - mu;
    const double var = c.squaredNorm() / static_cast<double>(d);
    const Eigen::RowVectorXd y = c / std::sqrt(var + eps);
    out.row(i) = y.cwiseProduct(value_ref(ig).row(0)) + value_ref(ib).row(0);
  }
  return emplace(std::move(out), [ia, ig, ib, eps](Graph& g) {
    const Mat& x = g.value_ref(ia);
    const Mat& go = g.grad_ref(g.cursor_);
    const Eigen::Index d = x.cols();
    const Eigen::RowVectorXd gainv = g.value_ref(ig).row(0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double mu = x.row(i).mean();
      const Eigen::RowVectorXd c = x.row(i).array() - mu;
      const double var = c.squaredNorm() / static_cast<double>(d);
      const double inv_sigma = 1.0 / std::sqrt(var + eps);
      const Eigen::RowVectorXd y = c * inv_sigma;
      const Eigen::RowVectorXd goi = go.row(i);
      g.grad_ref(ig).row(0) += goi.cwiseProduct(y);
      g.grad_ref(ib).row(0) += goi;
      const Eigen::RowVectorXd gy = goi.cwiseProduct(gainv);
      const double gy_mean = gy.mean();
      const double gyy_mean = gy.cwiseProduct(y).mean();
      g.grad_ref(ia).row(i) += inv_sigma * (gy.array() - gy_mean - y.array() * gyy_mean).matrix();
    }
  });
}

Var Graph::rows_lookup(Var table, const std::vector<int>& ids) {
  const int it = table.id;
  const Mat& t = value_ref(it);
  Mat out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) throw internal_error("rows_lookup: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  return emplace(std::move(out), [it, ids](Graph& g) {
    const Mat& go = g.grad_ref(g.cursor_);
    Mat& gt = g.grad_ref(it);
    for (std::size_t i = 0; i < ids.size(); ++i)
      gt.row(ids[i]) += go.row(static_cast<Eigen::Index>(i));
  });
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw internal_error("backward: loss from another graph");
  if (loss.rows() != 1 || loss.cols() != 1) throw internal_error("backward: loss must be 1x1");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    if (!nodes_[id].backprop) continue;
    cursor_ = id;
    nodes_[id].backprop(*this);
  }
}

}  // namespace ear::ag
