#include <cmath>
#include <functional>
#include <vector>

#include "autograd.hpp"
#include "doctest.h"
#include "rng.hpp"

using ear::Rng;
using ear::ag::Graph;
using ear::ag::Mat;
using ear::ag::Var;

namespace {

Mat random_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

double rel_err(double a, double b) {
  const double denom = std::abs(a) + std::abs(b);
  if (denom < 1e-10) return 0.0;
  return std::abs(a - b) / denom;
}

// Central-difference check of d(loss)/d(params) against the tape. `eval`
// rebuilds the whole computation from plain matrices, so it is independent
// of any gradients the tape produced.
double max_grad_err(const std::function<double(const std::vector<Mat>&)>& eval,
                    const std::vector<Mat>& params, const std::vector<Mat>& analytic,
                    double step = 1e-5) {
  double worst = 0.0;
  std::vector<Mat> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (int i = 0; i < params[p].rows(); ++i) {
      for (int j = 0; j < params[p].cols(); ++j) {
        const double keep = probe[p](i, j);
        probe[p](i, j) = keep + step;
        const double up = eval(probe);
        probe[p](i, j) = keep - step;
        const double down = eval(probe);
        probe[p](i, j) = keep;
        const double numeric = (up - down) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[p](i, j), numeric));
      }
    }
  }
  return worst;
}

// Runs `build` once to get analytic gradients, then compares each entry to
// central differences of the loss value.
void check_op(const std::function<Var(Graph&, const std::vector<Var>&)>& build,
              const std::vector<Mat>& params, double tol = 1e-6) {
  auto eval = [&](const std::vector<Mat>& ps) {
    Graph g;
    std::vector<Var> vars;
    for (const Mat& m : ps) vars.push_back(g.input(m));
    return build(g, vars).value()(0, 0);
  };
  Graph g;
  std::vector<Var> vars;
  for (const Mat& m : params) vars.push_back(g.input(m));
  Var loss = build(g, vars);
  g.backward(loss);
  std::vector<Mat> analytic;
  for (Var v : vars) analytic.push_back(g.grad(v));
  CHECK(max_grad_err(eval, params, analytic) < tol);
}

// Fixed random weighting turns a matrix output into a scalar with
// non-degenerate gradients everywhere.
Var weigh(Graph& g, Var out, const Mat& w) { return g.sum(g.mul(out, g.input(w))); }

}  // namespace

TEST_CASE("backward of matmul chains matches finite differences") {
  Rng rng(1);
  Mat a = random_mat(rng, 3, 4), b = random_mat(rng, 4, 5), w = random_mat(rng, 3, 5);
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.matmul(v[0], v[1]), w); },
           {a, b});
  Mat b2 = random_mat(rng, 3, 4), w2 = random_mat(rng, 3, 3);
  check_op(
      [&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.matmul_nt(v[0], v[1]), w2); },
      {a, b2});
}

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(2);
  Mat a = random_mat(rng, 4, 3), b = random_mat(rng, 4, 3), w = random_mat(rng, 4, 3);
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.add(v[0], v[1]), w); }, {a, b});
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.sub(v[0], v[1]), w); }, {a, b});
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.mul(v[0], v[1]), w); }, {a, b});
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.scale(v[0], -2.5), w); }, {a});
  check_op([&](Graph& g, const std::vector<Var>& v) { return g.mean(v[0]); }, {a});
  check_op([&](Graph& g, const std::vector<Var>& v) { return g.sum(g.gelu(v[0])); }, {a});
}

TEST_CASE("log gradient on positive inputs") {
  Rng rng(3);
  Mat a = random_mat(rng, 3, 3, 0.2, 2.0), w = random_mat(rng, 3, 3);
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.log(v[0]), w); }, {a});
}

TEST_CASE("broadcast and slicing ops match finite differences") {
  Rng rng(4);
  Mat a = random_mat(rng, 4, 3), rv = random_mat(rng, 1, 3), w = random_mat(rng, 4, 3);
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.add_rowvec(v[0], v[1]), w); },
           {a, rv});
  Mat wr = random_mat(rng, 1, 3);
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.row(v[0], 2), wr); }, {a});
  check_op([&](Graph& g, const std::vector<Var>& v) { return g.pick(v[0], 1, 2); }, {a});
  Mat p1 = random_mat(rng, 4, 2), p2 = random_mat(rng, 4, 3), wc = random_mat(rng, 4, 5);
  check_op(
      [&](Graph& g, const std::vector<Var>& v) {
        return weigh(g, g.concat_cols({v[0], v[1]}), wc);
      },
      {p1, p2});
}

TEST_CASE("softmax and log-softmax match finite differences") {
  Rng rng(5);
  Mat a = random_mat(rng, 4, 6, -3.0, 3.0), w = random_mat(rng, 4, 6);
  check_op([&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.softmax_rows(v[0]), w); },
           {a}, 1e-5);
  Mat logits = random_mat(rng, 1, 2, -2.0, 2.0), wl = random_mat(rng, 1, 2);
  check_op(
      [&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.log_softmax_row(v[0]), wl); },
      {logits});
}

TEST_CASE("entropy rows: value and gradient") {
  Rng rng(6);
  // Entropy of an exact uniform row is ln(n).
  Graph g;
  Mat uniform = Mat::Constant(1, 8, 1.0 / 8.0);
  CHECK(g.entropy_rows(g.input(uniform)).value()(0, 0) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  // One-hot rows have zero entropy under the 0*log0 convention.
  Mat onehot = Mat::Zero(1, 5);
  onehot(0, 2) = 1.0;
  CHECK(g.entropy_rows(g.input(onehot)).value()(0, 0) == 0.0);

  // Gradient on positive (unnormalized is fine for the Jacobian) entries.
  Mat p = random_mat(rng, 3, 5, 0.05, 1.0), w = random_mat(rng, 3, 1);
  check_op([&](Graph& g2, const std::vector<Var>& v) { return weigh(g2, g2.entropy_rows(v[0]), w); },
           {p});
  // Composed with softmax, as the training path uses it.
  Mat x = random_mat(rng, 3, 5, -2.0, 2.0);
  check_op(
      [&](Graph& g2, const std::vector<Var>& v) {
        return weigh(g2, g2.entropy_rows(g2.softmax_rows(v[0])), w);
      },
      {x});
}

TEST_CASE("layer_norm matches finite differences") {
  Rng rng(7);
  Mat a = random_mat(rng, 4, 6), gain = random_mat(rng, 1, 6, 0.5, 1.5),
      bias = random_mat(rng, 1, 6, -0.2, 0.2), w = random_mat(rng, 4, 6);
  check_op(
      [&](Graph& g, const std::vector<Var>& v) {
        return weigh(g, g.layer_norm(v[0], v[1], v[2]), w);
      },
      {a, gain, bias}, 1e-5);
}

TEST_CASE("rows_lookup scatters gradients, repeated ids accumulate") {
  Rng rng(8);
  Mat table = random_mat(rng, 6, 4);
  std::vector<int> ids{2, 0, 2, 5};
  Mat w = random_mat(rng, 4, 4);
  check_op(
      [&](Graph& g, const std::vector<Var>& v) { return weigh(g, g.rows_lookup(v[0], ids), w); },
      {table});

  Graph g;
  Var t = g.input(table);
  Var out = g.rows_lookup(t, ids);
  g.backward(g.sum(out));
  // Row 2 was looked up twice, so its gradient is doubled; untouched rows are zero.
  CHECK(g.grad(t)(2, 0) == doctest::Approx(2.0));
  CHECK(g.grad(t)(1, 0) == 0.0);
}

TEST_CASE("backward accumulates through shared subexpressions") {
  // loss = sum(a*a) + sum(a) uses `a` twice; d/da = 2a + 1.
  Graph g;
  Mat a(2, 2);
  a << 1.0, -2.0, 0.5, 3.0;
  Var va = g.input(a);
  Var loss = g.add(g.sum(g.mul(va, va)), g.sum(va));
  g.backward(loss);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(g.grad(va)(i, j) == doctest::Approx(2.0 * a(i, j) + 1.0));
}
