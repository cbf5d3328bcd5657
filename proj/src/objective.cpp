#include "objective.hpp"

#include <cmath>

#include "common.hpp"

namespace ear {

Mat average_heads(const std::vector<Mat>& head_weights) {
  if (head_weights.empty()) throw internal_error("average_heads over zero heads");
  Mat out = head_weights[0];
  for (std::size_t h = 1; h < head_weights.size(); ++h) {
    if (head_weights[h].rows() != out.rows() || head_weights[h].cols() != out.cols()) {
      throw internal_error("head weight shape mismatch");
    }
    out += head_weights[h];
  }
  return out / static_cast<double>(head_weights.size());
}

Eigen::RowVectorXd renormalize_row(const Eigen::RowVectorXd& row) {
  return softmax_row(row);
}

double token_entropy(const Eigen::RowVectorXd& probabilities) {
  double sum = 0.0;
  double h = 0.0;
  for (Eigen::Index j = 0; j < probabilities.size(); ++j) {
    const double p = probabilities[j];
    if (p < 0.0) throw input_error("negative probability in entropy computation");
    if (p > 0.0) h -= p * std::log(p);
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw input_error("entropy input does not sum to 1 (got " + std::to_string(sum) + ")");
  }
  return h;
}

double layer_contextualization(const std::vector<double>& token_entropies) {
  if (token_entropies.empty()) throw internal_error("layer mean over zero tokens");
  double s = 0.0;
  for (double h : token_entropies) s += h;
  return s / static_cast<double>(token_entropies.size());
}

double ear_loss(const std::vector<double>& H_layer, double alpha) {
  if (!std::isfinite(alpha)) throw input_error("alpha must be finite");
  double s = 0.0;
  for (double h : H_layer) s += h;
  return -alpha * s;
}

EntropyProfile entropy_profile(const AttentionRecord& record, const EntropyOptions& options) {
  EntropyProfile profile;
  profile.d_s = record.d_s;
  profile.H.resize(record.weights.size());
  for (std::size_t l = 0; l < record.weights.size(); ++l) {
    const Mat averaged = average_heads(record.weights[l]);
    std::vector<double> token_h(static_cast<std::size_t>(record.d_s));
    for (int i = 0; i < record.d_s; ++i) {
      Eigen::RowVectorXd row = averaged.row(i);
      if (options.renormalize) row = renormalize_row(row);
      token_h[static_cast<std::size_t>(i)] = token_entropy(row);
    }
    profile.H_layer.push_back(layer_contextualization(token_h));
    profile.H[l] = std::move(token_h);
  }
  return profile;
}

double classification_loss(const Mat& logits, const std::vector<int>& labels,
                           const std::array<double, 2>& priors, bool use_class_weights) {
  if (logits.rows() == 0) throw input_error("classification loss over an empty batch");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw internal_error("logits/labels size mismatch");
  }
  double total = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y != 0 && y != 1) throw input_error("label must be 0 or 1");
    const Eigen::RowVectorXd p = softmax_row(logits.row(b));
    double ce = -std::log(p[y]);
    if (use_class_weights) {
      const double prior = priors[static_cast<std::size_t>(y)];
      if (!(prior > 0.0)) throw input_error("class prior must be positive with weighting on");
      ce /= prior;
    }
    total += ce;
  }
  return total / static_cast<double>(logits.rows());
}

LossBreakdown total_loss(double classification, double regularization, double alpha) {
  LossBreakdown out;
  out.classification = classification;
  out.regularization = regularization;
  out.alpha = alpha;
  out.total = classification + regularization;
  return out;
}

ag::Var sequence_entropy_sum(ag::Graph& graph, const SequenceForward& fwd,
                             const EntropyOptions& options) {
  ag::Var layer_sum;
  for (const std::vector<ag::Var>& heads : fwd.head_weights) {
    ag::Var averaged = heads[0];
    for (std::size_t h = 1; h < heads.size(); ++h) averaged = graph.add(averaged, heads[h]);
    if (heads.size() > 1) averaged = graph.scale(averaged, 1.0 / static_cast<double>(heads.size()));
    ag::Var rows = options.renormalize ? graph.softmax_rows(averaged) : averaged;
    ag::Var H_layer = graph.mean(graph.entropy_rows(rows));
    layer_sum = layer_sum.valid() ? graph.add(layer_sum, H_layer) : H_layer;
  }
  return layer_sum;
}

ag::Var sample_loss(ag::Graph& graph, ag::Var logits, int label,
                    const std::array<double, 2>& priors, bool use_class_weights) {
  if (label != 0 && label != 1) throw input_error("label must be 0 or 1");
  ag::Var log_probs = graph.log_softmax_row(logits);
  ag::Var nll = graph.scale(graph.pick(log_probs, 0, label), -1.0);
  if (use_class_weights) {
    const double prior = priors[static_cast<std::size_t>(label)];
    if (!(prior > 0.0)) throw input_error("class prior must be positive with weighting on");
    nll = graph.scale(nll, 1.0 / prior);
  }
  return nll;
}

}  // namespace ear
