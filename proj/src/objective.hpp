#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "autograd.hpp"
#include "model.hpp"

namespace ear {

// Per-sequence attention entropies in nats: H[l][i] for each real token
// position, H_layer[l] their per-layer mean.
struct EntropyProfile {
  int d_s = 0;
  std::vector<std::vector<double>> H;
  std::vector<double> H_layer;
};

struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double regularization = 0.0;
  double alpha = 0.0;
};

// Controls the regularizer's definition, not its strength. `renormalize`
// applies the extra softmax to the head-averaged weights (the paper-faithful
// default); switching it off is an ablation.
struct EntropyOptions {
  bool renormalize = true;
};

// ---- analysis route: plain arithmetic on recorded attention ----

// Elementwise mean over heads of d_s x d_s probability matrices.
Mat average_heads(const std::vector<Mat>& head_weights);

// Softmax over the d_s real keys of one averaged row.
Eigen::RowVectorXd renormalize_row(const Eigen::RowVectorXd& row);

// Shannon entropy in nats, 0*ln 0 = 0. Rejects negative probabilities.
double token_entropy(const Eigen::RowVectorXd& probabilities);

// Arithmetic mean of the per-token entropies of one layer.
double layer_contextualization(const std::vector<double>& token_entropies);

// L_R = -alpha * sum_l H_layer[l].
double ear_loss(const std::vector<double>& H_layer, double alpha);

EntropyProfile entropy_profile(const AttentionRecord& record,
                               const EntropyOptions& options = {});

// Weighted cross-entropy: mean over the batch of -ln p(true class), each
// sample divided by its true-class prior when weighting is on.
double classification_loss(const Mat& logits, const std::vector<int>& labels,
                           const std::array<double, 2>& priors, bool use_class_weights);

LossBreakdown total_loss(double classification, double regularization, double alpha);

// ---- training route: same math built on the tape ----

// Sum over layers of this sequence's H^l as a 1x1 node; gradients flow
// through the whole composition (attention -> head average -> renormalize ->
// entropy).
ag::Var sequence_entropy_sum(ag::Graph& graph, const SequenceForward& fwd,
                             const EntropyOptions& options = {});

// Per-sample weighted cross-entropy as a 1x1 node.
ag::Var sample_loss(ag::Graph& graph, ag::Var logits, int label,
                    const std::array<double, 2>& priors, bool use_class_weights);

}  // namespace ear
