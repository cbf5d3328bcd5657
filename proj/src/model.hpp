#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "autograd.hpp"
#include "rng.hpp"
#include "vocab.hpp"

namespace ear {

using Mat = Eigen::MatrixXd;

// Encoder shape. N*d_v must equal d_m so concatenated heads project back to
// the model dimension. Defaults are the desk-scale configuration.
struct ModelConfig {
  int L = 2;
  int N = 2;
  int d_m = 32;
  int d_k = 16;
  int d_v = 16;
  int d_ff = 64;
  int V = 0;  // vocabulary size, set once the vocabulary exists
  int max_len = 120;
  int num_classes = 2;
  double attention_dropout = 0.0;

  void validate() const;
};

// All trainable tensors, keyed by name. std::map keeps iteration order
// deterministic, which the optimizer and checkpoint format rely on.
//
// Naming: embed.token, embed.pos, layer<l>.head<h>.{wq,wk,wv},
// layer<l>.attn.wo, layer<l>.{attn,ffn}.norm.{gain,bias},
// layer<l>.ffn.{w1,b1,w2,b2}, cls.{w,b}.
struct Parameters {
  std::map<std::string, Mat> tensors;

  static Parameters init(const ModelConfig& config, Rng& rng);
  // Expected name -> (rows, cols) for a config; init() and the checkpoint
  // loader both conform to it.
  static std::map<std::string, std::pair<int, int>> shapes(const ModelConfig& config);

  const Mat& at(const std::string& name) const;
  void validate_against(const ModelConfig& config) const;  // shapes + finiteness
  // Weight decay skips biases and normalization gains/biases.
  static bool decays(const std::string& name);
};

// Per-sequence attention probabilities for every layer and head, stored at
// the sequence's effective length. Queries and keys beyond d_s never existed
// in the forward pass, so their weights are exactly zero by construction.
struct AttentionRecord {
  int d_s = 0;
  std::vector<std::vector<Mat>> weights;  // [L][N], each d_s x d_s

  double weight(int layer, int head, int i, int j) const;
  // Zero-padded copy at a requested square size >= d_s.
  Mat padded(int layer, int head, int size) const;
};

// Handles into the tape for one sequence's forward pass.
struct SequenceForward {
  int d_s = 0;
  ag::Var logits;                                   // 1 x num_classes
  std::vector<std::vector<ag::Var>> head_weights;   // [L][N] softmax rows, d_s x d_s
};

// Binds Parameters into a Graph as leaf nodes (once) and builds per-sequence
// forward passes on top. One instance per batch; gradients for every tensor
// are readable off the leaves after Graph::backward.
class ModelGraph {
public:
  ModelGraph(ag::Graph& graph, const ModelConfig& config, const Parameters& params);

  // Trims the sequence to its d_s real positions; padding can then never
  // leak into attention, which makes padding invariance exact.
  // `dropout_rng` enables attention dropout (training only); entropy and
  // recorded weights always come from the pre-dropout softmax.
  SequenceForward forward(const EncodedSequence& seq, Rng* dropout_rng = nullptr);

  ag::Var param(const std::string& name) const;
  const std::map<std::string, ag::Var>& param_vars() const { return vars_; }

private:
  ag::Graph* graph_;
  ModelConfig config_;
  std::map<std::string, ag::Var> vars_;
};

struct ForwardResult {
  Mat logits;  // B x num_classes
  std::vector<AttentionRecord> records;
};

// Inference entry point: no gradients, attention captured for analysis.
ForwardResult model_forward(const ModelConfig& config, const Parameters& params,
                            const std::vector<EncodedSequence>& batch);

// softmax over one logit row; used wherever probabilities are reported.
Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits);

}  // namespace ear
