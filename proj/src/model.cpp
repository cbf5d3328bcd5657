#include "model.hpp"

#include <cmath>
#include <numeric>

#include "common.hpp"

namespace ear {

void ModelConfig::validate() const {
  if (L < 1 || N < 1 || d_m < 1 || d_k < 1 || d_v < 1 || d_ff < 1) {
    throw input_error("model dimensions must all be >= 1");
  }
  if (N * d_v != d_m) {
    throw input_error("N*d_v must equal d_m (heads concatenate back to the model dim), got " +
                      std::to_string(N) + "*" + std::to_string(d_v) + " vs " + std::to_string(d_m));
  }
  if (V < 5) throw input_error("vocabulary size must cover the reserved tokens");
  if (max_len < 2) throw input_error("max_len must be >= 2");
  if (num_classes != 2) throw input_error("only binary classification is supported");
  if (!(attention_dropout >= 0.0 && attention_dropout < 1.0)) {
    throw input_error("attention_dropout must be in [0, 1)");
  }
}

std::map<std::string, std::pair<int, int>> Parameters::shapes(const ModelConfig& c) {
  std::map<std::string, std::pair<int, int>> s;
  s["embed.token"] = {c.V, c.d_m};
  s["embed.pos"] = {c.max_len, c.d_m};
  for (int l = 0; l < c.L; ++l) {
    const std::string layer = "layer" + std::to_string(l) + ".";
    for (int h = 0; h < c.N; ++h) {
      const std::string head = layer + "head" + std::to_string(h) + ".";
      s[head + "wq"] = {c.d_m, c.d_k};
      s[head + "wk"] = {c.d_m, c.d_k};
      s[head + "wv"] = {c.d_m, c.d_v};
    }
    s[layer + "attn.wo"] = {c.N * c.d_v, c.d_m};
    s[layer + "attn.norm.gain"] = {1, c.d_m};
    s[layer + "attn.norm.bias"] = {1, c.d_m};
    s[layer + "ffn.w1"] = {c.d_m, c.d_ff};
    s[layer + "ffn.b1"] = {1, c.d_ff};
    s[layer + "ffn.w2"] = {c.d_ff, c.d_m};
    s[layer + "ffn.b2"] = {1, c.d_m};
    s[layer + "ffn.norm.gain"] = {1, c.d_m};
    s[layer + "ffn.norm.bias"] = {1, c.d_m};
  }
  s["cls.w"] = {c.d_m, c.num_classes};
  s["cls.b"] = {1, c.num_classes};
  return s;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

bool Parameters::decays(const std::string& name) {
  if (name.find(".norm.") != std::string::npos) return false;
  const std::size_t dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  return !leaf.empty() && leaf[0] != 'b';
}

Parameters Parameters::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  Parameters p;
  // std::map iteration is name-ordered, so the draw sequence is a pure
  // function of the config and seed.
  for (const auto& [name, shape] : shapes(config)) {
    const auto [rows, cols] = shape;
    Mat m(rows, cols);
    if (name.find(".norm.gain") != std::string::npos) {
      m.setOnes();
    } else if (!decays(name)) {
      m.setZero();  // biases and norm offsets start at 0
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
      }
    }
    p.tensors[name] = std::move(m);
  }
  return p;
}

const Mat& Parameters::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw internal_error("missing parameter tensor: " + name);
  return it->second;
}

void Parameters::validate_against(const ModelConfig& config) const {
  const auto expected = shapes(config);
  if (tensors.size() != expected.size()) {
    throw input_error("parameter set has " + std::to_string(tensors.size()) + " tensors, expected " +
                      std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    const Mat& m = at(name);
    if (m.rows() != shape.first || m.cols() != shape.second) {
      throw input_error("parameter " + name + " has shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " + std::to_string(shape.first) + "x" +
                        std::to_string(shape.second));
    }
    if (!m.allFinite()) throw input_error("parameter " + name + " contains non-finite values");
  }
}

double AttentionRecord::weight(int layer, int head, int i, int j) const {
  if (i >= d_s || j >= d_s || i < 0 || j < 0) return 0.0;
  return weights[static_cast<std::size_t>(layer)][static_cast<std::size_t>(head)](i, j);
}

Mat AttentionRecord::padded(int layer, int head, int size) const {
  if (size < d_s) throw internal_error("padded size smaller than effective length");
  Mat out = Mat::Zero(size, size);
  out.topLeftCorner(d_s, d_s) = weights[static_cast<std::size_t>(layer)][static_cast<std::size_t>(head)];
  return out;
}

ModelGraph::ModelGraph(ag::Graph& graph, const ModelConfig& config, const Parameters& params)
    : graph_(&graph), config_(config) {
  params.validate_against(config);
  for (const auto& [name, tensor] : params.tensors) {
    vars_[name] = graph_->input(tensor);
  }
}

ag::Var ModelGraph::param(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw internal_error("missing parameter var: " + name);
  return it->second;
}

SequenceForward ModelGraph::forward(const EncodedSequence& seq, Rng* dropout_rng) {
  const int d_s = seq.effective_length;
  if (static_cast<int>(seq.ids.size()) > config_.max_len) {
    throw input_error("sequence length " + std::to_string(seq.ids.size()) +
                      " exceeds model max_len " + std::to_string(config_.max_len));
  }
  if (d_s < 1 || d_s > static_cast<int>(seq.ids.size())) {
    throw input_error("effective length " + std::to_string(d_s) + " is inconsistent");
  }

  ag::Graph& g = *graph_;
  std::vector<int> ids(seq.ids.begin(), seq.ids.begin() + d_s);
  for (int id : ids) {
    if (id < 0 || id >= config_.V) {
      throw input_error("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(config_.V));
    }
  }
  std::vector<int> positions(static_cast<std::size_t>(d_s));
  std::iota(positions.begin(), positions.end(), 0);

  ag::Var E = g.add(g.rows_lookup(param("embed.token"), ids),
                    g.rows_lookup(param("embed.pos"), positions));

  SequenceForward out;
  out.d_s = d_s;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(config_.d_k));
  for (int l = 0; l < config_.L; ++l) {
    const std::string layer = "layer" + std::to_string(l) + ".";
    std::vector<ag::Var> head_outs;
    std::vector<ag::Var> head_ws;
    for (int h = 0; h < config_.N; ++h) {
      const std::string head = layer + "head" + std::to_string(h) + ".";
      ag::Var Q = g.matmul(E, param(head + "wq"));
      ag::Var K = g.matmul(E, param(head + "wk"));
      ag::Var V = g.matmul(E, param(head + "wv"));
      ag::Var A = g.softmax_rows(g.scale(g.matmul_nt(Q, K), inv_sqrt_dk));
      head_ws.push_back(A);
      ag::Var A_used = A;
      if (dropout_rng != nullptr && config_.attention_dropout > 0.0) {
        const double keep = 1.0 - config_.attention_dropout;
        Mat mask(d_s, d_s);
        for (int i = 0; i < d_s; ++i) {
          for (int j = 0; j < d_s; ++j) {
            mask(i, j) = dropout_rng->uniform01() < keep ? 1.0 / keep : 0.0;
          }
        }
        A_used = g.mul(A, g.input(std::move(mask)));
      }
      head_outs.push_back(g.matmul(A_used, V));
    }
    ag::Var concat = config_.N == 1 ? head_outs[0] : g.concat_cols(head_outs);
    ag::Var attn = g.matmul(concat, param(layer + "attn.wo"));
    E = g.layer_norm(g.add(E, attn), param(layer + "attn.norm.gain"),
                     param(layer + "attn.norm.bias"));
    ag::Var ff = g.gelu(g.add_rowvec(g.matmul(E, param(layer + "ffn.w1")), param(layer + "ffn.b1")));
    ff = g.add_rowvec(g.matmul(ff, param(layer + "ffn.w2")), param(layer + "ffn.b2"));
    E = g.layer_norm(g.add(E, ff), param(layer + "ffn.norm.gain"), param(layer + "ffn.norm.bias"));
    out.head_weights.push_back(std::move(head_ws));
  }

  ag::Var cls_vec = g.row(E, 0);  // [CLS] sits at position 0
  out.logits = g.add_rowvec(g.matmul(cls_vec, param("cls.w")), param("cls.b"));
  return out;
}

ForwardResult model_forward(const ModelConfig& config, const Parameters& params,
                            const std::vector<EncodedSequence>& batch) {
  ag::Graph graph;
  ModelGraph model(graph, config, params);
  ForwardResult result;
  result.logits.resize(static_cast<Eigen::Index>(batch.size()), config.num_classes);
  result.records.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    SequenceForward fwd = model.forward(batch[b]);
    result.logits.row(static_cast<Eigen::Index>(b)) = fwd.logits.value().row(0);
    AttentionRecord rec;
    rec.d_s = fwd.d_s;
    rec.weights.resize(static_cast<std::size_t>(config.L));
    for (int l = 0; l < config.L; ++l) {
      for (int h = 0; h < config.N; ++h) {
        rec.weights[static_cast<std::size_t>(l)].push_back(
            fwd.head_weights[static_cast<std::size_t>(l)][static_cast<std::size_t>(h)].value());
      }
    }
    result.records.push_back(std::move(rec));
  }
  if (!result.logits.allFinite()) throw internal_error("non-finite logits in forward pass");
  return result;
}

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::RowVectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

}  // namespace ear
