#include "optimizer.hpp"

#include <cmath>

#include "common.hpp"

namespace ear {

AdamW::AdamW(const Parameters& params, const AdamWConfig& config) : config_(config) {
  for (const auto& [name, tensor] : params.tensors) {
    m_[name] = Mat::Zero(tensor.rows(), tensor.cols());
    v_[name] = Mat::Zero(tensor.rows(), tensor.cols());
  }
}

void AdamW::step(Parameters& params, const std::map<std::string, Mat>& grads, double lr) {
  if (grads.size() != m_.size()) {
    throw internal_error("optimizer got " + std::to_string(grads.size()) + " gradients, expected " +
                         std::to_string(m_.size()));
  }
  ++t_;
  const double bias1 = 1.0 - std::pow(config_.beta1, t_);
  const double bias2 = 1.0 - std::pow(config_.beta2, t_);
  for (auto& [name, theta] : params.tensors) {
    auto git = grads.find(name);
    if (git == grads.end()) throw internal_error("missing gradient for " + name);
    const Mat& g = git->second;
    if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
      throw internal_error("gradient shape mismatch for " + name);
    }
    Mat& m = m_[name];
    Mat& v = v_[name];
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const Mat m_hat = m / bias1;
    const Mat v_hat = v / bias2;
    theta -= lr * (m_hat.array() / (v_hat.array().sqrt() + config_.eps)).matrix();
    if (config_.weight_decay != 0.0 && Parameters::decays(name)) {
      theta -= lr * config_.weight_decay * theta;
    }
  }
}

double schedule_factor(int step, int total_steps, double warmup_fraction) {
  if (total_steps < 1) throw internal_error("schedule needs total_steps >= 1");
  if (step < 0 || step >= total_steps) throw internal_error("schedule step out of range");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw input_error("warmup_fraction must be in [0, 1)");
  }
  const int warmup = static_cast<int>(warmup_fraction * total_steps);
  if (step < warmup) {
    return static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  return static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

}  // namespace ear
