#pragma once

#include <map>
#include <string>

#include "model.hpp"

namespace ear {

// Adaptive-moment optimizer with decoupled weight decay. Decay is skipped
// for tensors Parameters::decays() rejects (biases, normalization params).
struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
public:
  AdamW(const Parameters& params, const AdamWConfig& config);

  // One update with the effective learning rate for this step; grads must
  // cover exactly the tensors the optimizer was built with.
  void step(Parameters& params, const std::map<std::string, Mat>& grads, double lr);
  int steps_taken() const { return t_; }

private:
  AdamWConfig config_;
  std::map<std::string, Mat> m_;
  std::map<std::string, Mat> v_;
  int t_ = 0;
};

// Linear warmup from 0 to 1 over the first `warmup_fraction` of
// `total_steps`, then linear decay to 0 at the horizon. `step` is 0-based.
double schedule_factor(int step, int total_steps, double warmup_fraction);

}  // namespace ear
