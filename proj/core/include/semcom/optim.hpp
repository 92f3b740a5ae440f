#pragma once

#include "semcom/params.hpp"

#include <map>
#include <string>

namespace semcom {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_iterations = 0;  // linear ramp from lr/warmup to lr
  double clip_norm = 0.0;     // global gradient norm limit; 0 disables

  void validate() const;
};

class Adam {
 public:
  Adam(ParamStore& params, AdamConfig cfg);

  // Applies one update from the accumulated gradients and returns the
  // global gradient norm before clipping. Parameters without a gradient
  // are treated as having a zero gradient.
  double step();

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  double current_lr() const;

  // Moment buffers keyed "m.<param>" / "v.<param>", for checkpoints.
  std::map<std::string, Mat> state() const;
  void set_state(const std::map<std::string, Mat>& state, std::uint64_t steps);

 private:
  ParamStore& params_;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::map<std::string, Mat> m_;
  std::map<std::string, Mat> v_;
};

}  // namespace semcom
