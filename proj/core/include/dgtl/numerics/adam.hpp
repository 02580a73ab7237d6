#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dgtl/numerics/tensor.hpp"

namespace dgtl::numerics {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Moment buffers are
// allocated on the first step and are keyed by list position, so the same
// parameter order must be passed every time. Gradients are read from each
// parameter's accumulated grad buffer, scaled by grad_scale; a missing
// buffer counts as zero gradient.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  std::int64_t step_count() const noexcept { return step_count_; }

  // Returns false and leaves parameters, moments and the step counter
  // untouched if any gradient value is non-finite.
  bool step(std::span<Tensor> params, double grad_scale = 1.0);

 private:
  AdamConfig cfg_;
  std::int64_t step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace dgtl::numerics
