#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "dgtl/numerics/tensor.hpp"

namespace dgtl::numerics {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// Compares the analytic gradient of a deterministic scalar function of the
// given parameters against central finite differences. The relative error
// of a coordinate is |analytic - cd| / max(|analytic|, |cd|, 1e-8).
//
// Requires Float64 mode. With max_coords > 0, that many coordinates are
// sampled without replacement over the concatenated parameter space using
// sample_seed; otherwise every coordinate is checked. Parameter values and
// gradients are restored on return.
GradCheckReport grad_check(const std::function<Tensor()>& fn,
                           std::span<Tensor> params, double epsilon = 1e-5,
                           std::size_t max_coords = 0,
                           std::uint64_t sample_seed = 0);

}  // namespace dgtl::numerics
