#include "dgtl/numerics/adam.hpp"

#include <cmath>

#include "dgtl/errors.hpp"

namespace dgtl::numerics {

bool AdamState::step(std::span<Tensor> params, double grad_scale) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      m_[p].assign(params[p].size(), 0.0);
      v_[p].assign(params[p].size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw ValueError("adam: parameter list size changed between steps");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (m_[p].size() != params[p].size()) {
      throw ShapeError("adam: parameter shape changed between steps");
    }
    if (!params[p].has_grad()) continue;
    for (double g : params[p].grad_view()) {
      if (!std::isfinite(g)) return false;
    }
  }

  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p];
    auto& values = t.mutable_values();
    const std::vector<double>* grad = t.has_grad() ? &t.grad_view() : nullptr;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad ? (*grad)[i] * grad_scale : 0.0;
      m_[p][i] = cfg_.beta1 * m_[p][i] + (1.0 - cfg_.beta1) * g;
      v_[p][i] = cfg_.beta2 * v_[p][i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[p][i] / bc1;
      const double vhat = v_[p][i] / bc2;
      values[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
    t.apply_mode_rounding();
  }
  return true;
}

}  // namespace dgtl::numerics
