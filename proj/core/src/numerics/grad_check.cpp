#include "dgtl/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/precision.hpp"
#include "dgtl/numerics/rng.hpp"
#include "dgtl/numerics/tape.hpp"

namespace dgtl::numerics {

namespace {

double eval_scalar(const std::function<Tensor()>& fn) {
  TapePause pause;
  Tensor out = fn();
  if (!out.defined() || out.size() != 1) {
    throw ValueError("grad_check: function must return a scalar");
  }
  const double v = out.values()[0];
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& fn,
                           std::span<Tensor> params, double epsilon,
                           std::size_t max_coords, std::uint64_t sample_seed) {
  if (precision() != Precision::Float64) {
    throw ValueError("grad_check requires Float64 mode");
  }
  if (epsilon <= 0.0) throw ValueError("grad_check: epsilon must be positive");

  std::vector<std::vector<double>> saved_grads(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].has_grad()) saved_grads[p] = params[p].grad_view();
    params[p].zero_grad();
  }

  // Analytic pass.
  std::vector<std::vector<double>> analytic(params.size());
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = fn();
    if (!loss.defined() || loss.size() != 1) {
      throw ValueError("grad_check: function must return a scalar");
    }
    if (!std::isfinite(loss.values()[0])) {
      throw NonFiniteError("grad_check: non-finite function value");
    }
    tape.backward(loss);
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    analytic[p] = params[p].has_grad()
                      ? params[p].grad_view()
                      : std::vector<double>(params[p].size(), 0.0);
  }

  // Coordinate selection over the concatenated parameter space.
  std::size_t total = 0;
  for (const Tensor& t : params) total += t.size();
  std::vector<std::size_t> coords;
  if (max_coords == 0 || max_coords >= total) {
    coords.resize(total);
    for (std::size_t i = 0; i < total; ++i) coords[i] = i;
  } else {
    std::vector<std::size_t> all(total);
    for (std::size_t i = 0; i < total; ++i) all[i] = i;
    Rng rng(derive_seed(sample_seed, "grad_check"));
    rng.shuffle(all);
    coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(max_coords));
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (std::size_t flat : coords) {
    std::size_t p = 0, i = flat;
    while (i >= params[p].size()) {
      i -= params[p].size();
      ++p;
    }
    auto& values = params[p].mutable_values();
    const double saved = values[i];
    values[i] = saved + epsilon;
    const double f_plus = eval_scalar(fn);
    values[i] = saved - epsilon;
    const double f_minus = eval_scalar(fn);
    values[i] = saved;
    const double cd = (f_plus - f_minus) / (2.0 * epsilon);
    const double a = analytic[p][i];
    const double denom = std::max({std::fabs(a), std::fabs(cd), 1e-8});
    const double rel = std::fabs(a - cd) / denom;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.coords_checked;
  }

  for (std::size_t p = 0; p < params.size(); ++p) {
    params[p].zero_grad();
    if (!saved_grads[p].empty()) {
      params[p].grad() = saved_grads[p];
    }
  }
  return report;
}

}  // namespace dgtl::numerics
