#include "dgtl/numerics/precision.hpp"

#include <atomic>

namespace dgtl::numerics {

namespace {
std::atomic<Precision> g_precision{Precision::Float32};
std::atomic<std::uint64_t> g_nonfinite_warnings{0};
}  // namespace

Precision precision() noexcept { return g_precision.load(std::memory_order_relaxed); }

void set_precision(Precision p) noexcept {
  g_precision.store(p, std::memory_order_relaxed);
}

std::uint64_t nonfinite_warnings() noexcept {
  return g_nonfinite_warnings.load(std::memory_order_relaxed);
}

void reset_nonfinite_warnings() noexcept {
  g_nonfinite_warnings.store(0, std::memory_order_relaxed);
}

void record_nonfinite_warning() noexcept {
  g_nonfinite_warnings.fetch_add(1, std::memory_order_relaxed);
}

PrecisionGuard::PrecisionGuard(Precision p) noexcept : saved_(precision()) {
  set_precision(p);
}

PrecisionGuard::~PrecisionGuard() { set_precision(saved_); }

}  // namespace dgtl::numerics
