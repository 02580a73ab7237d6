#pragma once

#include <cstdint>

namespace dgtl::numerics {

// Global numeric mode. Float32 is the training mode: every stored tensor
// value is rounded to IEEE-754 binary32 after each operation (arithmetic
// itself runs in double), which keeps 32-bit checkpoints lossless. Float64
// is the verification mode used by gradient checks.
//
// Non-finite op results throw NonFiniteError in Float64 mode and bump a
// process-wide warning counter in Float32 mode.
enum class Precision { Float32, Float64 };

Precision precision() noexcept;
void set_precision(Precision p) noexcept;

std::uint64_t nonfinite_warnings() noexcept;
void reset_nonfinite_warnings() noexcept;
void record_nonfinite_warning() noexcept;

// Scoped mode switch; restores the previous mode on destruction.
class PrecisionGuard {
 public:
  explicit PrecisionGuard(Precision p) noexcept;
  ~PrecisionGuard();
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  Precision saved_;
};

}  // namespace dgtl::numerics
