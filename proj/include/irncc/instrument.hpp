#pragma once

#include <cmath>
#include <cstdint>

// Operation counters for checking the analytic operation tables against what
// the code actually executes. Compiled in only when IRNCC_INSTRUMENT_OPS is
// defined (the `irncc_instrumented` library target); otherwise counting is a
// no-op and counted_sqrt is plain std::sqrt.

namespace irncc::instrument {

#ifdef IRNCC_INSTRUMENT_OPS
inline constexpr bool kEnabled = true;
#else
inline constexpr bool kEnabled = false;
#endif

void note_sqrt() noexcept;
std::uint64_t sqrt_calls() noexcept;
void reset() noexcept;

inline double counted_sqrt(double x) noexcept {
  if constexpr (kEnabled) note_sqrt();
  return std::sqrt(x);
}

}  // namespace irncc::instrument
