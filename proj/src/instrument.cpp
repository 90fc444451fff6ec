#include "irncc/instrument.hpp"

#include <atomic>

namespace irncc::instrument {

namespace {
std::atomic<std::uint64_t> g_sqrt_calls{0};
}

void note_sqrt() noexcept { g_sqrt_calls.fetch_add(1, std::memory_order_relaxed); }
std::uint64_t sqrt_calls() noexcept { return g_sqrt_calls.load(std::memory_order_relaxed); }
void reset() noexcept { g_sqrt_calls.store(0, std::memory_order_relaxed); }

}  // namespace irncc::instrument
