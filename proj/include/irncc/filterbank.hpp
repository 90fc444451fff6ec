#pragma once

// Engineered and baseline detection filters, the FPGA-oriented reductions
// (cropping, 8-bit taps), the integer MAD-NCC scorer and the analytic
// operation counts of each detector.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irncc/patch.hpp"
#include "irncc/patchmath.hpp"

namespace irncc {

/// Signed fixed-point format; value = raw / 2^frac_bits.
struct QFormat {
  int total_bits = 8;
  int frac_bits = 7;

  void validate() const;
  std::int32_t min_raw() const noexcept { return -(std::int32_t{1} << (total_bits - 1)); }
  std::int32_t max_raw() const noexcept { return (std::int32_t{1} << (total_bits - 1)) - 1; }
  double lsb() const noexcept;
  friend bool operator==(const QFormat&, const QFormat&) = default;
};

/// A named detection filter. Ideal filters carry real taps in `grid`; fixed
/// filters additionally carry the integer taps, with `grid` holding their
/// dequantized values raw * 2^(scale_exponent - frac_bits).
struct FilterSpec {
  std::string name;
  Patch grid;
  NormMode deviation = NormMode::Std;  ///< Std or Mad
  std::optional<QFormat> q;            ///< empty for ideal precision
  std::vector<std::int32_t> raw;       ///< row-major integer taps (fixed only)
  int scale_exponent = 0;              ///< power-of-two prescale of fixed taps

  bool is_fixed() const noexcept { return q.has_value(); }
  int size() const noexcept { return grid.rows(); }
  /// Throws InvalidArgumentError on a non-square/even grid or bad fixed data.
  void validate() const;
};

FilterSpec make_filter(std::string name, Patch grid, NormMode deviation = NormMode::Std);

/// Isotropic Gaussian exp(-r^2 / (2 sigma^2)) sampled at integer offsets from
/// the center; not normalized (correlation normalizes at use).
FilterSpec gaussian_filter(int size, double sigma);

/// 2-D Ricker profile on [-a, a]^2 with a subtracted narrow Gaussian pit:
///   psi(r) = (1 - r^2/s^2) exp(-r^2 / (2 s^2)) - depth * exp(-r^2 / (2 rho^2)),
/// then shifted to an exactly zero-mean grid. Defaults are a fit to a filter
/// trained on the standard synthetic dataset.
struct HatParams {
  double support_halfwidth = 2.25;  ///< a
  double ricker_sigma = 1.0;        ///< s
  double pit_depth = 0.5;           ///< depth >= 0
  double pit_radius = 0.35;         ///< rho > 0

  void validate() const;
};

FilterSpec ricker_hat_filter(int size, const HatParams& params);

struct HatFit {
  HatParams params;
  double similarity = 0.0;
};

/// Largest pit depth fit_hat considers: the pit stays a dent in the central
/// Gaussian hump (the center tap keeps at least half the hump height).
inline constexpr double kMaxFitPitDepth = 0.5;

/// Coarse grid search then golden-section refinement over (a, depth, rho)
/// with s fixed at 1 and depth <= kMaxFitPitDepth, maximizing
/// filter_similarity to the trained filter.
HatFit fit_hat(const Patch& trained_filter);

/// Central new_size x new_size window (trimming, not resampling).
FilterSpec crop_filter(const FilterSpec& f, int new_size);

/// Round-half-to-even of value * 2^frac_bits, saturated to the format range.
std::int32_t quantize_value(double value, const QFormat& q);
double dequantize_value(std::int32_t raw, const QFormat& q);

enum class Prescale {
  None,        ///< quantize taps as given (caller guarantees the range)
  PowerOfTwo,  ///< center, then scale by 2^-e so max|tap| <= 1 - 2^-frac_bits
};

/// Fixed-precision copy of f. Centering and positive rescaling leave every
/// normalized score unchanged.
FilterSpec quantize_filter(const FilterSpec& f, const QFormat& q,
                           Prescale prescale = Prescale::PowerOfTwo);

/// Unsigned 16-bit detector counts, row-major.
struct IntPatch {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint16_t> values;

  std::uint16_t operator()(int r, int c) const noexcept {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
};

/// Rounds to nearest and clamps into [0, 65535].
IntPatch to_int_patch(const Patch& p);
Patch to_patch(const IntPatch& p);

/// Integer MAD-NCC score in Q(16,10), truncated toward zero and saturated.
struct FixedScore {
  static constexpr int kFracBits = 10;
  std::int32_t raw = 0;
  bool degenerate = false;  ///< zero-MAD window; raw is 0
  bool saturated = false;

  double value() const noexcept { return static_cast<double>(raw) / (1 << kFracBits); }
};

/// Bit-exact integer MAD-NCC for one fixed filter.
///
/// Filter constants (computed once): taps t_i, S_t = sum t_i,
/// D_t = sum |n t_i - S_t|  (= n^2 * mad of the taps).
/// Per window of n pixels p_i (uint16):
///   S = sum p_i                        uint32
///   mu = S / n                         uint32, truncating division
///   R = S - n * mu                     = sum (p_i - mu), in [0, n)
///   A = sum |n p_i - S|                int64, exact (= n^2 * mad)
///   X = sum (p_i - mu) * t_i           int32 products, int64 accumulator
///   Y = n * X - S_t * R                exact n * covariance sum
///   score = (Y * n^2 * 2^10) / (A * D_t)   128-bit, truncating division
/// A == 0 yields the degenerate flag and score 0. No square root is taken.
/// Supported: filters up to 15x15 with taps of at most 12 bits. With 16-bit
/// pixels X < 2^35 and Y < 2^43; the 128-bit quotient operands stay below
/// 2^70 and 2^92.
class FixedMadNcc {
 public:
  explicit FixedMadNcc(const FilterSpec& filter);

  int size() const noexcept { return size_; }
  FixedScore score(const IntPatch& frame, int r0, int c0) const;
  FixedScore score(const IntPatch& window) const { return score(window, 0, 0); }

 private:
  int size_ = 0;
  std::int64_t n_ = 0;
  std::vector<std::int32_t> taps_;
  std::int64_t tap_sum_ = 0;
  std::int64_t tap_dispersion_ = 0;
};

FixedScore mad_ncc_fixed_score(const IntPatch& p, const FilterSpec& f, const QFormat& q);

/// Per-pixel mask |p(i) - mean| / mad > threshold; flat patches give all-false.
std::vector<std::uint8_t> mad_ratio_detect(const Patch& p, double threshold);

struct OpCount {
  std::uint64_t multiplications = 0;
  std::uint64_t additions = 0;
  std::uint64_t divisions = 0;
  std::uint64_t square_roots = 0;
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

/// Analytic counts for an N x N image and f x f filter evaluated on
/// non-overlapping tiles; T = floor(N / f)^2 tiles. Methods: "mad-ratio",
/// "ncc-std", "ncc-mad", "unnorm-corr".
OpCount op_count(std::string_view method, int image_side, int filter_side);
std::vector<std::string> op_count_methods();
/// CSV `method,N,f,mul,add,div,sqrt` for every method.
void write_op_count_csv(std::ostream& out, int image_side, int filter_side);

/// Quantized filter text: `qformat <total> <frac> <scale_exponent>` followed
/// by the integer taps in the grid text layout.
void write_quantized_filter(std::ostream& out, const FilterSpec& f);
FilterSpec read_quantized_filter(std::istream& in, std::string name = "fixed");

}  // namespace irncc
