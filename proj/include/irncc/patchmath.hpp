#pragma once

// Patch statistics, the STD and MAD normalizations, valid-mode correlation,
// and the analytic backward operators of both normalizations.
//
// All functions are pure. Sizes: n = rows * cols.

#include <span>
#include <string_view>
#include <vector>

#include "irncc/patch.hpp"

namespace irncc {

/// How patches and filters are normalized before correlation.
enum class NormMode { Std, Mad, None };

std::string_view to_string(NormMode mode);
/// Accepts "std", "mad", "none" (case-sensitive); throws InvalidArgumentError.
NormMode parse_norm_mode(std::string_view text);

/// What to do when a pixel sits on the MAD signum kink (p(i) == mean).
enum class KinkPolicy {
  Strict,       ///< throw KinkProximityError
  Subgradient,  ///< use sign(0) := 0
};

/// Dispersion at or below kDegeneracyThreshold * max(1, max|p|) marks a patch flat.
inline constexpr double kDegeneracyThreshold = 1e-12;
/// |p(i) - mean| <= kKinkTolerance * max(1, mad) counts as "on the kink".
inline constexpr double kKinkTolerance = 1e-8;

struct PatchStats {
  double mean = 0.0;
  double std = 0.0;  ///< sample convention, n - 1 denominator
  double mad = 0.0;  ///< mean absolute deviation from the mean
};

double patch_mean(const Patch& p);
/// Throws DegeneratePatchError when n < 2.
double patch_std(const Patch& p);
double patch_mad(const Patch& p);
PatchStats patch_stats(const Patch& p);

/// (p - mean) / (sqrt(n - 1) * std): zero mean, unit L2 norm.
Patch normalize_std(const Patch& p);
/// (p - mean) / (sqrt(n) * mad): zero mean.
Patch normalize_mad(const Patch& p);
/// Dispatches on mode; NormMode::None returns p unchanged.
Patch normalize(const Patch& p, NormMode mode);

/// Flat dot product of two equally shaped grids.
double dot(const Patch& a, const Patch& b);

/// Valid-mode sliding cross-correlation (no kernel flip, no padding).
ResponseMap cross_correlate_valid(const Patch& image, const Patch& filter);

/// Dot product of the mode-normalized operands. For Std this is the
/// normalized cross-correlation coefficient; None gives the raw dot product.
double ncc_score(const Patch& p, const Patch& f, NormMode mode);

/// Dense n x n Jacobian; entry (i, j) = d(normalized i) / d(raw j).
class JacobianMatrix {
 public:
  explicit JacobianMatrix(int n) : n_(n), entries_(static_cast<std::size_t>(n) * n, 0.0) {}

  int n() const noexcept { return n_; }
  double operator()(int i, int j) const noexcept {
    return entries_[static_cast<std::size_t>(i) * n_ + j];
  }
  double& operator()(int i, int j) noexcept {
    return entries_[static_cast<std::size_t>(i) * n_ + j];
  }

  /// Row-vector times matrix: out(j) = sum_i v(i) * J(i, j).
  std::vector<double> left_multiply(std::span<const double> v) const;
  /// Matrix times column vector.
  std::vector<double> right_multiply(std::span<const double> v) const;

 private:
  int n_;
  std::vector<double> entries_;
};

JacobianMatrix jacobian_normalize_std(const Patch& p);
/// Strict: throws KinkProximityError if any pixel is within tolerance of the mean.
JacobianMatrix jacobian_normalize_mad(const Patch& p, KinkPolicy policy = KinkPolicy::Strict);

/// Vector-Jacobian product upstream^T * d(normalize(p))/dp in O(n), without
/// building the matrix. NormMode::None returns upstream unchanged.
std::vector<double> backprop_normalization(std::span<const double> upstream, const Patch& p,
                                           NormMode mode,
                                           KinkPolicy policy = KinkPolicy::Strict);

}  // namespace irncc
