#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace irncc {

/// Row-major grid of real pixel intensities, (row, col) with top-left origin.
///
/// Used for image patches, filters, whole frames and response maps alike.
/// A default-constructed Patch is empty (0x0); every other Patch has at least
/// one pixel and only finite values at construction time.
class Patch {
 public:
  Patch() = default;
  Patch(int rows, int cols, double fill = 0.0);
  Patch(int rows, int cols, std::vector<double> values);

  /// Builds a patch from nested row lists, e.g. `Patch::from_rows({{1, 2}, {3, 4}})`.
  static Patch from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  bool same_shape(const Patch& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double operator()(int r, int c) const noexcept {
    return values_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double& operator()(int r, int c) noexcept {
    return values_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Copies the rows x cols window whose top-left corner is (r0, c0).
  Patch window(int r0, int c0, int rows, int cols) const;

  friend bool operator==(const Patch&, const Patch&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

/// Sliding-window correlation output; same storage as a Patch.
using ResponseMap = Patch;

/// Text grid format: first line `<rows> <cols>`, then one line per row of
/// whitespace-separated reals. Values are written with 17 significant digits
/// through std::to_chars, so reading back is lossless and locale-free.
void write_patch_text(std::ostream& out, const Patch& p);
Patch read_patch_text(std::istream& in);

void save_patch(const std::filesystem::path& path, const Patch& p);
Patch load_patch(const std::filesystem::path& path);

/// Formats a double with 17 significant digits, no locale.
std::string format_real(double v);
/// Parses a decimal real with `.` as the decimal point; throws FormatError.
double parse_real(std::string_view text);

}  // namespace irncc
