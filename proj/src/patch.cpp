#include "irncc/patch.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "irncc/error.hpp"

namespace irncc {

namespace {

void check_dims(int rows, int cols) {
  if (rows < 1 || cols < 1) {
    throw InvalidArgumentError("patch dimensions must be positive, got " +
                               std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

Patch::Patch(int rows, int cols, double fill) : rows_(rows), cols_(cols) {
  check_dims(rows, cols);
  if (!std::isfinite(fill)) throw InvalidArgumentError("patch fill value is not finite");
  values_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

Patch::Patch(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  check_dims(rows, cols);
  if (values_.size() != static_cast<std::size_t>(rows) * cols) {
    throw SizeMismatchError("patch value count " + std::to_string(values_.size()) +
                            " does not match " + std::to_string(rows) + "x" +
                            std::to_string(cols));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgumentError("patch contains a non-finite value");
  }
}

Patch Patch::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(r) * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw SizeMismatchError("ragged row list");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Patch(r, c, std::move(v));
}

Patch Patch::window(int r0, int c0, int rows, int cols) const {
  if (r0 < 0 || c0 < 0 || r0 + rows > rows_ || c0 + cols > cols_) {
    throw SizeMismatchError("window exceeds patch bounds");
  }
  Patch out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = (*this)(r0 + r, c0 + c);
  }
  return out;
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw FormatError("not a real number: '" + std::string(text) + "'");
  }
  return v;
}

void write_patch_text(std::ostream& out, const Patch& p) {
  out << p.rows() << ' ' << p.cols() << '\n';
  for (int r = 0; r < p.rows(); ++r) {
    for (int c = 0; c < p.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_real(p(r, c));
    }
    out << '\n';
  }
}

Patch read_patch_text(std::istream& in) {
  std::string token;
  auto next = [&](const char* what) {
    if (!(in >> token)) throw FormatError(std::string("grid text truncated reading ") + what);
    return token;
  };
  auto parse_dim = [](const std::string& t) {
    int v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size() || v < 1) {
      throw FormatError("bad grid dimension '" + t + "'");
    }
    return v;
  };
  const int rows = parse_dim(next("rows"));
  const int cols = parse_dim(next("cols"));
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows * cols; ++i) v.push_back(parse_real(next("value")));
  return Patch(rows, cols, std::move(v));
}

void save_patch(const std::filesystem::path& path, const Patch& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_patch_text(out, p);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

Patch load_patch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_patch_text(in);
}

}  // namespace irncc
