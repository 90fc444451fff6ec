#include "irncc/patchmath.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "irncc/error.hpp"
#include "irncc/instrument.hpp"

namespace irncc {

namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool is_flat(double dispersion, const Patch& p) {
  return dispersion <= kDegeneracyThreshold * std::max(1.0, max_abs(p.values()));
}

struct Centered {
  std::vector<double> c;
  double mean = 0.0;
};

Centered center(const Patch& p) {
  Centered out;
  out.mean = patch_mean(p);
  out.c.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out.c[i] = p[i] - out.mean;
  return out;
}

double l2_norm(std::span<const double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  return instrument::counted_sqrt(ss);
}

double abs_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

void subtract_mean(std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

// Signs of the centered values with the kink rule applied.
std::vector<double> kink_signs(std::span<const double> c, double mad, KinkPolicy policy) {
  const double tol = kKinkTolerance * std::max(1.0, mad);
  std::vector<double> s(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (std::abs(c[i]) <= tol) {
      if (policy == KinkPolicy::Strict) {
        throw KinkProximityError("pixel " + std::to_string(i) +
                                 " lies on the MAD signum kink (value equals patch mean)");
      }
      s[i] = 0.0;
    } else {
      s[i] = c[i] > 0.0 ? 1.0 : -1.0;
    }
  }
  return s;
}

// Centered values plus the MAD scale sqrt(n) * mad; throws on flat patches.
struct MadParts {
  Centered centered;
  double mad = 0.0;
  double scale = 0.0;
};

MadParts mad_parts(const Patch& p) {
  MadParts parts{center(p), 0.0, 0.0};
  const double n = static_cast<double>(p.size());
  parts.mad = abs_sum(parts.centered.c) / n;
  if (is_flat(parts.mad, p)) throw DegeneratePatchError("flat patch: MAD is zero");
  parts.scale = std::sqrt(n) * parts.mad;
  return parts;
}

struct StdParts {
  Centered centered;
  double norm = 0.0;  // sqrt(n - 1) * std
};

StdParts std_parts(const Patch& p) {
  if (p.size() < 2) throw DegeneratePatchError("standard deviation needs at least 2 pixels");
  StdParts parts{center(p), 0.0};
  parts.norm = l2_norm(parts.centered.c);
  const double sigma = parts.norm / std::sqrt(static_cast<double>(p.size() - 1));
  if (is_flat(sigma, p)) throw DegeneratePatchError("flat patch: standard deviation is zero");
  return parts;
}

}  // namespace

std::string_view to_string(NormMode mode) {
  switch (mode) {
    case NormMode::Std: return "std";
    case NormMode::Mad: return "mad";
    case NormMode::None: return "none";
  }
  return "?";
}

NormMode parse_norm_mode(std::string_view text) {
  if (text == "std") return NormMode::Std;
  if (text == "mad") return NormMode::Mad;
  if (text == "none") return NormMode::None;
  throw InvalidArgumentError("unknown normalization mode '" + std::string(text) + "'");
}

double patch_mean(const Patch& p) {
  if (p.empty()) throw InvalidArgumentError("mean of an empty patch");
  const auto v = p.values();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double patch_std(const Patch& p) {
  if (p.size() < 2) throw DegeneratePatchError("standard deviation needs at least 2 pixels");
  const Centered c = center(p);
  double ss = 0.0;
  for (double x : c.c) ss += x * x;
  return instrument::counted_sqrt(ss / static_cast<double>(p.size() - 1));
}

double patch_mad(const Patch& p) {
  const Centered c = center(p);
  return abs_sum(c.c) / static_cast<double>(p.size());
}

PatchStats patch_stats(const Patch& p) {
  return PatchStats{patch_mean(p), patch_std(p), patch_mad(p)};
}

Patch normalize_std(const Patch& p) {
  StdParts parts = std_parts(p);
  for (double& x : parts.centered.c) x /= parts.norm;
  return Patch(p.rows(), p.cols(), std::move(parts.centered.c));
}

Patch normalize_mad(const Patch& p) {
  MadParts parts = mad_parts(p);
  for (double& x : parts.centered.c) x /= parts.scale;
  return Patch(p.rows(), p.cols(), std::move(parts.centered.c));
}

Patch normalize(const Patch& p, NormMode mode) {
  switch (mode) {
    case NormMode::Std: return normalize_std(p);
    case NormMode::Mad: return normalize_mad(p);
    case NormMode::None: return p;
  }
  return p;
}

double dot(const Patch& a, const Patch& b) {
  if (!a.same_shape(b)) throw SizeMismatchError("dot product of differently shaped grids");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ResponseMap cross_correlate_valid(const Patch& image, const Patch& filter) {
  if (filter.rows() > image.rows() || filter.cols() > image.cols()) {
    throw SizeMismatchError("filter " + std::to_string(filter.rows()) + "x" +
                            std::to_string(filter.cols()) + " does not fit in image " +
                            std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }
  const int out_rows = image.rows() - filter.rows() + 1;
  const int out_cols = image.cols() - filter.cols() + 1;
  ResponseMap out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    for (int c = 0; c < out_cols; ++c) {
      double acc = 0.0;
      for (int i = 0; i < filter.rows(); ++i) {
        const double* img = &image.values()[static_cast<std::size_t>(r + i) * image.cols() + c];
        const double* f = &filter.values()[static_cast<std::size_t>(i) * filter.cols()];
        for (int j = 0; j < filter.cols(); ++j) acc += img[j] * f[j];
      }
      out(r, c) = acc;
    }
  }
  return out;
}

double ncc_score(const Patch& p, const Patch& f, NormMode mode) {
  if (!p.same_shape(f)) throw SizeMismatchError("ncc_score operands differ in shape");
  return dot(normalize(p, mode), normalize(f, mode));
}

std::vector<double> JacobianMatrix::left_multiply(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != n_) throw SizeMismatchError("vector length != Jacobian size");
  std::vector<double> out(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    for (int j = 0; j < n_; ++j) out[j] += vi * (*this)(i, j);
  }
  return out;
}

std::vector<double> JacobianMatrix::right_multiply(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != n_) throw SizeMismatchError("vector length != Jacobian size");
  std::vector<double> out(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n_; ++j) acc += (*this)(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

JacobianMatrix jacobian_normalize_std(const Patch& p) {
  const StdParts parts = std_parts(p);
  const int n = static_cast<int>(p.size());
  const double inv_n = 1.0 / n;
  std::vector<double> unit(parts.centered.c);
  for (double& x : unit) x /= parts.norm;

  // (1/s) * (I - u u^T) * (I - 11^T/n); the projections commute since u is
  // orthogonal to the constant vector.
  JacobianMatrix jac(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double centering = (i == j ? 1.0 : 0.0) - inv_n;
      jac(i, j) = (centering - unit[i] * unit[j]) / parts.norm;
    }
  }
  return jac;
}

JacobianMatrix jacobian_normalize_mad(const Patch& p, KinkPolicy policy) {
  const MadParts parts = mad_parts(p);
  const int n = static_cast<int>(p.size());
  const double inv_n = 1.0 / n;
  const std::vector<double> sign = kink_signs(parts.centered.c, parts.mad, policy);
  const double sign_mean = std::accumulate(sign.begin(), sign.end(), 0.0) * inv_n;
  const double n_mad = n * parts.mad;

  // d mad / d p(j) = (sign(j) - mean(sign)) / n
  JacobianMatrix jac(n);
  for (int i = 0; i < n; ++i) {
    const double ci = parts.centered.c[i];
    for (int j = 0; j < n; ++j) {
      const double centering = (i == j ? 1.0 : 0.0) - inv_n;
      jac(i, j) = (centering - ci * (sign[j] - sign_mean) / n_mad) / parts.scale;
    }
  }
  return jac;
}

std::vector<double> backprop_normalization(std::span<const double> upstream, const Patch& p,
                                           NormMode mode, KinkPolicy policy) {
  if (upstream.size() != p.size()) {
    throw SizeMismatchError("upstream gradient length differs from patch size");
  }
  std::vector<double> g(upstream.begin(), upstream.end());
  switch (mode) {
    case NormMode::None:
      return g;
    case NormMode::Std: {
      const StdParts parts = std_parts(p);
      // g^T J = center(g - (g.u) u) / s
      double g_dot_c = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) g_dot_c += g[i] * parts.centered.c[i];
      const double coeff = g_dot_c / (parts.norm * parts.norm);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= coeff * parts.centered.c[i];
      subtract_mean(g);
      for (double& x : g) x /= parts.norm;
      return g;
    }
    case NormMode::Mad: {
      const MadParts parts = mad_parts(p);
      const std::vector<double> sign = kink_signs(parts.centered.c, parts.mad, policy);
      // g^T J = center(g - (g.c)/(n mad) * sign) / (sqrt(n) mad)
      double g_dot_c = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) g_dot_c += g[i] * parts.centered.c[i];
      const double coeff = g_dot_c / (static_cast<double>(g.size()) * parts.mad);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= coeff * sign[i];
      subtract_mean(g);
      for (double& x : g) x /= parts.scale;
      return g;
    }
  }
  return g;
}

}  // namespace irncc
