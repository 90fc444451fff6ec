#include "irncc/filterbank.hpp"

#include <algorithm>
#include <array>
#include <cfenv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "irncc/error.hpp"
#include "irncc/nccnet.hpp"

namespace irncc {

namespace {

void require_odd_square(const Patch& g, const char* what) {
  if (g.empty() || g.rows() != g.cols() || g.rows() % 2 == 0) {
    throw InvalidArgumentError(std::string(what) + " must be a square grid with odd side");
  }
}

void require_odd_size(int size) {
  if (size < 1 || size % 2 == 0) {
    throw InvalidArgumentError("filter size must be a positive odd number, got " + std::to_string(size));
  }
}

}  // namespace

void QFormat::validate() const {
  if (total_bits < 2 || total_bits > 32) throw InvalidArgumentError("QFormat total_bits must be in [2, 32]");
  if (frac_bits < 0 || frac_bits >= total_bits) {
    throw InvalidArgumentError("QFormat frac_bits must be in [0, total_bits)");
  }
}

double QFormat::lsb() const noexcept { return std::ldexp(1.0, -frac_bits); }

void HatParams::validate() const {
  if (!(support_halfwidth > 0.0)) throw InvalidArgumentError("hat support_halfwidth must be > 0");
  if (!(ricker_sigma > 0.0)) throw InvalidArgumentError("hat ricker_sigma must be > 0");
  if (!(pit_depth >= 0.0)) throw InvalidArgumentError("hat pit_depth must be >= 0");
  if (!(pit_radius > 0.0)) throw InvalidArgumentError("hat pit_radius must be > 0");
}

void FilterSpec::validate() const {
  require_odd_square(grid, "filter");
  if (deviation == NormMode::None) throw InvalidArgumentError("filter deviation mode must be std or mad");
  if (q) {
    q->validate();
    if (raw.size() != grid.size()) throw InvalidArgumentError("fixed filter raw tap count mismatch");
    for (std::int32_t r : raw) {
      if (r < q->min_raw() || r > q->max_raw()) throw InvalidArgumentError("fixed tap outside its format");
    }
  }
}

FilterSpec make_filter(std::string name, Patch grid, NormMode deviation) {
  FilterSpec f;
  f.name = std::move(name);
  f.grid = std::move(grid);
  f.deviation = deviation;
  f.validate();
  return f;
}

FilterSpec gaussian_filter(int size, double sigma) {
  require_odd_size(size);
  if (!(sigma > 0.0)) throw InvalidArgumentError("gaussian sigma must be > 0");
  const int c = size / 2;
  Patch g(size, size);
  for (int r = 0; r < size; ++r) {
    for (int col = 0; col < size; ++col) {
      const double dr = r - c;
      const double dc = col - c;
      g(r, col) = std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
    }
  }
  return make_filter("gauss-" + format_real(sigma), std::move(g));
}

FilterSpec ricker_hat_filter(int size, const HatParams& params) {
  require_odd_size(size);
  params.validate();
  const int c = size / 2;
  const double s2 = params.ricker_sigma * params.ricker_sigma;
  const double rho2 = params.pit_radius * params.pit_radius;
  // Integer offsets keep the lattice exactly symmetric under sign flips and
  // transposition, so the sampled grid has exact dihedral symmetry.
  const double step = c > 0 ? params.support_halfwidth / c : 0.0;
  Patch g(size, size);
  for (int r = 0; r < size; ++r) {
    for (int col = 0; col < size; ++col) {
      const double y = (r - c) * step;
      const double x = (col - c) * step;
      const double rr = x * x + y * y;
      g(r, col) = (1.0 - rr / s2) * std::exp(-rr / (2.0 * s2)) -
                  params.pit_depth * std::exp(-rr / (2.0 * rho2));
    }
  }
  const double mean = patch_mean(g);
  for (double& v : g.values()) v -= mean;
  return make_filter("hat" + std::to_string(size), std::move(g));
}

namespace {

double hat_similarity(int size, const HatParams& p, const Patch& target) {
  try {
    return filter_similarity(ricker_hat_filter(size, p).grid, target);
  } catch (const DegeneratePatchError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Maximizes f on [lo, hi]; also checks both ends so boundary optima survive.
template <typename F>
double golden_max(F&& f, double lo, double hi, int iterations) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < iterations; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  double best_x = f1 >= f2 ? x1 : x2;
  double best_f = std::max(f1, f2);
  for (double edge : {lo, hi}) {
    const double fe = f(edge);
    if (fe > best_f) {
      best_f = fe;
      best_x = edge;
    }
  }
  return best_x;
}

}  // namespace

HatFit fit_hat(const Patch& trained_filter) {
  require_odd_square(trained_filter, "trained filter");
  if (patch_mad(trained_filter) <= kDegeneracyThreshold) {
    throw DegeneratePatchError("cannot fit a hat to a flat filter");
  }
  const int size = trained_filter.rows();
  constexpr double kMinA = 0.5, kMaxA = 12.0;
  constexpr double kMaxDepth = kMaxFitPitDepth;
  constexpr double kMinRho = 0.05, kMaxRho = 1.0;

  HatFit best;
  best.similarity = -std::numeric_limits<double>::infinity();
  for (int ia = 0; ia <= 23; ++ia) {
    for (int id = 0; id <= 16; ++id) {
      for (int ir = 0; ir <= 10; ++ir) {
        if (id == 0 && ir > 0) continue;  // rho is irrelevant without a pit
        HatParams p;
        p.support_halfwidth = kMinA + 0.5 * ia;
        p.pit_depth = kMaxDepth * id / 16.0;
        p.pit_radius = kMinRho + (kMaxRho - kMinRho) * ir / 10.0;
        const double s = hat_similarity(size, p, trained_filter);
        if (s > best.similarity) best = HatFit{p, s};
      }
    }
  }

  // Golden-section line searches along the axes and the pairwise diagonals
  // of (a, depth, rho), repeated until a round stops improving.
  const std::array<double, 3> lo{kMinA, 0.0, kMinRho}, hi{kMaxA, kMaxDepth, kMaxRho};
  const auto params_at = [&](const std::array<double, 3>& x) {
    HatParams q;
    q.support_halfwidth = std::clamp(x[0], lo[0], hi[0]);
    q.pit_depth = std::clamp(x[1], lo[1], hi[1]);
    q.pit_radius = std::clamp(x[2], lo[2], hi[2]);
    return q;
  };
  std::vector<std::array<double, 3>> dirs = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int u = 0; u < 3; ++u)
    for (int v = u + 1; v < 3; ++v)
      for (double sign : {1.0, -1.0}) {
        std::array<double, 3> d{0, 0, 0};
        d[u] = 1.0;
        d[v] = sign;
        dirs.push_back(d);
      }
  std::array<double, 3> x{best.params.support_halfwidth, best.params.pit_depth, best.params.pit_radius};
  std::array<double, 3> reach{0.5, kMaxDepth / 16.0, (kMaxRho - kMinRho) / 10.0};
  double current = best.similarity;
  for (int round = 0; round < 200; ++round) {
    const double before = current;
    for (const auto& d : dirs) {
      const auto along = [&](double t) {
        std::array<double, 3> y = x;
        for (int k = 0; k < 3; ++k) y[k] += t * d[k] * reach[k];
        return hat_similarity(size, params_at(y), trained_filter);
      };
      const double t = golden_max(along, -1.0, 1.0, 40);
      const double s = along(t);
      if (s > current) {
        current = s;
        const HatParams q = params_at({x[0] + t * d[0] * reach[0], x[1] + t * d[1] * reach[1],
                                       x[2] + t * d[2] * reach[2]});
        x = {q.support_halfwidth, q.pit_depth, q.pit_radius};
      }
    }
    if (current - before <= 1e-13) {
      if (reach[0] < 1e-6) break;
      for (double& r : reach) r *= 0.5;
    }
  }
  if (current > best.similarity) best = HatFit{params_at(x), current};
  return best;
}

FilterSpec crop_filter(const FilterSpec& f, int new_size) {
  f.validate();
  require_odd_size(new_size);
  if (new_size > f.size()) {
    throw InvalidArgumentError("crop size " + std::to_string(new_size) + " exceeds filter size " +
                               std::to_string(f.size()));
  }
  const int off = (f.size() - new_size) / 2;
  FilterSpec out = f;
  out.grid = f.grid.window(off, off, new_size, new_size);
  if (f.is_fixed()) {
    out.raw.clear();
    for (int r = 0; r < new_size; ++r) {
      for (int c = 0; c < new_size; ++c) {
        out.raw.push_back(f.raw[static_cast<std::size_t>(r + off) * f.size() + (c + off)]);
      }
    }
  }
  return out;
}

std::int32_t quantize_value(double value, const QFormat& q) {
  q.validate();
  // nearbyint honours the current rounding mode; the default is ties-to-even.
  const double scaled = std::nearbyint(std::ldexp(value, q.frac_bits));
  if (scaled <= q.min_raw()) return q.min_raw();
  if (scaled >= q.max_raw()) return q.max_raw();
  return static_cast<std::int32_t>(scaled);
}

double dequantize_value(std::int32_t raw, const QFormat& q) {
  return std::ldexp(static_cast<double>(raw), -q.frac_bits);
}

FilterSpec quantize_filter(const FilterSpec& f, const QFormat& q, Prescale prescale) {
  f.validate();
  q.validate();
  std::vector<double> taps(f.grid.values().begin(), f.grid.values().end());
  int exponent = 0;
  if (prescale == Prescale::PowerOfTwo) {
    const double mean = patch_mean(f.grid);
    double peak = 0.0;
    for (double& t : taps) {
      t -= mean;
      peak = std::max(peak, std::abs(t));
    }
    if (peak <= kDegeneracyThreshold) throw DegeneratePatchError("cannot quantize a flat filter");
    const double limit = 1.0 - q.lsb();
    exponent = static_cast<int>(std::ceil(std::log2(peak / limit)));
    while (std::ldexp(peak, -exponent) > limit) ++exponent;
    while (std::ldexp(peak, -(exponent - 1)) <= limit) --exponent;
    for (double& t : taps) t = std::ldexp(t, -exponent);
  }
  FilterSpec out;
  out.name = f.name;
  out.deviation = f.deviation;
  out.q = q;
  out.scale_exponent = exponent;
  std::vector<double> deq(taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i) {
    out.raw.push_back(quantize_value(taps[i], q));
    deq[i] = std::ldexp(static_cast<double>(out.raw.back()), exponent - q.frac_bits);
  }
  out.grid = Patch(f.grid.rows(), f.grid.cols(), std::move(deq));
  return out;
}

IntPatch to_int_patch(const Patch& p) {
  IntPatch out{p.rows(), p.cols(), {}};
  out.values.reserve(p.size());
  for (double v : p.values()) {
    const double r = std::round(std::clamp(v, 0.0, 65535.0));
    out.values.push_back(static_cast<std::uint16_t>(r));
  }
  return out;
}

Patch to_patch(const IntPatch& p) {
  std::vector<double> v(p.values.begin(), p.values.end());
  return Patch(p.rows, p.cols, std::move(v));
}

FixedMadNcc::FixedMadNcc(const FilterSpec& filter) {
  filter.validate();
  if (!filter.is_fixed()) throw InvalidArgumentError("FixedMadNcc needs a fixed-precision filter");
  if (filter.q->total_bits > 12) throw InvalidArgumentError("FixedMadNcc supports taps of at most 12 bits");
  if (filter.size() > 15) throw InvalidArgumentError("FixedMadNcc supports filters up to 15x15");
  size_ = filter.size();
  n_ = static_cast<std::int64_t>(size_) * size_;
  taps_ = filter.raw;
  tap_sum_ = std::accumulate(taps_.begin(), taps_.end(), std::int64_t{0});
  for (std::int32_t t : taps_) tap_dispersion_ += std::abs(n_ * t - tap_sum_);
  if (tap_dispersion_ == 0) throw DegeneratePatchError("fixed filter taps are flat");
}

FixedScore FixedMadNcc::score(const IntPatch& frame, int r0, int c0) const {
  if (r0 < 0 || c0 < 0 || r0 + size_ > frame.rows || c0 + size_ > frame.cols) {
    throw SizeMismatchError("fixed scorer window exceeds frame");
  }
  std::uint32_t sum = 0;
  for (int r = 0; r < size_; ++r) {
    const std::uint16_t* row = &frame.values[static_cast<std::size_t>(r0 + r) * frame.cols + c0];
    for (int c = 0; c < size_; ++c) sum += row[c];
  }
  const std::uint32_t mean = sum / static_cast<std::uint32_t>(n_);
  const std::int64_t residual = static_cast<std::int64_t>(sum) - n_ * mean;

  const std::int64_t total = sum;
  std::int64_t abs_dev = 0;
  std::int64_t acc = 0;
  std::size_t k = 0;
  for (int r = 0; r < size_; ++r) {
    const std::uint16_t* row = &frame.values[static_cast<std::size_t>(r0 + r) * frame.cols + c0];
    for (int c = 0; c < size_; ++c, ++k) {
      const std::int32_t d = static_cast<std::int32_t>(row[c]) - static_cast<std::int32_t>(mean);
      abs_dev += std::abs(n_ * row[c] - total);
      acc += static_cast<std::int64_t>(d * taps_[k]);
    }
  }
  FixedScore out;
  if (abs_dev == 0) {
    out.degenerate = true;
    return out;
  }
  __extension__ using wide = __int128;
  const std::int64_t cov = n_ * acc - tap_sum_ * residual;
  const wide numerator = static_cast<wide>(cov) * (n_ * n_) * (std::int64_t{1} << FixedScore::kFracBits);
  const wide denominator = static_cast<wide>(abs_dev) * tap_dispersion_;
  const wide q = numerator / denominator;  // truncates toward zero
  constexpr std::int64_t kMax = std::numeric_limits<std::int16_t>::max();
  constexpr std::int64_t kMin = std::numeric_limits<std::int16_t>::min();
  if (q > kMax || q < kMin) out.saturated = true;
  out.raw = static_cast<std::int32_t>(q > kMax ? kMax : (q < kMin ? kMin : static_cast<std::int64_t>(q)));
  return out;
}

FixedScore mad_ncc_fixed_score(const IntPatch& p, const FilterSpec& f, const QFormat& q) {
  if (!f.is_fixed() || !(*f.q == q)) throw InvalidArgumentError("filter is not quantized in the given format");
  if (p.rows != f.size() || p.cols != f.size()) throw SizeMismatchError("patch and filter shapes differ");
  return FixedMadNcc(f).score(p);
}

std::vector<std::uint8_t> mad_ratio_detect(const Patch& p, double threshold) {
  if (p.size() < 2) throw InvalidArgumentError("mad_ratio_detect needs at least 2 pixels");
  std::vector<std::uint8_t> mask(p.size(), 0);
  const double mean = patch_mean(p);
  const double mad = patch_mad(p);
  double peak = 0.0;
  for (double v : p.values()) peak = std::max(peak, std::abs(v));
  if (mad <= kDegeneracyThreshold * std::max(1.0, peak)) return mask;
  for (std::size_t i = 0; i < p.size(); ++i) mask[i] = std::abs(p[i] - mean) / mad > threshold ? 1 : 0;
  return mask;
}

std::vector<std::string> op_count_methods() { return {"mad-ratio", "ncc-std", "ncc-mad", "unnorm-corr"}; }

OpCount op_count(std::string_view method, int image_side, int filter_side) {
  if (image_side < 1 || filter_side < 1) throw InvalidArgumentError("op_count sizes must be positive");
  const std::uint64_t pixels = static_cast<std::uint64_t>(image_side) * image_side;
  const std::uint64_t per_axis = static_cast<std::uint64_t>(image_side / filter_side);
  const std::uint64_t tiles = per_axis * per_axis;
  if (method == "mad-ratio") return OpCount{pixels, tiles, tiles, 0};
  if (method == "ncc-std") return OpCount{pixels, 2 * tiles, tiles, tiles};
  if (method == "ncc-mad") return OpCount{pixels, 2 * tiles, tiles, 0};
  if (method == "unnorm-corr") return OpCount{pixels, tiles, 0, 0};
  throw InvalidArgumentError("unknown op_count method '" + std::string(method) + "'");
}

void write_op_count_csv(std::ostream& out, int image_side, int filter_side) {
  out << "method,N,f,mul,add,div,sqrt\n";
  for (const std::string& m : op_count_methods()) {
    const OpCount c = op_count(m, image_side, filter_side);
    out << m << ',' << image_side << ',' << filter_side << ',' << c.multiplications << ','
        << c.additions << ',' << c.divisions << ',' << c.square_roots << '\n';
  }
}

void write_quantized_filter(std::ostream& out, const FilterSpec& f) {
  f.validate();
  if (!f.is_fixed()) throw InvalidArgumentError("filter is not quantized");
  out << "qformat " << f.q->total_bits << ' ' << f.q->frac_bits << ' ' << f.scale_exponent << '\n';
  out << "deviation " << to_string(f.deviation) << '\n';
  out << f.size() << ' ' << f.size() << '\n';
  for (int r = 0; r < f.size(); ++r) {
    for (int c = 0; c < f.size(); ++c) {
      if (c > 0) out << ' ';
      out << f.raw[static_cast<std::size_t>(r) * f.size() + c];
    }
    out << '\n';
  }
}

FilterSpec read_quantized_filter(std::istream& in, std::string name) {
  std::string word;
  auto next_int = [&]() -> long long {
    long long v = 0;
    if (!(in >> v)) throw FormatError("quantized filter: expected an integer");
    return v;
  };
  if (!(in >> word) || word != "qformat") throw FormatError("quantized filter: missing 'qformat' header");
  QFormat q{static_cast<int>(next_int()), static_cast<int>(next_int())};
  const int exponent = static_cast<int>(next_int());
  if (!(in >> word) || word != "deviation") throw FormatError("quantized filter: missing 'deviation'");
  if (!(in >> word)) throw FormatError("quantized filter: truncated");
  FilterSpec f;
  try {
    q.validate();
    f.deviation = parse_norm_mode(word);
  } catch (const InvalidArgumentError& e) {
    throw FormatError(std::string("quantized filter: ") + e.what());
  }
  const long long rows = next_int();
  const long long cols = next_int();
  if (rows < 1 || rows != cols || rows > 1024) throw FormatError("quantized filter: bad dimensions");
  f.name = std::move(name);
  f.q = q;
  f.scale_exponent = exponent;
  std::vector<double> deq;
  for (long long i = 0; i < rows * cols; ++i) {
    const long long r = next_int();
    if (r < q.min_raw() || r > q.max_raw()) throw FormatError("quantized filter: tap outside format");
    f.raw.push_back(static_cast<std::int32_t>(r));
    deq.push_back(std::ldexp(static_cast<double>(r), exponent - q.frac_bits));
  }
  f.grid = Patch(static_cast<int>(rows), static_cast<int>(cols), std::move(deq));
  try {
    f.validate();
  } catch (const InvalidArgumentError& e) {
    throw FormatError(std::string("quantized filter: ") + e.what());
  }
  return f;
}

}  // namespace irncc
