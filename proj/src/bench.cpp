#include "irncc/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "irncc/error.hpp"
#include "irncc/patchmath.hpp"

namespace irncc {

namespace {

/// Window sums of p and p^2 from integral images; exact for integer frames.
class WindowMoments {
 public:
  WindowMoments(const Patch& frame, int window) : window_(window), cols1_(frame.cols() + 1) {
    const int rows = frame.rows();
    const int cols = frame.cols();
    sum_.assign(static_cast<std::size_t>(rows + 1) * cols1_, 0.0);
    sq_.assign(sum_.size(), 0.0);
    for (int r = 0; r < rows; ++r) {
      double row_sum = 0.0;
      double row_sq = 0.0;
      for (int c = 0; c < cols; ++c) {
        const double v = frame(r, c);
        row_sum += v;
        row_sq += v * v;
        sum_[at(r + 1, c + 1)] = sum_[at(r, c + 1)] + row_sum;
        sq_[at(r + 1, c + 1)] = sq_[at(r, c + 1)] + row_sq;
      }
    }
  }

  double sum(int r0, int c0) const { return box(sum_, r0, c0); }
  double sum_sq(int r0, int c0) const { return box(sq_, r0, c0); }

 private:
  std::size_t at(int r, int c) const { return static_cast<std::size_t>(r) * cols1_ + c; }
  double box(const std::vector<double>& t, int r0, int c0) const {
    const int r1 = r0 + window_;
    const int c1 = c0 + window_;
    return (t[at(r1, c1)] - t[at(r0, c1)]) - (t[at(r1, c0)] - t[at(r0, c0)]);
  }

  int window_;
  int cols1_;
  std::vector<double> sum_;
  std::vector<double> sq_;
};

double window_max_abs(const Patch& frame, int r0, int c0, int w) {
  double m = 0.0;
  for (int r = 0; r < w; ++r) {
    for (int c = 0; c < w; ++c) m = std::max(m, std::abs(frame(r0 + r, c0 + c)));
  }
  return m;
}

double window_dot(const Patch& frame, int r0, int c0, const Patch& f) {
  const int w = f.rows();
  double acc = 0.0;
  for (int r = 0; r < w; ++r) {
    const double* fr = &f.values()[static_cast<std::size_t>(r) * w];
    for (int c = 0; c < w; ++c) acc += fr[c] * frame(r0 + r, c0 + c);
  }
  return acc;
}

void check_frame(const Patch& frame, int window) {
  if (frame.rows() < window || frame.cols() < window) {
    throw SizeMismatchError("scorer window is larger than the frame");
  }
}

/// Map of dot(normalize(window, mode), fn) with fn an already normalized
/// filter; degenerate windows score 0.
ResponseMap normalized_map(const Patch& frame, const Patch& fn, NormMode mode) {
  const int w = fn.rows();
  check_frame(frame, w);
  const int out_r = frame.rows() - w + 1;
  const int out_c = frame.cols() - w + 1;
  ResponseMap map(out_r, out_c, 0.0);
  const double n = static_cast<double>(w) * w;
  if (mode == NormMode::None) {
    for (int r = 0; r < out_r; ++r) {
      for (int c = 0; c < out_c; ++c) map(r, c) = window_dot(frame, r, c, fn);
    }
    return map;
  }
  if (mode == NormMode::Std) {
    const WindowMoments moments(frame, w);
    for (int r = 0; r < out_r; ++r) {
      for (int c = 0; c < out_c; ++c) {
        const double s = moments.sum(r, c);
        const double centered_sq = std::max(0.0, (n * moments.sum_sq(r, c) - s * s) / n);
        const double stdev = std::sqrt(centered_sq / (n - 1.0));
        if (stdev <= kDegeneracyThreshold * std::max(1.0, window_max_abs(frame, r, c, w))) continue;
        // fn has zero mean, so the window mean drops out of the dot product.
        map(r, c) = window_dot(frame, r, c, fn) / std::sqrt(centered_sq);
      }
    }
    return map;
  }
  const double root_n = std::sqrt(n);
  for (int r = 0; r < out_r; ++r) {
    for (int c = 0; c < out_c; ++c) {
      double s = 0.0;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) s += frame(r + i, c + j);
      }
      const double mean = s / n;
      double abs_dev = 0.0;
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) abs_dev += std::abs(frame(r + i, c + j) - mean);
      }
      const double mad = abs_dev / n;
      if (mad <= kDegeneracyThreshold * std::max(1.0, window_max_abs(frame, r, c, w))) continue;
      map(r, c) = window_dot(frame, r, c, fn) / (root_n * mad);
    }
  }
  return map;
}

class FloatFilterScorer final : public WindowScorer {
 public:
  explicit FloatFilterScorer(FilterSpec f)
      : name_(f.name), mode_(f.deviation), normalized_(normalize(f.grid, f.deviation)) {}
  const std::string& name() const override { return name_; }
  int window() const override { return normalized_.rows(); }
  ResponseMap score_map(const Patch& frame) const override { return normalized_map(frame, normalized_, mode_); }

 private:
  std::string name_;
  NormMode mode_;
  Patch normalized_;
};

class FixedMadScorer final : public WindowScorer {
 public:
  explicit FixedMadScorer(const FilterSpec& f) : name_(f.name), scorer_(f) {}
  const std::string& name() const override { return name_; }
  int window() const override { return scorer_.size(); }
  ResponseMap score_map(const Patch& frame) const override {
    const int w = scorer_.size();
    check_frame(frame, w);
    const IntPatch ip = to_int_patch(frame);
    ResponseMap map(frame.rows() - w + 1, frame.cols() - w + 1, 0.0);
    for (int r = 0; r < map.rows(); ++r) {
      for (int c = 0; c < map.cols(); ++c) map(r, c) = scorer_.score(ip, r, c).value();
    }
    return map;
  }

 private:
  std::string name_;
  FixedMadNcc scorer_;
};

class NetworkScorer final : public WindowScorer {
 public:
  NetworkScorer(NccNetwork net, std::string name) : name_(std::move(name)), net_(std::move(net)) {
    net_.validate();
    for (const Patch& f : net_.filters) normalized_.push_back(normalize(f, net_.norm_mode));
  }
  const std::string& name() const override { return name_; }
  int window() const override { return net_.filter_size(); }
  ResponseMap score_map(const Patch& frame) const override {
    ResponseMap out;
    for (std::size_t k = 0; k < normalized_.size(); ++k) {
      const ResponseMap m = normalized_map(frame, normalized_[k], net_.norm_mode);
      if (out.empty()) out = ResponseMap(m.rows(), m.cols(), 0.0);
      for (std::size_t i = 0; i < m.size(); ++i) out[i] += net_.weights[k] * relu(m[i]);
    }
    return out;
  }

 private:
  std::string name_;
  NccNetwork net_;
  std::vector<Patch> normalized_;
};

class MadRatioScorer final : public WindowScorer {
 public:
  explicit MadRatioScorer(int window) : window_(window) {
    if (window < 3 || window % 2 == 0) throw InvalidArgumentError("mad-ratio window must be odd and >= 3");
  }
  const std::string& name() const override { return name_; }
  int window() const override { return window_; }
  ResponseMap score_map(const Patch& frame) const override {
    const int w = window_;
    check_frame(frame, w);
    const double n = static_cast<double>(w) * w;
    ResponseMap map(frame.rows() - w + 1, frame.cols() - w + 1, 0.0);
    const WindowMoments moments(frame, w);
    for (int r = 0; r < map.rows(); ++r) {
      for (int c = 0; c < map.cols(); ++c) {
        const double mean = moments.sum(r, c) / n;
        double abs_dev = 0.0;
        for (int i = 0; i < w; ++i) {
          for (int j = 0; j < w; ++j) abs_dev += std::abs(frame(r + i, c + j) - mean);
        }
        const double mad = abs_dev / n;
        if (mad <= kDegeneracyThreshold * std::max(1.0, window_max_abs(frame, r, c, w))) continue;
        map(r, c) = std::abs(frame(r + w / 2, c + w / 2) - mean) / mad;
      }
    }
    return map;
  }

 private:
  std::string name_ = "mad-ratio";
  int window_;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view text) {
  int v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError("bad integer '" + std::string(text) + "'");
  }
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::unique_ptr<WindowScorer> make_filter_scorer(FilterSpec filter) {
  filter.validate();
  if (filter.deviation == NormMode::None) throw InvalidArgumentError("filter scorers need std or mad deviation");
  if (filter.is_fixed() && filter.deviation == NormMode::Mad) return std::make_unique<FixedMadScorer>(filter);
  return std::make_unique<FloatFilterScorer>(std::move(filter));
}

std::unique_ptr<WindowScorer> make_network_scorer(NccNetwork net, std::string name) {
  return std::make_unique<NetworkScorer>(std::move(net), std::move(name));
}

std::unique_ptr<WindowScorer> make_mad_ratio_scorer(int window) { return std::make_unique<MadRatioScorer>(window); }

std::vector<std::string> builtin_methods() {
  return {"hat15-ideal",    "hat9-ideal",     "hat7-ideal",     "hat9-ideal-mad", "hat9-fixed-mad",
          "hat7-fixed",     "hat5-fixed",     "hat7-fixed-mad", "hat5-fixed-mad", "gauss-0.5",
          "gauss-1.2",      "gauss-2.0",      "mad-ratio"};
}

std::vector<std::string> default_bench_methods() { return builtin_methods(); }

FilterSpec hat_variant(int size, bool fixed, NormMode deviation, const HatParams& hat) {
  FilterSpec f = ricker_hat_filter(kCoreSize, hat);
  if (size != kCoreSize) f = crop_filter(f, size);
  f.deviation = deviation;
  if (fixed) f = quantize_filter(f, QFormat{8, 7}, Prescale::PowerOfTwo);
  return f;
}

std::unique_ptr<WindowScorer> resolve_method(std::string_view method, const HatParams& hat) {
  const std::string name(method);
  if (name == "mad-ratio") return make_mad_ratio_scorer(kCoreSize);
  if (starts_with(name, "gauss-")) {
    const double sigma = parse_real(name.substr(6));
    FilterSpec f = gaussian_filter(kCoreSize, sigma);
    f.name = name;
    return make_filter_scorer(std::move(f));
  }
  if (starts_with(name, "hat")) {
    const std::vector<std::string> parts = split(std::string_view(name).substr(3), '-');
    if (parts.size() >= 2 && parts.size() <= 3 && (parts[1] == "ideal" || parts[1] == "fixed") &&
        (parts.size() == 2 || parts[2] == "mad")) {
      const int size = parse_int(parts[0]);
      if (size < 1 || size > kCoreSize || size % 2 == 0) throw InvalidArgumentError("hat size must be odd, <= 15");
      FilterSpec f = hat_variant(size, parts[1] == "fixed", parts.size() == 3 ? NormMode::Mad : NormMode::Std, hat);
      f.name = name;
      return make_filter_scorer(std::move(f));
    }
  }
  if (starts_with(name, "filter:") || starts_with(name, "filter-mad:")) {
    const bool mad = starts_with(name, "filter-mad:");
    const std::filesystem::path path = name.substr(name.find(':') + 1);
    return make_filter_scorer(make_filter(name, load_patch(path), mad ? NormMode::Mad : NormMode::Std));
  }
  if (starts_with(name, "qfilter:")) {
    std::ifstream in(name.substr(8));
    if (!in) throw Error("cannot open '" + name.substr(8) + "'");
    return make_filter_scorer(read_quantized_filter(in, name));
  }
  if (starts_with(name, "net:")) return make_network_scorer(load_network(name.substr(4)), name);
  throw InvalidArgumentError("unknown method '" + name + "'");
}

std::vector<Detection> nms_candidates(const ResponseMap& map, int window, int frame_rows, int frame_cols,
                                      int nms_radius, int border) {
  if (nms_radius < 0) throw InvalidArgumentError("nms_radius must be >= 0");
  const int half = window / 2;
  std::vector<std::size_t> order;
  order.reserve(map.size());
  for (int r = 0; r < map.rows(); ++r) {
    const int fr = r + half;
    if (fr < border || fr > frame_rows - 1 - border) continue;
    for (int c = 0; c < map.cols(); ++c) {
      const int fc = c + half;
      if (fc < border || fc > frame_cols - 1 - border) continue;
      order.push_back(static_cast<std::size_t>(r) * map.cols() + c);
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return map[a] > map[b] || (map[a] == map[b] && a < b);
  });
  std::vector<std::uint8_t> suppressed(map.size(), 0);
  const int r2 = nms_radius * nms_radius;
  std::vector<Detection> out;
  for (std::size_t idx : order) {
    if (suppressed[idx]) continue;
    const int r = static_cast<int>(idx / map.cols());
    const int c = static_cast<int>(idx % map.cols());
    out.push_back({r + half, c + half, map[idx]});
    for (int dr = -nms_radius; dr <= nms_radius; ++dr) {
      const int rr = r + dr;
      if (rr < 0 || rr >= map.rows()) continue;
      for (int dc = -nms_radius; dc <= nms_radius; ++dc) {
        const int cc = c + dc;
        if (cc < 0 || cc >= map.cols() || dr * dr + dc * dc > r2) continue;
        suppressed[static_cast<std::size_t>(rr) * map.cols() + cc] = 1;
      }
    }
  }
  return out;
}

std::vector<Detection> sliding_detect(const Patch& frame, const WindowScorer& scorer, double threshold,
                                      int nms_radius) {
  const ResponseMap map = scorer.score_map(frame);
  std::vector<Detection> dets =
      nms_candidates(map, scorer.window(), frame.rows(), frame.cols(), nms_radius, kEvalBorder);
  dets.erase(std::find_if(dets.begin(), dets.end(), [&](const Detection& d) { return !(d.score > threshold); }),
             dets.end());
  return dets;
}

void MatchResult::add(const FrameMatch& m) {
  true_positives += m.true_positives;
  false_negatives += m.false_negatives;
  false_alarms += m.false_alarms;
  frames.push_back(m);
}

FrameMatch match_frame(const std::vector<Detection>& dets, const std::vector<PixelPos>& truths,
                       double match_radius) {
  if (!(match_radius > 0.0)) throw InvalidArgumentError("match_radius must be > 0");
  struct Pair {
    double d2;
    std::size_t det;
    std::size_t truth;
  };
  std::vector<Pair> pairs;
  const double limit = match_radius * match_radius;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = 0; j < truths.size(); ++j) {
      const double dr = dets[i].row - truths[j].row;
      const double dc = dets[i].col - truths[j].col;
      const double d2 = dr * dr + dc * dc;
      if (d2 <= limit) pairs.push_back({d2, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.det != b.det) return a.det < b.det;
    return a.truth < b.truth;
  });
  std::vector<std::uint8_t> det_used(dets.size(), 0);
  std::vector<std::uint8_t> truth_used(truths.size(), 0);
  FrameMatch m;
  for (const Pair& p : pairs) {
    if (det_used[p.det] || truth_used[p.truth]) continue;
    det_used[p.det] = truth_used[p.truth] = 1;
    ++m.true_positives;
  }
  m.false_negatives = static_cast<int>(truths.size()) - m.true_positives;
  m.false_alarms = static_cast<int>(dets.size()) - m.true_positives;
  return m;
}

MatchResult match_detections(const std::vector<std::vector<Detection>>& dets,
                             const std::vector<std::vector<PixelPos>>& truths, double match_radius) {
  if (dets.size() != truths.size()) throw SizeMismatchError("detections and truths differ in frame count");
  MatchResult result;
  for (std::size_t f = 0; f < dets.size(); ++f) result.add(match_frame(dets[f], truths[f], match_radius));
  return result;
}

std::vector<double> roc_thresholds(const std::vector<ScoredFrame>& frames, int threshold_count) {
  if (threshold_count < 2) throw InvalidArgumentError("need at least two thresholds");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const ScoredFrame& f : frames) {
    for (const Detection& d : f.candidates) {
      lo = std::min(lo, d.score);
      hi = std::max(hi, d.score);
    }
  }
  if (!(lo <= hi)) return {0.0};
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(threshold_count));
  const double step = (hi - lo) / (threshold_count - 1);
  for (int k = 0; k + 1 < threshold_count; ++k) {
    const double v = hi - step * k;
    if (t.empty() || v < t.back()) t.push_back(v);
  }
  const double last = std::nextafter(lo, -std::numeric_limits<double>::infinity());
  if (t.empty() || last < t.back()) t.push_back(last);
  return t;
}

double roc_auc(const std::vector<RocPoint>& points) {
  if (points.empty()) return 0.0;
  double max_fa = 0.0;
  double max_hit = 0.0;
  for (const RocPoint& p : points) {
    max_fa = std::max(max_fa, p.fa_per_frame);
    max_hit = std::max(max_hit, p.hit_rate);
  }
  if (max_fa == 0.0) return max_hit;
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fa_per_frame - points[i - 1].fa_per_frame) *
            0.5 * (points[i].hit_rate + points[i - 1].hit_rate);
  }
  return area / max_fa;
}

RocCurve roc_curve(const std::vector<ScoredFrame>& frames, int threshold_count, double match_radius) {
  if (frames.empty()) throw InvalidArgumentError("ROC needs at least one frame");
  std::size_t truth_total = 0;
  for (const ScoredFrame& f : frames) truth_total += f.truths.size();
  if (truth_total == 0) throw InvalidArgumentError("ROC needs at least one truth");
  std::vector<ScoredFrame> sorted = frames;
  for (ScoredFrame& f : sorted) {
    std::stable_sort(f.candidates.begin(), f.candidates.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
  }
  RocCurve curve;
  std::vector<Detection> dets;
  for (double t : roc_thresholds(sorted, threshold_count)) {
    std::size_t tp = 0;
    std::size_t fa = 0;
    for (const ScoredFrame& f : sorted) {
      dets.clear();
      for (const Detection& d : f.candidates) {
        if (!(d.score > t)) break;
        dets.push_back(d);
      }
      const FrameMatch m = match_frame(dets, f.truths, match_radius);
      tp += static_cast<std::size_t>(m.true_positives);
      fa += static_cast<std::size_t>(m.false_alarms);
    }
    curve.points.push_back({t, static_cast<double>(tp) / static_cast<double>(truth_total),
                            static_cast<double>(fa) / static_cast<double>(frames.size())});
  }
  curve.auc = roc_auc(curve.points);
  return curve;
}

void write_pgm16(const std::filesystem::path& path, const Patch& frame) {
  const IntPatch ip = to_int_patch(frame);
  std::string buf = "P5\n" + std::to_string(ip.cols) + " " + std::to_string(ip.rows) + "\n65535\n";
  buf.reserve(buf.size() + 2 * ip.values.size());
  for (std::uint16_t v : ip.values) {
    buf.push_back(static_cast<char>(v >> 8));
    buf.push_back(static_cast<char>(v & 0xff));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

Patch read_pgm16(const std::filesystem::path& path) {
  const std::string data = slurp(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (start == pos) throw FormatError("PGM header truncated in '" + path.string() + "'");
    return std::string_view(data).substr(start, pos - start);
  };
  if (token() != "P5") throw FormatError("'" + path.string() + "' is not a binary PGM");
  const int cols = parse_int(token());
  const int rows = parse_int(token());
  const int maxval = parse_int(token());
  if (cols < 1 || rows < 1) throw FormatError("PGM has invalid dimensions");
  if (maxval < 256 || maxval > 65535) throw FormatError("only 16-bit PGM frames are supported");
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(rows) * cols * 2;
  if (data.size() < pos + need) throw FormatError("PGM pixel data truncated in '" + path.string() + "'");
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto hi = static_cast<unsigned char>(data[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(data[pos + 2 * i + 1]);
    v[i] = static_cast<double>((hi << 8) | lo);
  }
  return Patch(rows, cols, std::move(v));
}

namespace {

std::string frame_file_name(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "frame_" + digits + ".pgm";
}

}  // namespace

void write_bench_frames(const std::filesystem::path& dir, const std::vector<Scene>& scenes) {
  std::filesystem::create_directories(dir / "frames");
  std::ofstream truths(dir / "truths.csv", std::ios::binary);
  if (!truths) throw Error("cannot write '" + (dir / "truths.csv").string() + "'");
  truths << "frame,row,col\n";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    write_pgm16(dir / "frames" / frame_file_name(i), scenes[i].image);
    for (const PixelPos& t : scenes[i].truths) truths << i << ',' << t.row << ',' << t.col << '\n';
  }
  if (!truths) throw Error("failed writing truths.csv");
}

std::size_t count_bench_frames(const std::filesystem::path& dir) {
  std::size_t n = 0;
  while (std::filesystem::exists(dir / "frames" / frame_file_name(n))) ++n;
  return n;
}

std::vector<std::vector<PixelPos>> read_truths_csv(const std::filesystem::path& path, std::size_t frame_count) {
  std::vector<std::vector<PixelPos>> truths(frame_count);
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "frame,row,col") throw FormatError("truths.csv: bad header");
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 3) throw FormatError("truths.csv: expected 3 fields in '" + line + "'");
    const int frame = parse_int(f[0]);
    if (frame < 0 || static_cast<std::size_t>(frame) >= frame_count) {
      throw FormatError("truths.csv: frame index out of range");
    }
    truths[static_cast<std::size_t>(frame)].push_back({parse_int(f[1]), parse_int(f[2])});
  }
  return truths;
}

BenchFrames read_bench_frames(const std::filesystem::path& dir) {
  BenchFrames out;
  const std::size_t n = count_bench_frames(dir);
  if (n == 0) throw Error("no frames found under '" + (dir / "frames").string() + "'");
  for (std::size_t i = 0; i < n; ++i) out.frames.push_back(read_pgm16(dir / "frames" / frame_file_name(i)));
  out.truths = read_truths_csv(dir / "truths.csv", n);
  return out;
}

const MethodResult& BenchReport::at(std::string_view method) const {
  for (const MethodResult& m : methods) {
    if (m.method == method) return m;
  }
  throw InvalidArgumentError("method '" + std::string(method) + "' not in report");
}

namespace {

void finish_method(MethodResult& m, const BenchConfig& config) {
  m.min_score = std::numeric_limits<double>::infinity();
  m.max_score = -std::numeric_limits<double>::infinity();
  for (const ScoredFrame& f : m.scored) {
    for (const Detection& d : f.candidates) {
      m.min_score = std::min(m.min_score, d.score);
      m.max_score = std::max(m.max_score, d.score);
    }
  }
  if (m.min_score > m.max_score) m.min_score = m.max_score = 0.0;
  m.roc = roc_curve(m.scored, config.threshold_count, config.match_radius);
}

}  // namespace

BenchReport run_benchmark(const BenchFrames& data, const std::vector<std::string>& methods,
                          const BenchConfig& config, const HatParams& hat) {
  if (data.frames.size() != data.truths.size()) throw SizeMismatchError("frames and truths differ in count");
  if (methods.empty()) throw InvalidArgumentError("no methods to benchmark");
  BenchReport report;
  for (const std::string& method : methods) {
    if (method.find(',') != std::string::npos) throw InvalidArgumentError("method names cannot contain ','");
    const std::unique_ptr<WindowScorer> scorer = resolve_method(method, hat);
    MethodResult m;
    m.method = method;
    double seconds = 0.0;
    for (std::size_t f = 0; f < data.frames.size(); ++f) {
      const auto t0 = std::chrono::steady_clock::now();
      const ResponseMap map = scorer->score_map(data.frames[f]);
      ScoredFrame sf;
      sf.candidates = nms_candidates(map, scorer->window(), data.frames[f].rows(), data.frames[f].cols(),
                                     config.nms_radius, kEvalBorder);
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      sf.truths = data.truths[f];
      m.scored.push_back(std::move(sf));
    }
    m.ms_per_frame = config.timing ? 1000.0 * seconds / static_cast<double>(data.frames.size()) : 0.0;
    finish_method(m, config);
    report.methods.push_back(std::move(m));
  }
  return report;
}

void write_roc_csv(std::ostream& out, const BenchReport& report) {
  out << "method,threshold,hit_rate,fa_per_frame\n";
  for (const MethodResult& m : report.methods) {
    for (const RocPoint& p : m.roc.points) {
      out << m.method << ',' << format_real(p.threshold) << ',' << format_real(p.hit_rate) << ','
          << format_real(p.fa_per_frame) << '\n';
    }
  }
}

void write_auc_csv(std::ostream& out, const BenchReport& report) {
  out << "method,auc,ms_per_frame\n";
  for (const MethodResult& m : report.methods) {
    char ms[32];
    std::snprintf(ms, sizeof ms, "%.3f", m.ms_per_frame);
    out << m.method << ',' << format_real(m.roc.auc) << ',' << ms << '\n';
  }
}

void write_score_range_csv(std::ostream& out, const BenchReport& report) {
  out << "method,min_score,max_score\n";
  for (const MethodResult& m : report.methods) {
    out << m.method << ',' << format_real(m.min_score) << ',' << format_real(m.max_score) << '\n';
  }
}

void write_scores_csv(std::ostream& out, const BenchReport& report) {
  out << "method,frame,row,col,score\n";
  for (const MethodResult& m : report.methods) {
    for (std::size_t f = 0; f < m.scored.size(); ++f) {
      for (const Detection& d : m.scored[f].candidates) {
        out << m.method << ',' << f << ',' << d.row << ',' << d.col << ',' << format_real(d.score) << '\n';
      }
    }
  }
}

BenchReport read_scores_csv(std::istream& in, const std::vector<std::vector<PixelPos>>& truths,
                            const BenchConfig& config) {
  if (truths.empty()) throw InvalidArgumentError("scores need at least one frame of truths");
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "method,frame,row,col,score") {
    throw FormatError("scores csv: bad header");
  }
  BenchReport report;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 5) throw FormatError("scores csv: expected 5 fields in '" + line + "'");
    auto it = index.find(f[0]);
    if (it == index.end()) {
      it = index.emplace(f[0], report.methods.size()).first;
      MethodResult m;
      m.method = f[0];
      m.scored.resize(truths.size());
      for (std::size_t k = 0; k < truths.size(); ++k) m.scored[k].truths = truths[k];
      report.methods.push_back(std::move(m));
    }
    const int frame = parse_int(f[1]);
    if (frame < 0 || static_cast<std::size_t>(frame) >= truths.size()) {
      throw FormatError("scores csv: frame index out of range");
    }
    report.methods[it->second].scored[static_cast<std::size_t>(frame)].candidates.push_back(
        {parse_int(f[2]), parse_int(f[3]), parse_real(f[4])});
  }
  if (report.methods.empty()) throw FormatError("scores csv has no rows");
  for (MethodResult& m : report.methods) finish_method(m, config);
  return report;
}

void write_detections_csv(std::ostream& out, const std::vector<Detection>& dets) {
  out << "row,col,score\n";
  for (const Detection& d : dets) out << d.row << ',' << d.col << ',' << format_real(d.score) << '\n';
}

void write_hat_params(std::ostream& out, const HatFit& fit) {
  out << "support_halfwidth " << format_real(fit.params.support_halfwidth) << '\n'
      << "ricker_sigma " << format_real(fit.params.ricker_sigma) << '\n'
      << "pit_depth " << format_real(fit.params.pit_depth) << '\n'
      << "pit_radius " << format_real(fit.params.pit_radius) << '\n'
      << "similarity " << format_real(fit.similarity) << '\n';
}

HatParams read_hat_params(std::istream& in) {
  HatParams p;
  bool seen[4] = {false, false, false, false};
  std::string key;
  std::string value;
  while (in >> key) {
    if (!(in >> value)) throw FormatError("hat parameters: missing value for '" + key + "'");
    const double v = parse_real(value);
    if (key == "support_halfwidth") {
      p.support_halfwidth = v;
      seen[0] = true;
    } else if (key == "ricker_sigma") {
      p.ricker_sigma = v;
      seen[1] = true;
    } else if (key == "pit_depth") {
      p.pit_depth = v;
      seen[2] = true;
    } else if (key == "pit_radius") {
      p.pit_radius = v;
      seen[3] = true;
    } else if (key != "similarity") {
      throw FormatError("hat parameters: unknown key '" + key + "'");
    }
  }
  if (!(seen[0] && seen[1] && seen[2] && seen[3])) throw FormatError("hat parameters: missing keys");
  p.validate();
  return p;
}

}  // namespace irncc
