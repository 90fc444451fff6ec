#include "irncc/irdatagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "irncc/error.hpp"
#include "irncc/patchmath.hpp"
#include "irncc/rng.hpp"

namespace irncc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void add_gaussian_blob(Patch& img, double r0, double c0, double sigma, double amplitude) {
  const int reach = static_cast<int>(std::ceil(4.0 * sigma));
  const int rmin = std::max(0, static_cast<int>(std::floor(r0)) - reach);
  const int rmax = std::min(img.rows() - 1, static_cast<int>(std::ceil(r0)) + reach);
  const int cmin = std::max(0, static_cast<int>(std::floor(c0)) - reach);
  const int cmax = std::min(img.cols() - 1, static_cast<int>(std::ceil(c0)) + reach);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int r = rmin; r <= rmax; ++r) {
    for (int c = cmin; c <= cmax; ++c) {
      const double dr = r - r0;
      const double dc = c - c0;
      img(r, c) += amplitude * std::exp(-(dr * dr + dc * dc) * inv);
    }
  }
}

void add_sky(Patch& img, const SceneConfig& cfg, Rng& rng) {
  const double s = cfg.clutter_strength;
  const double h = img.rows();
  const double w = img.cols();
  const double gr = rng.uniform(-1.0, 1.0) * s;
  const double gc = rng.uniform(-1.0, 1.0) * s;
  const double qr = rng.uniform(-0.5, 0.5) * s;
  const double qc = rng.uniform(-0.5, 0.5) * s;
  for (int r = 0; r < img.rows(); ++r) {
    const double y = r / h - 0.5;
    for (int c = 0; c < img.cols(); ++c) {
      const double x = c / w - 0.5;
      img(r, c) += gr * y + gc * x + qr * y * y * 4.0 + qc * x * x * 4.0;
    }
  }
  const int clouds = rng.between(6, 12);
  for (int k = 0; k < clouds; ++k) {
    add_gaussian_blob(img, rng.uniform(-20.0, h + 20.0), rng.uniform(-20.0, w + 20.0),
                      rng.uniform(6.0, 30.0), rng.uniform(-1.0, 1.0) * s);
  }
}

void add_terrain(Patch& img, const SceneConfig& cfg, Rng& rng) {
  const double s = cfg.clutter_strength;
  const int edges = rng.between(4, 8);
  for (int k = 0; k < edges; ++k) {
    const double pr = rng.uniform(0.0, img.rows());
    const double pc = rng.uniform(0.0, img.cols());
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double nr = std::sin(angle);
    const double nc = std::cos(angle);
    const double step = rng.uniform(-0.6, 0.6) * s;
    const double width = rng.uniform(0.6, 2.0);
    for (int r = 0; r < img.rows(); ++r) {
      for (int c = 0; c < img.cols(); ++c) {
        const double d = (r - pr) * nr + (c - pc) * nc;
        img(r, c) += step * 0.5 * (1.0 + std::tanh(d / width));
      }
    }
  }
  // rocks, buildings and other small structure
  const int features = rng.between(20, 50);
  for (int k = 0; k < features; ++k) {
    add_gaussian_blob(img, rng.uniform(0.0, img.rows()), rng.uniform(0.0, img.cols()),
                      rng.uniform(1.8, 5.0), rng.uniform(-0.5, 0.5) * s);
  }
}

void add_sea_glint(Patch& img, const SceneConfig& cfg, Rng& rng) {
  const double s = cfg.clutter_strength;
  const double wavelength = rng.uniform(12.0, 30.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double wobble = rng.uniform(20.0, 60.0);
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      img(r, c) += 0.12 * s *
                   std::sin(2.0 * std::numbers::pi * r / wavelength + phase + 0.8 * std::sin(c / wobble));
    }
  }
  // Glints are horizontal streaks of at least two pixels.
  const int glints = static_cast<int>(img.size() / 2000);
  for (int k = 0; k < glints; ++k) {
    const int r = rng.between(0, img.rows() - 1);
    const int c = rng.between(0, img.cols() - 5);
    const int len = rng.between(2, 4);
    const double amp = rng.uniform(0.3, 1.0) * s;
    for (int j = 0; j < len; ++j) img(r, c + j) += amp * (j == 0 || j == len - 1 ? 0.6 : 1.0);
  }
}

bool far_from(const std::vector<PixelPos>& points, int r, int c, int min_dist) {
  for (const PixelPos& p : points) {
    const int dr = p.row - r;
    const int dc = p.col - c;
    if (dr * dr + dc * dc <= min_dist * min_dist) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(ClutterKind kind) {
  switch (kind) {
    case ClutterKind::Sky: return "sky";
    case ClutterKind::Terrain: return "terrain";
    case ClutterKind::SeaGlint: return "sea-glint";
    case ClutterKind::Collimator: return "collimator";
  }
  return "?";
}

ClutterKind parse_clutter_kind(std::string_view text) {
  if (text == "sky") return ClutterKind::Sky;
  if (text == "terrain") return ClutterKind::Terrain;
  if (text == "sea-glint") return ClutterKind::SeaGlint;
  if (text == "collimator") return ClutterKind::Collimator;
  throw InvalidArgumentError("unknown clutter kind '" + std::string(text) + "'");
}

void SceneConfig::validate() const {
  if (width < 64 || height < 64) throw InvalidArgumentError("scene dimensions must be at least 64");
  if (!(psf_sigma > 0.0)) throw InvalidArgumentError("psf_sigma must be > 0");
  if (!(noise_sigma >= 0.0)) throw InvalidArgumentError("noise_sigma must be >= 0");
  if (!(clutter_strength >= 0.0)) throw InvalidArgumentError("clutter_strength must be >= 0");
  if (!(bad_pixel_rate >= 0.0 && bad_pixel_rate < 1.0)) {
    throw InvalidArgumentError("bad_pixel_rate must be in [0, 1)");
  }
  if (target_count < 0) throw InvalidArgumentError("target_count must be >= 0");
  if (!std::isfinite(target_amplitude) || !std::isfinite(base_level)) {
    throw InvalidArgumentError("non-finite scene level");
  }
}

Scene synth_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  Rng clutter_rng(cfg.clutter_seed.value_or(splitmix64(cfg.rng_seed ^ 0xC1077ull)));
  Scene scene;
  scene.image = Patch(cfg.height, cfg.width, cfg.base_level);
  Patch& img = scene.image;

  switch (cfg.clutter_kind) {
    case ClutterKind::Sky: add_sky(img, cfg, clutter_rng); break;
    case ClutterKind::Terrain: add_terrain(img, cfg, clutter_rng); break;
    case ClutterKind::SeaGlint: add_sea_glint(img, cfg, clutter_rng); break;
    case ClutterKind::Collimator: break;
  }

  // Targets: centers at least kTargetBorder from the borders, 20 px apart.
  constexpr int kMinSeparation = 20;
  for (int t = 0, attempts = 0; t < cfg.target_count && attempts < 10000; ++attempts) {
    const int r = rng.between(kTargetBorder, cfg.height - 1 - kTargetBorder);
    const int c = rng.between(kTargetBorder, cfg.width - 1 - kTargetBorder);
    if (!far_from(scene.truths, r, c, kMinSeparation)) continue;
    scene.truths.push_back({r, c});
    ++t;
  }
  for (const PixelPos& p : scene.truths) {
    const double jr = rng.uniform(-0.25, 0.25);
    const double jc = rng.uniform(-0.25, 0.25);
    add_gaussian_blob(img, p.row + jr, p.col + jc, cfg.psf_sigma, cfg.target_amplitude);
  }

  if (cfg.noise_sigma > 0.0) {
    for (double& v : img.values()) v += rng.normal(0.0, cfg.noise_sigma);
  }

  // Bad pixels: isolated outliers away from targets.
  const auto bad_count =
      static_cast<std::size_t>(std::llround(cfg.bad_pixel_rate * static_cast<double>(img.size())));
  const double swing = std::max(std::abs(cfg.target_amplitude), 10.0 * cfg.noise_sigma);
  for (std::size_t k = 0, attempts = 0; k < bad_count && attempts < 100 * bad_count + 100; ++attempts) {
    const int r = rng.between(0, cfg.height - 1);
    const int c = rng.between(0, cfg.width - 1);
    if (!far_from(scene.truths, r, c, kBadPixelExclusion)) continue;
    if (!far_from(scene.bad_pixels, r, c, 1)) continue;
    const bool hot = rng.uniform() < 0.7;
    const double delta = rng.uniform(2.0, 6.0) * swing;
    img(r, c) += hot ? delta : -delta;
    scene.bad_pixels.push_back({r, c});
    ++k;
  }

  for (double& v : img.values()) v = std::round(std::clamp(v, 0.0, 65535.0));
  return scene;
}

Patch LabeledSample::core() const {
  std::vector<double> v;
  v.reserve(kCoreSize * kCoreSize);
  for (int r = 0; r < kCoreSize; ++r) {
    for (int c = 0; c < kCoreSize; ++c) {
      v.push_back(context[static_cast<std::size_t>(r + kShiftMargin) * kContextSize + c + kShiftMargin]);
    }
  }
  return Patch(kCoreSize, kCoreSize, std::move(v));
}

Patch LabeledSample::context_patch() const {
  return Patch(kContextSize, kContextSize, std::vector<double>(context.begin(), context.end()));
}

namespace {

LabeledSample sample_from(const Patch& img, int r0, int c0, int label) {
  LabeledSample s;
  s.label = label;
  s.context.reserve(kContextSize * kContextSize);
  for (int r = 0; r < kContextSize; ++r) {
    for (int c = 0; c < kContextSize; ++c) s.context.push_back(static_cast<float>(img(r0 + r, c0 + c)));
  }
  return s;
}

}  // namespace

std::vector<LabeledSample> extract_samples(const Scene& scene) {
  const Patch& img = scene.image;
  constexpr int half = kContextSize / 2;
  std::vector<LabeledSample> out;
  for (const PixelPos& t : scene.truths) {
    if (t.row < half || t.col < half || t.row + half >= img.rows() || t.col + half >= img.cols()) {
      throw InvalidArgumentError("target too close to the border for a full context");
    }
    out.push_back(sample_from(img, t.row - half, t.col - half, +1));
  }
  constexpr int core_half = kCoreSize / 2;
  for (int r0 = kShiftMargin; r0 + kCoreSize + kShiftMargin <= img.rows(); r0 += kCoreSize) {
    for (int c0 = kShiftMargin; c0 + kCoreSize + kShiftMargin <= img.cols(); c0 += kCoreSize) {
      bool near_truth = false;
      for (const PixelPos& t : scene.truths) {
        const bool rows_overlap = t.row - core_half <= r0 + kCoreSize - 1 && t.row + core_half >= r0;
        const bool cols_overlap = t.col - core_half <= c0 + kCoreSize - 1 && t.col + core_half >= c0;
        if (rows_overlap && cols_overlap) {
          near_truth = true;
          break;
        }
      }
      if (!near_truth) out.push_back(sample_from(img, r0 - kShiftMargin, c0 - kShiftMargin, -1));
    }
  }
  return out;
}

std::vector<float> rotate_square(std::span<const float> grid, int side, int quarter_turns) {
  if (grid.size() != static_cast<std::size_t>(side) * side) throw SizeMismatchError("rotate_square size");
  std::vector<float> cur(grid.begin(), grid.end());
  std::vector<float> next(cur.size());
  const int turns = ((quarter_turns % 4) + 4) % 4;
  for (int t = 0; t < turns; ++t) {
    // counter-clockwise: out(i, j) = in(j, side - 1 - i)
    for (int i = 0; i < side; ++i) {
      for (int j = 0; j < side; ++j) {
        next[static_cast<std::size_t>(i) * side + j] = cur[static_cast<std::size_t>(j) * side + (side - 1 - i)];
      }
    }
    cur.swap(next);
  }
  return cur;
}

std::vector<float> shifted_core(std::span<const float> context, int dy, int dx) {
  if (context.size() != static_cast<std::size_t>(kContextSize) * kContextSize) {
    throw SizeMismatchError("shifted_core needs a full context");
  }
  if (std::abs(dy) > kShiftMargin || std::abs(dx) > kShiftMargin) {
    throw InvalidArgumentError("shift exceeds the context margin");
  }
  std::vector<float> core;
  core.reserve(kCoreSize * kCoreSize);
  for (int r = 0; r < kCoreSize; ++r) {
    for (int c = 0; c < kCoreSize; ++c) {
      core.push_back(context[static_cast<std::size_t>(r + kShiftMargin + dy) * kContextSize +
                             (c + kShiftMargin + dx)]);
    }
  }
  return core;
}

namespace {

constexpr int kShifts[4] = {-2, -1, 1, 2};

LabeledSample embed_core(const std::vector<float>& core, int label) {
  LabeledSample s;
  s.label = label;
  s.margin_valid = false;
  s.context.assign(static_cast<std::size_t>(kContextSize) * kContextSize, 0.0f);
  for (int r = 0; r < kCoreSize; ++r) {
    for (int c = 0; c < kCoreSize; ++c) {
      s.context[static_cast<std::size_t>(r + kShiftMargin) * kContextSize + c + kShiftMargin] =
          core[static_cast<std::size_t>(r) * kCoreSize + c];
    }
  }
  return s;
}

void check_context(const LabeledSample& s) {
  if (s.context.size() != static_cast<std::size_t>(kContextSize) * kContextSize) {
    throw SizeMismatchError("sample context has the wrong size");
  }
}

}  // namespace

std::vector<LabeledSample> augment_positive(const LabeledSample& sample) {
  if (sample.label != 1) throw InvalidArgumentError("augment_positive called on a negative sample");
  check_context(sample);
  if (!sample.margin_valid) throw InvalidArgumentError("positive augmentation needs a valid margin");
  std::vector<LabeledSample> out;
  out.reserve(kPositiveAugmentation);
  for (int rot = 0; rot < 4; ++rot) {
    const std::vector<float> rotated = rotate_square(sample.context, kContextSize, rot);
    for (int dy : kShifts) {
      for (int dx : kShifts) out.push_back(embed_core(shifted_core(rotated, dy, dx), 1));
    }
  }
  return out;
}

std::vector<LabeledSample> augment_negative(const LabeledSample& sample) {
  if (sample.label != -1) throw InvalidArgumentError("augment_negative called on a positive sample");
  check_context(sample);
  std::vector<LabeledSample> out;
  out.reserve(kNegativeAugmentation);
  for (int rot = 0; rot < 4; ++rot) {
    LabeledSample s = sample;
    s.context = rotate_square(sample.context, kContextSize, rot);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

float dot_f(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace

std::vector<std::size_t> farthest_point_indices(std::span<const LabeledSample> samples,
                                                std::size_t budget, std::uint64_t seed) {
  const std::size_t count = samples.size();
  if (count == 0) throw InvalidArgumentError("cannot subsample an empty set");
  if (budget > count) throw InvalidArgumentError("subsample budget exceeds the number of samples");
  std::vector<std::size_t> chosen;
  if (budget == count) {
    chosen.resize(count);
    for (std::size_t i = 0; i < count; ++i) chosen[i] = i;
    return chosen;
  }
  if (budget == 0) return chosen;

  constexpr std::size_t dim = static_cast<std::size_t>(kCoreSize) * kCoreSize;
  std::vector<float> unit(count * dim, 0.0f);
  std::vector<std::uint8_t> flat(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    try {
      const Patch n = normalize_std(samples[i].core());
      for (std::size_t k = 0; k < dim; ++k) unit[i * dim + k] = static_cast<float>(n[k]);
    } catch (const DegeneratePatchError&) {
      flat[i] = 1;
    }
  }

  std::vector<float> min_dist(count, std::numeric_limits<float>::infinity());
  std::vector<std::uint8_t> taken(count, 0);
  Rng rng(seed);
  std::size_t current = static_cast<std::size_t>(rng.below(count));
  for (std::size_t step = 0; step < budget; ++step) {
    taken[current] = 1;
    chosen.push_back(current);
    if (step + 1 == budget) break;
    const float* cu = &unit[current * dim];
    std::size_t best = count;
    float best_d = -1.0f;
    for (std::size_t i = 0; i < count; ++i) {
      if (taken[i]) continue;
      float d;
      if (flat[current] || flat[i]) {
        d = (flat[current] && flat[i]) ? 0.0f : 1.0f;
      } else {
        d = 1.0f - dot_f(cu, &unit[i * dim], dim);
      }
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_d) {
        best_d = min_dist[i];
        best = i;
      }
    }
    current = best;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<LabeledSample> subsample_negatives(std::span<const LabeledSample> negatives,
                                               std::size_t budget, std::uint64_t seed) {
  std::vector<LabeledSample> out;
  for (std::size_t i : farthest_point_indices(negatives, budget, seed)) out.push_back(negatives[i]);
  return out;
}

namespace {

constexpr char kMagic[4] = {'N', 'C', 'C', 'D'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string data) : data_(std::move(data)) {}

  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) throw FormatError(std::string("dataset file truncated in ") + what);
  }
  std::uint8_t u8() {
    need(1, "record");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint64_t le(int bytes, const char* what) {
    need(static_cast<std::size_t>(bytes), what);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  const char* raw(std::size_t n, const char* what) {
    need(n, what);
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_dataset(std::span<const LabeledSample> samples, const std::filesystem::path& path) {
  if (samples.empty()) throw InvalidArgumentError("refusing to write an empty dataset");
  std::string buf(kMagic, 4);
  put_u16(buf, kVersion);
  put_u16(buf, kCoreSize);
  put_u16(buf, kContextSize);
  put_u64(buf, samples.size());
  for (const LabeledSample& s : samples) {
    check_context(s);
    if (s.label != 1 && s.label != -1) throw InvalidArgumentError("sample label must be +1 or -1");
    buf.push_back(static_cast<char>(static_cast<std::int8_t>(s.label)));
    buf.push_back(static_cast<char>(s.margin_valid ? 1 : 0));
    for (float v : s.context) put_u32(buf, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<LabeledSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader rd(std::move(data));
  const char* magic = rd.raw(4, "header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a dataset file (bad magic)");
  const auto version = rd.le(2, "header");
  if (version != kVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto core = rd.le(2, "header");
  const auto ctx = rd.le(2, "header");
  if (core != kCoreSize || ctx != kContextSize) throw FormatError("unsupported patch geometry in dataset header");
  const std::uint64_t count = rd.le(8, "header");
  const std::size_t record = 2 + 4 * static_cast<std::size_t>(ctx * ctx);
  if (count > rd.remaining() / record) throw FormatError("dataset file truncated: fewer records than declared");
  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    LabeledSample s;
    s.label = static_cast<std::int8_t>(rd.u8());
    if (s.label != 1 && s.label != -1) throw FormatError("dataset record has an invalid label");
    const std::uint8_t flags = rd.u8();
    s.margin_valid = (flags & 1u) != 0;
    s.context.resize(static_cast<std::size_t>(ctx * ctx));
    for (float& v : s.context) v = std::bit_cast<float>(static_cast<std::uint32_t>(rd.le(4, "record")));
    out.push_back(std::move(s));
  }
  if (rd.remaining() != 0) throw FormatError("dataset file has trailing bytes");
  return out;
}

AugmentedSet::AugmentedSet(std::vector<LabeledSample> base) : base_(std::move(base)) {
  offsets_.reserve(base_.size() + 1);
  offsets_.push_back(0);
  for (const LabeledSample& s : base_) {
    check_context(s);
    if (s.label == 1 && !s.margin_valid) throw InvalidArgumentError("positive sample without margin");
    offsets_.push_back(offsets_.back() + (s.label == 1 ? kPositiveAugmentation : kNegativeAugmentation));
  }
}

std::size_t AugmentedSet::locate(std::size_t index) const {
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  return static_cast<std::size_t>(it - offsets_.begin()) - 1;
}

int AugmentedSet::label(std::size_t index) const { return base_[locate(index)].label; }

Patch AugmentedSet::patch(std::size_t index) const {
  const std::size_t b = locate(index);
  const LabeledSample& s = base_[b];
  const std::size_t k = index - offsets_[b];
  std::vector<float> core;
  if (s.label == 1) {
    const int rot = static_cast<int>(k / 16);
    const int dy = kShifts[(k % 16) / 4];
    const int dx = kShifts[k % 4];
    core = shifted_core(rotate_square(s.context, kContextSize, rot), dy, dx);
  } else {
    core = shifted_core(rotate_square(s.context, kContextSize, static_cast<int>(k)), 0, 0);
  }
  return Patch(kCoreSize, kCoreSize, std::vector<double>(core.begin(), core.end()));
}

std::vector<Scene> synth_scene_set(const SceneSetConfig& config) {
  if (config.frames < 0) throw InvalidArgumentError("frame count must be >= 0");
  if (config.frames_per_scene < 1) throw InvalidArgumentError("frames_per_scene must be >= 1");
  if (config.kinds.empty()) throw InvalidArgumentError("scene set needs at least one clutter kind");
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(config.frames));
  for (int i = 0; i < config.frames; ++i) {
    const auto scene_index = static_cast<std::uint64_t>(i / config.frames_per_scene);
    const std::uint64_t scene_seed = splitmix64(config.seed * 0x100000001B3ull + scene_index);
    const std::uint64_t frame_seed = splitmix64(scene_seed ^ splitmix64(static_cast<std::uint64_t>(i)));
    Rng jitter(scene_seed ^ 0xA5A5A5A5A5A5A5A5ull);
    SceneConfig sc;
    sc.width = config.width;
    sc.height = config.height;
    sc.clutter_kind = config.kinds[scene_index % config.kinds.size()];
    sc.target_count = config.targets_per_frame;
    // Scene-to-scene changes in dynamic range and signal levels.
    sc.base_level = jitter.uniform(800.0, 9000.0);
    const double gain = jitter.uniform(0.6, 1.6);
    sc.clutter_strength = config.clutter_strength * gain;
    sc.noise_sigma = config.noise_sigma * gain;
    sc.target_amplitude = config.target_amplitude * gain * jitter.uniform(0.7, 1.3);
    sc.psf_sigma = config.psf_sigma * jitter.uniform(0.8, 1.2);
    sc.bad_pixel_rate = config.bad_pixel_rate;
    sc.rng_seed = frame_seed;
    sc.clutter_seed = scene_seed;
    scenes.push_back(synth_scene(sc));
  }
  return scenes;
}

std::size_t balanced_negative_budget(std::size_t positives, double positive_fraction) {
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    throw InvalidArgumentError("positive_fraction must be in (0, 1)");
  }
  const double pos_aug = static_cast<double>(positives) * kPositiveAugmentation;
  const double neg_aug = pos_aug * (1.0 - positive_fraction) / positive_fraction;
  return static_cast<std::size_t>(std::llround(neg_aug / kNegativeAugmentation));
}

BuiltDataset build_dataset(const DatasetBuildConfig& config) {
  BuiltDataset out;
  std::vector<LabeledSample> pool;
  for (const Scene& scene : synth_scene_set(config.scenes)) {
    for (LabeledSample& s : extract_samples(scene)) {
      (s.label == 1 ? out.positives : pool).push_back(std::move(s));
    }
  }
  out.negative_pool = pool.size();
  std::size_t budget = config.negative_budget;
  if (config.positive_fraction > 0.0) {
    budget = balanced_negative_budget(out.positives.size(), config.positive_fraction);
  }
  budget = std::min(budget, pool.size());
  if (!pool.empty()) out.negatives = subsample_negatives(pool, budget, config.subsample_seed);
  return out;
}

SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw InvalidArgumentError("train fraction must be in [0, 1]");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.heldout.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.heldout.begin(), s.heldout.end());
  return s;
}

}  // namespace irncc
