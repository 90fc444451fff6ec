#pragma once

// Synthetic infrared scenes and the patch dataset built from them: clutter
// backgrounds, PSF point targets, detector noise, isolated bad pixels, patch
// extraction with a shift margin, rotation/shift augmentation and
// correlation-distance subsampling of negatives.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "irncc/nccnet.hpp"
#include "irncc/patch.hpp"

namespace irncc {

enum class ClutterKind { Sky, Terrain, SeaGlint, Collimator };

std::string_view to_string(ClutterKind kind);
ClutterKind parse_clutter_kind(std::string_view text);

struct SceneConfig {
  int width = 256;
  int height = 256;
  ClutterKind clutter_kind = ClutterKind::Sky;
  double clutter_strength = 60.0;  ///< counts
  int target_count = 4;
  double target_amplitude = 40.0;  ///< PSF peak above local background, counts
  double psf_sigma = 1.0;          ///< pixels
  double noise_sigma = 4.0;        ///< counts
  double bad_pixel_rate = 1e-4;    ///< fraction of pixels, in [0, 1)
  double base_level = 2000.0;      ///< mean background level, counts
  std::uint64_t rng_seed = 0;      ///< targets, noise and bad pixels
  /// Background clutter seed; derived from rng_seed when empty.
  std::optional<std::uint64_t> clutter_seed;

  void validate() const;
};

struct PixelPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

/// Truth and bad-pixel positions are kept apart by more than kBadPixelExclusion.
inline constexpr int kBadPixelExclusion = 3;
/// Minimum distance of a target center from any frame border.
inline constexpr int kTargetBorder = 9;

struct Scene {
  Patch image;  ///< integer-valued detector counts in [0, 65535]
  std::vector<PixelPos> truths;
  std::vector<PixelPos> bad_pixels;
};

Scene synth_scene(const SceneConfig& config);

inline constexpr int kCoreSize = 15;
inline constexpr int kShiftMargin = 2;
inline constexpr int kContextSize = kCoreSize + 2 * kShiftMargin;

/// A labelled 15x15 core inside a 19x19 context. When margin_valid is false
/// the margin is zero-filled and only the core is meaningful.
struct LabeledSample {
  int label = -1;
  bool margin_valid = true;
  std::vector<float> context;  ///< kContextSize^2, row-major

  Patch core() const;
  Patch context_patch() const;
  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

/// One positive per truth (context centered on it) and non-overlapping
/// negative cores tiling the rest of the frame.
std::vector<LabeledSample> extract_samples(const Scene& scene);

/// Counter-clockwise rotation of a square grid by quarter_turns * 90 degrees.
std::vector<float> rotate_square(std::span<const float> grid, int side, int quarter_turns);
/// Core seen through the context shifted by (dy, dx) in {-2..2}; the content
/// moves by (-dy, -dx).
std::vector<float> shifted_core(std::span<const float> context, int dy, int dx);

/// 4 rotations x 16 shifts (dy, dx in {-2, -1, 1, 2}) = 64 samples.
std::vector<LabeledSample> augment_positive(const LabeledSample& sample);
/// The sample and its 3 rotations.
std::vector<LabeledSample> augment_negative(const LabeledSample& sample);

inline constexpr int kPositiveAugmentation = 64;
inline constexpr int kNegativeAugmentation = 4;

/// Greedy farthest-point selection under d(a, b) = 1 - ncc(a, b) on the
/// cores. Flat cores act as one point (distance 0 among themselves, 1 to
/// everything else). Returns indices in ascending order.
std::vector<std::size_t> farthest_point_indices(std::span<const LabeledSample> samples,
                                                std::size_t budget, std::uint64_t seed);
std::vector<LabeledSample> subsample_negatives(std::span<const LabeledSample> negatives,
                                               std::size_t budget, std::uint64_t seed);

/// Binary dataset file, little-endian: "NCCD", u16 version (1), u16 core size,
/// u16 context size, u64 count, then per record i8 label, u8 flags
/// (bit0 = margin valid) and context_size^2 float32 values.
void write_dataset(std::span<const LabeledSample> samples, const std::filesystem::path& path);
std::vector<LabeledSample> read_dataset(const std::filesystem::path& path);

/// Lazily augmented view: positives expand to 64 samples, negatives to 4.
class AugmentedSet final : public TrainingData {
 public:
  explicit AugmentedSet(std::vector<LabeledSample> base);

  std::size_t size() const override { return offsets_.back(); }
  int label(std::size_t index) const override;
  Patch patch(std::size_t index) const override;

 private:
  std::size_t locate(std::size_t index) const;
  std::vector<LabeledSample> base_;
  std::vector<std::size_t> offsets_;
};

/// Cores of the samples without augmentation.
class CoreSet final : public TrainingData {
 public:
  explicit CoreSet(std::vector<LabeledSample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  int label(std::size_t index) const override { return samples_[index].label; }
  Patch patch(std::size_t index) const override { return samples_[index].core(); }

 private:
  std::vector<LabeledSample> samples_;
};

/// Seeded scene mixture for building a training set or a benchmark.
struct SceneSetConfig {
  int frames = 100;
  /// Consecutive frames sharing one background (kind, levels and clutter).
  int frames_per_scene = 1;
  int width = 256;
  int height = 256;
  int targets_per_frame = 20;
  std::vector<ClutterKind> kinds = {ClutterKind::Sky, ClutterKind::Terrain, ClutterKind::SeaGlint,
                                    ClutterKind::Collimator};
  double target_amplitude = 40.0;
  double noise_sigma = 4.0;
  double psf_sigma = 1.0;
  double clutter_strength = 60.0;
  double bad_pixel_rate = 2e-4;
  std::uint64_t seed = 1;
};

/// Frame i belongs to scene s = i / frames_per_scene, which uses
/// kinds[s % kinds.size()] with per-scene jitter of level, clutter strength,
/// target amplitude and PSF width. Targets, noise and bad pixels are drawn per
/// frame.
std::vector<Scene> synth_scene_set(const SceneSetConfig& config);

struct DatasetBuildConfig {
  SceneSetConfig scenes;
  /// Negatives kept after subsampling; ignored when positive_fraction > 0.
  std::size_t negative_budget = 8000;
  /// If > 0, the budget is chosen so that after augmentation positives make up
  /// this fraction of all samples (0.394 mirrors a 260k:400k split).
  double positive_fraction = 0.0;
  std::uint64_t subsample_seed = 7;
};

struct BuiltDataset {
  std::vector<LabeledSample> positives;  ///< pre-augmentation
  std::vector<LabeledSample> negatives;  ///< subsampled, pre-augmentation
  std::size_t negative_pool = 0;
};

BuiltDataset build_dataset(const DatasetBuildConfig& config);

/// Negative budget giving the requested positive fraction after augmentation.
std::size_t balanced_negative_budget(std::size_t positives, double positive_fraction);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
};

/// Seeded split of n items with round(train_fraction * n) in the train part.
SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace irncc
