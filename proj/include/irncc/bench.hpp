#pragma once

// Full-frame detection and ROC benchmarking: window scorers for every method
// of the comparison grid, non-maximum suppression, one-to-one matching of
// declarations to truths, ROC/AUC and the CSV artifacts of a benchmark run.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "irncc/filterbank.hpp"
#include "irncc/irdatagen.hpp"
#include "irncc/nccnet.hpp"
#include "irncc/patch.hpp"

namespace irncc {

struct Detection {
  int row = 0;
  int col = 0;
  double score = 0.0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Scores every valid window of a frame. Entry (r, c) of the map belongs to
/// the window with top-left corner (r, c), i.e. frame pixel
/// (r + window/2, c + window/2). Degenerate windows score 0.
class WindowScorer {
 public:
  virtual ~WindowScorer() = default;
  virtual const std::string& name() const = 0;
  virtual int window() const = 0;
  virtual ResponseMap score_map(const Patch& frame) const = 0;
};

/// Ideal or fixed filter: STD filters use float NCC on the (dequantized)
/// taps, fixed MAD filters the integer scorer, ideal MAD filters float MAD-NCC.
std::unique_ptr<WindowScorer> make_filter_scorer(FilterSpec filter);
/// forward(net, window) at every window.
std::unique_ptr<WindowScorer> make_network_scorer(NccNetwork net, std::string name);
/// |p_center - mean| / mad over the centered window.
std::unique_ptr<WindowScorer> make_mad_ratio_scorer(int window = kCoreSize);

/// Built-in method names (hat*, gauss-*, mad-ratio).
std::vector<std::string> builtin_methods();
/// The comparison grid used by `bench` when no methods are given.
std::vector<std::string> default_bench_methods();
/// Resolves a built-in name or one of `filter:<path>`, `filter-mad:<path>`,
/// `qfilter:<path>`, `net:<path>`. Hat methods use `hat`.
std::unique_ptr<WindowScorer> resolve_method(std::string_view method, const HatParams& hat = {});

/// Hat variants: `hat<size>-ideal[-mad]`, `hat<size>-fixed[-mad]`, all cut from
/// the 15x15 filter; fixed taps are Q(8,7) with a power-of-two prescale.
FilterSpec hat_variant(int size, bool fixed, NormMode deviation, const HatParams& hat);

inline constexpr int kDefaultNmsRadius = 7;
inline constexpr double kDefaultMatchRadius = 2.0;
/// Declarations closer than this to a frame edge are dropped, so every window
/// size up to 15 is evaluated over the same region.
inline constexpr int kEvalBorder = 7;

/// Greedy NMS over the whole response map: repeatedly keep the best remaining
/// window and suppress everything within nms_radius (Euclidean). Survivors are
/// returned by descending score; ties go to the smaller (row, col). Because
/// suppressors always outscore what they suppress, the survivors above any
/// threshold equal the NMS result of the thresholded map.
std::vector<Detection> nms_candidates(const ResponseMap& map, int window, int frame_rows, int frame_cols,
                                      int nms_radius = kDefaultNmsRadius, int border = kEvalBorder);

std::vector<Detection> sliding_detect(const Patch& frame, const WindowScorer& scorer, double threshold,
                                      int nms_radius = kDefaultNmsRadius);

struct FrameMatch {
  int true_positives = 0;
  int false_negatives = 0;
  int false_alarms = 0;
};

struct MatchResult {
  int true_positives = 0;
  int false_negatives = 0;
  int false_alarms = 0;
  std::vector<FrameMatch> frames;

  void add(const FrameMatch& m);
};

/// Greedy one-to-one matching by ascending distance (ties by detection index,
/// then truth index); pairs farther than match_radius never match.
FrameMatch match_frame(const std::vector<Detection>& dets, const std::vector<PixelPos>& truths,
                       double match_radius = kDefaultMatchRadius);
MatchResult match_detections(const std::vector<std::vector<Detection>>& dets,
                             const std::vector<std::vector<PixelPos>>& truths,
                             double match_radius = kDefaultMatchRadius);

struct RocPoint {
  double threshold = 0.0;
  double hit_rate = 0.0;
  double fa_per_frame = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  ///< strictly decreasing thresholds
  double auc = 0.0;
};

/// Candidates (NMS survivors) and truths of one frame.
struct ScoredFrame {
  std::vector<Detection> candidates;
  std::vector<PixelPos> truths;
};

inline constexpr int kRocThresholds = 512;

/// Thresholds evenly spaced from the largest candidate score down to the
/// smallest; the last one is nudged just below the smallest so every candidate
/// is declared. A detection is declared when score > threshold. AUC is the
/// trapezoid area under hit rate versus FA/frame divided by the largest
/// FA/frame; with no false alarms at all it is the largest hit rate.
RocCurve roc_curve(const std::vector<ScoredFrame>& frames, int threshold_count = kRocThresholds,
                   double match_radius = kDefaultMatchRadius);
std::vector<double> roc_thresholds(const std::vector<ScoredFrame>& frames, int threshold_count);
double roc_auc(const std::vector<RocPoint>& points);

/// Benchmark frames on disk: frames/frame_XXXX.pgm (16-bit binary PGM) and
/// truths.csv with header `frame,row,col`.
struct BenchFrames {
  std::vector<Patch> frames;
  std::vector<std::vector<PixelPos>> truths;
};

void write_pgm16(const std::filesystem::path& path, const Patch& frame);
Patch read_pgm16(const std::filesystem::path& path);
void write_bench_frames(const std::filesystem::path& dir, const std::vector<Scene>& scenes);
BenchFrames read_bench_frames(const std::filesystem::path& dir);
/// Number of consecutive frame_XXXX.pgm files under dir/frames.
std::size_t count_bench_frames(const std::filesystem::path& dir);
std::vector<std::vector<PixelPos>> read_truths_csv(const std::filesystem::path& path, std::size_t frame_count);

struct BenchConfig {
  int nms_radius = kDefaultNmsRadius;
  double match_radius = kDefaultMatchRadius;
  int threshold_count = kRocThresholds;
  bool timing = true;  ///< false writes ms_per_frame = 0 for reproducible CSVs
};

struct MethodResult {
  std::string method;
  RocCurve roc;
  double ms_per_frame = 0.0;
  double min_score = 0.0;  ///< over all candidates
  double max_score = 0.0;
  std::vector<ScoredFrame> scored;
};

struct BenchReport {
  std::vector<MethodResult> methods;
  const MethodResult& at(std::string_view method) const;
};

BenchReport run_benchmark(const BenchFrames& data, const std::vector<std::string>& methods,
                          const BenchConfig& config = {}, const HatParams& hat = {});

/// `method,threshold,hit_rate,fa_per_frame`
void write_roc_csv(std::ostream& out, const BenchReport& report);
/// `method,auc,ms_per_frame`
void write_auc_csv(std::ostream& out, const BenchReport& report);
/// `method,min_score,max_score`
void write_score_range_csv(std::ostream& out, const BenchReport& report);
/// `method,frame,row,col,score`, one line per candidate.
void write_scores_csv(std::ostream& out, const BenchReport& report);
/// Rebuilds per-method candidates from a scores CSV; `truths` supplies the
/// frames (and frame count).
BenchReport read_scores_csv(std::istream& in, const std::vector<std::vector<PixelPos>>& truths,
                            const BenchConfig& config = {});

/// `row,col,score`
void write_detections_csv(std::ostream& out, const std::vector<Detection>& dets);

/// Hat parameters as `key value` lines.
void write_hat_params(std::ostream& out, const HatFit& fit);
HatParams read_hat_params(std::istream& in);

}  // namespace irncc
