#pragma once

// Two-layer NCC network: N <= 4 correlation filters, a ReLU per filter, and a
// 1x1xN decision layer whose weighted sum is the scalar targetness measure.
// Trained with L1 loss against +1/-1 labels and SGD with momentum.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "irncc/patch.hpp"
#include "irncc/patchmath.hpp"

namespace irncc {

inline constexpr int kMaxFilters = 4;

struct TrainConfig {
  double learning_rate = 0.001;  ///< initial rate
  /// Per-epoch multiplicative schedule: epoch e (1-based) uses
  /// learning_rate * lr_decay^(e - 1). The default takes 1e-3 down to 1e-5
  /// over five epochs; 1 keeps the rate constant.
  double lr_decay = 0.31622776601683794;
  double momentum = 0.95;
  double weight_decay = 0.0005;
  int batch_size = 40;
  int max_epochs = 5;
  std::uint64_t rng_seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct NccNetwork {
  NormMode norm_mode = NormMode::Std;
  std::vector<Patch> filters;   ///< raw taps; normalized functionally at use
  std::vector<double> weights;  ///< decision layer, one per filter
  /// Configuration of the run that produced the filters, if any.
  std::optional<TrainConfig> train_config;

  int filter_count() const noexcept { return static_cast<int>(filters.size()); }
  int filter_size() const noexcept { return filters.empty() ? 0 : filters.front().rows(); }
  /// Throws InvalidArgumentError unless 1 <= N <= 4, filters square, odd and equal.
  void validate() const;

  friend bool operator==(const NccNetwork&, const NccNetwork&) = default;
};

struct GradientSet {
  std::vector<Patch> filter_grads;
  std::vector<double> weight_grads;

  static GradientSet zeros_like(const NccNetwork& net);
};

inline double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

/// |output - label|; label must be +1 or -1.
double l1_loss(double output, double label);

/// Per-filter correlation scores (before ReLU) of patch p.
std::vector<double> filter_scores(const NccNetwork& net, const Patch& p);

/// sum_k w_k * relu(score_k). Throws DegeneratePatchError on flat p.
double forward(const NccNetwork& net, const Patch& p);

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
};

/// Exact gradients of l1_loss(forward(net, p), label) with respect to every
/// filter tap and decision weight. Subgradients: relu'(0) = 0, |x|'(0) = 0,
/// and sign(0) = 0 on the MAD kink.
BackwardResult backward(const NccNetwork& net, const Patch& p, double label);

/// Classical momentum with additive L2 decay:
///   v <- momentum * v - lr * (grad + decay * param);  param <- param + v
void sgd_step(NccNetwork& net, const GradientSet& grads, const TrainConfig& config,
              GradientSet& velocity);

/// Filter taps i.i.d. uniform in [-0.05, 0.05], decision weights 1/N.
NccNetwork init_network(int filter_count, int filter_size, NormMode mode, std::uint64_t seed);

/// Cosine similarity of the mean-centered, flattened filters.
double filter_similarity(const Patch& a, const Patch& b);

/// Indexed source of labelled patches for training and evaluation.
class TrainingData {
 public:
  virtual ~TrainingData() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t index) const = 0;
  virtual Patch patch(std::size_t index) const = 0;
};

/// Materialized patches with labels.
class PatchSet final : public TrainingData {
 public:
  PatchSet() = default;
  void add(Patch patch, int label);

  std::size_t size() const override { return patches_.size(); }
  int label(std::size_t index) const override { return labels_[index]; }
  Patch patch(std::size_t index) const override { return patches_[index]; }

 private:
  std::vector<Patch> patches_;
  std::vector<int> labels_;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  /// Largest ||f_new - f_old|| / ||f_old|| over filters, measured on the
  /// normalized filters (raw filters in NormMode::None).
  double filter_change = 0.0;
  double heldout_accuracy = std::numeric_limits<double>::quiet_NaN();
  /// Mean of the per-class accuracies on the held-out set.
  double heldout_balanced_accuracy = std::numeric_limits<double>::quiet_NaN();
  /// Output threshold calibrated on the training data after the epoch.
  double decision_threshold = std::numeric_limits<double>::quiet_NaN();
  std::size_t skipped_degenerate = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  NccNetwork net;
  TrainHistory history;
};

/// Seeded mini-batch training for config.max_epochs epochs. Gradients are
/// averaged within each batch; flat patches are skipped and counted. With a
/// held-out set, each epoch calibrates the decision threshold on `data` and
/// reports held-out accuracy at that threshold.
TrainResult train(NccNetwork net, const TrainingData& data, const TrainConfig& config,
                  const TrainingData* heldout = nullptr);

struct Accuracy {
  double accuracy = 0.0;
  double balanced = 0.0;
};

/// Network output for every sample; flat patches score 0.
std::vector<double> network_outputs(const NccNetwork& net, const TrainingData& data);

/// Predicts positive iff output > threshold.
Accuracy evaluate_accuracy(const NccNetwork& net, const TrainingData& data, double threshold = 0.0);
Accuracy accuracy_at(std::span<const double> outputs, std::span<const int> labels, double threshold);

/// Threshold maximizing accuracy on the given outputs: a midpoint between
/// consecutive distinct outputs (or just below the smallest). Ties go to the
/// lowest threshold.
double calibrate_threshold(std::span<const double> outputs, std::span<const int> labels);
double calibrate_threshold(const NccNetwork& net, const TrainingData& data);

/// Self-describing text format; see README for the grammar.
void write_network(std::ostream& out, const NccNetwork& net);
NccNetwork read_network(std::istream& in);
void save_network(const std::filesystem::path& path, const NccNetwork& net);
NccNetwork load_network(const std::filesystem::path& path);

}  // namespace irncc
