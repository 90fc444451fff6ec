#include "irncc/nccnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "irncc/error.hpp"
#include "irncc/rng.hpp"

namespace irncc {

namespace {

std::vector<Patch> normalized_filters(const NccNetwork& net) {
  std::vector<Patch> out;
  out.reserve(net.filters.size());
  for (const Patch& f : net.filters) out.push_back(normalize(f, net.norm_mode));
  return out;
}

double output_from_scores(const NccNetwork& net, std::span<const double> scores) {
  double out = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) out += net.weights[k] * relu(scores[k]);
  return out;
}

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgumentError("learning_rate must be a finite value >= 0");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgumentError("lr_decay must be in (0, 1]");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgumentError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidArgumentError("weight_decay must be >= 0");
  }
  if (batch_size < 1) throw InvalidArgumentError("batch_size must be >= 1");
  if (max_epochs < 0) throw InvalidArgumentError("max_epochs must be >= 0");
}

void NccNetwork::validate() const {
  if (filters.empty() || filters.size() > static_cast<std::size_t>(kMaxFilters)) {
    throw InvalidArgumentError("network needs between 1 and 4 filters, got " +
                               std::to_string(filters.size()));
  }
  if (weights.size() != filters.size()) {
    throw InvalidArgumentError("decision weight count differs from filter count");
  }
  const int side = filters.front().rows();
  for (const Patch& f : filters) {
    if (f.rows() != side || f.cols() != side) {
      throw InvalidArgumentError("filters must all be square and of equal size");
    }
  }
  if (side % 2 == 0) throw InvalidArgumentError("filter size must be odd");
  for (double w : weights) {
    if (!std::isfinite(w)) throw InvalidArgumentError("non-finite decision weight");
  }
}

GradientSet GradientSet::zeros_like(const NccNetwork& net) {
  GradientSet g;
  for (const Patch& f : net.filters) g.filter_grads.emplace_back(f.rows(), f.cols(), 0.0);
  g.weight_grads.assign(net.weights.size(), 0.0);
  return g;
}

double l1_loss(double output, double label) {
  if (label != 1.0 && label != -1.0) {
    throw InvalidArgumentError("label must be +1 or -1, got " + format_real(label));
  }
  return std::abs(output - label);
}

std::vector<double> filter_scores(const NccNetwork& net, const Patch& p) {
  const Patch pn = normalize(p, net.norm_mode);
  std::vector<double> scores;
  scores.reserve(net.filters.size());
  for (const Patch& f : net.filters) {
    if (!p.same_shape(f)) throw SizeMismatchError("patch and filter shapes differ");
    scores.push_back(dot(pn, normalize(f, net.norm_mode)));
  }
  return scores;
}

double forward(const NccNetwork& net, const Patch& p) {
  const std::vector<double> scores = filter_scores(net, p);
  return output_from_scores(net, scores);
}

BackwardResult backward(const NccNetwork& net, const Patch& p, double label) {
  const Patch pn = normalize(p, net.norm_mode);
  const std::vector<Patch> fn = normalized_filters(net);
  std::vector<double> scores;
  for (const Patch& f : fn) {
    if (!pn.same_shape(f)) throw SizeMismatchError("patch and filter shapes differ");
    scores.push_back(dot(pn, f));
  }
  const double out = output_from_scores(net, scores);

  BackwardResult result;
  result.loss = l1_loss(out, label);
  result.grads = GradientSet::zeros_like(net);
  const double d_out = sign_or_zero(out - label);
  for (std::size_t k = 0; k < fn.size(); ++k) {
    result.grads.weight_grads[k] = d_out * relu(scores[k]);
    const double d_score = scores[k] > 0.0 ? d_out * net.weights[k] : 0.0;
    if (d_score == 0.0) continue;
    // d score / d normalized filter = normalized patch
    std::vector<double> upstream(pn.values().begin(), pn.values().end());
    for (double& x : upstream) x *= d_score;
    const std::vector<double> g =
        backprop_normalization(upstream, net.filters[k], net.norm_mode, KinkPolicy::Subgradient);
    std::copy(g.begin(), g.end(), result.grads.filter_grads[k].values().begin());
  }
  return result;
}

void sgd_step(NccNetwork& net, const GradientSet& grads, const TrainConfig& config,
              GradientSet& velocity) {
  const double lr = config.learning_rate;
  const double m = config.momentum;
  const double decay = config.weight_decay;
  for (std::size_t k = 0; k < net.filters.size(); ++k) {
    auto param = net.filters[k].values();
    auto v = velocity.filter_grads[k].values();
    auto g = grads.filter_grads[k].values();
    for (std::size_t i = 0; i < param.size(); ++i) {
      v[i] = m * v[i] - lr * (g[i] + decay * param[i]);
      param[i] += v[i];
    }
    double& vw = velocity.weight_grads[k];
    vw = m * vw - lr * (grads.weight_grads[k] + decay * net.weights[k]);
    net.weights[k] += vw;
  }
}

NccNetwork init_network(int filter_count, int filter_size, NormMode mode, std::uint64_t seed) {
  if (filter_count < 1 || filter_count > kMaxFilters) {
    throw InvalidArgumentError("filter count must be in [1, 4], got " + std::to_string(filter_count));
  }
  if (filter_size < 1 || filter_size % 2 == 0) {
    throw InvalidArgumentError("filter size must be a positive odd number");
  }
  Rng rng(seed);
  NccNetwork net;
  net.norm_mode = mode;
  for (int k = 0; k < filter_count; ++k) {
    Patch f(filter_size, filter_size);
    for (double& x : f.values()) x = rng.uniform(-0.05, 0.05);
    net.filters.push_back(std::move(f));
  }
  net.weights.assign(filter_count, 1.0 / filter_count);
  return net;
}

double filter_similarity(const Patch& a, const Patch& b) {
  if (!a.same_shape(b)) throw SizeMismatchError("filter_similarity operands differ in shape");
  // Flat inputs raise DegeneratePatchError from the normalization.
  const double s = dot(normalize_std(a), normalize_std(b));
  return std::clamp(s, -1.0, 1.0);
}

void PatchSet::add(Patch patch, int label) {
  if (label != 1 && label != -1) throw InvalidArgumentError("label must be +1 or -1");
  patches_.push_back(std::move(patch));
  labels_.push_back(label);
}

std::vector<double> network_outputs(const NccNetwork& net, const TrainingData& data) {
  net.validate();
  const std::vector<Patch> fn = normalized_filters(net);
  std::vector<double> outputs(data.size(), 0.0);
  std::vector<double> scores(fn.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      const Patch pn = normalize(data.patch(i), net.norm_mode);
      for (std::size_t k = 0; k < fn.size(); ++k) scores[k] = dot(pn, fn[k]);
      outputs[i] = output_from_scores(net, scores);
    } catch (const DegeneratePatchError&) {
      outputs[i] = 0.0;
    }
  }
  return outputs;
}

namespace {

std::vector<int> labels_of(const TrainingData& data) {
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.label(i);
  return labels;
}

}  // namespace

Accuracy accuracy_at(std::span<const double> outputs, std::span<const int> labels, double threshold) {
  if (outputs.size() != labels.size()) throw SizeMismatchError("outputs and labels differ in length");
  std::size_t correct[2] = {0, 0};
  std::size_t total[2] = {0, 0};
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const int cls = labels[i] > 0 ? 1 : 0;
    ++total[cls];
    if ((outputs[i] > threshold) == (cls == 1)) ++correct[cls];
  }
  Accuracy acc;
  const std::size_t n = total[0] + total[1];
  if (n == 0) return acc;
  acc.accuracy = static_cast<double>(correct[0] + correct[1]) / static_cast<double>(n);
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < 2; ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++classes;
  }
  acc.balanced = sum / classes;
  return acc;
}

Accuracy evaluate_accuracy(const NccNetwork& net, const TrainingData& data, double threshold) {
  const std::vector<double> outputs = network_outputs(net, data);
  const std::vector<int> labels = labels_of(data);
  return accuracy_at(outputs, labels, threshold);
}

double calibrate_threshold(std::span<const double> outputs, std::span<const int> labels) {
  if (outputs.size() != labels.size()) throw SizeMismatchError("outputs and labels differ in length");
  if (outputs.empty()) throw InvalidArgumentError("cannot calibrate on an empty set");
  std::vector<std::size_t> order(outputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outputs[a] < outputs[b]; });
  // Threshold below everything: every sample predicted positive.
  std::ptrdiff_t correct = 0;
  for (int l : labels) correct += l > 0 ? 1 : 0;
  std::ptrdiff_t best = correct;
  double best_threshold = outputs[order.front()] - 1.0;
  for (std::size_t i = 0; i < order.size();) {
    const double v = outputs[order[i]];
    // Moving the threshold past v flips every sample with this output to negative.
    for (; i < order.size() && outputs[order[i]] == v; ++i) correct += labels[order[i]] > 0 ? -1 : 1;
    if (correct > best) {
      best = correct;
      best_threshold = i < order.size() ? 0.5 * (v + outputs[order[i]]) : v + 1.0;
    }
  }
  return best_threshold;
}

double calibrate_threshold(const NccNetwork& net, const TrainingData& data) {
  const std::vector<double> outputs = network_outputs(net, data);
  const std::vector<int> labels = labels_of(data);
  return calibrate_threshold(outputs, labels);
}

TrainResult train(NccNetwork net, const TrainingData& data, const TrainConfig& config,
                  const TrainingData* heldout) {
  net.validate();
  config.validate();
  if (data.size() == 0) throw InvalidArgumentError("training set is empty");
  {
    bool seen_pos = false;
    bool seen_neg = false;
    for (std::size_t i = 0; i < data.size() && !(seen_pos && seen_neg); ++i) {
      (data.label(i) > 0 ? seen_pos : seen_neg) = true;
    }
    if (!seen_pos || !seen_neg) {
      throw InvalidArgumentError("training set must contain both positive and negative samples");
    }
  }

  Rng rng(config.rng_seed);
  GradientSet velocity = GradientSet::zeros_like(net);
  const std::size_t n_filters = net.filters.size();
  const std::size_t taps = net.filters.front().size();
  std::vector<std::size_t> order(data.size());
  TrainResult result;

  TrainConfig step_config = config;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    step_config.learning_rate = config.learning_rate * std::pow(config.lr_decay, epoch - 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    const std::vector<Patch> start_filters =
        net.norm_mode == NormMode::None ? net.filters : normalized_filters(net);

    EpochRecord record;
    record.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::vector<Patch> fn = normalized_filters(net);
      // Gradients with respect to the normalized filters; mapped back to raw
      // taps once per batch (the normalization Jacobian is linear in them).
      std::vector<std::vector<double>> grad_fn(n_filters, std::vector<double>(taps, 0.0));
      GradientSet grads = GradientSet::zeros_like(net);
      std::size_t used = 0;
      std::vector<double> scores(n_filters);

      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t idx = order[b];
        Patch pn;
        try {
          pn = normalize(data.patch(idx), net.norm_mode);
        } catch (const DegeneratePatchError&) {
          ++record.skipped_degenerate;
          continue;
        }
        if (!pn.same_shape(fn.front())) throw SizeMismatchError("training patch size != filter size");
        const double label = static_cast<double>(data.label(idx));
        for (std::size_t k = 0; k < n_filters; ++k) scores[k] = dot(pn, fn[k]);
        const double out = output_from_scores(net, scores);
        loss_sum += l1_loss(out, label);
        ++loss_count;
        ++used;
        const double d_out = sign_or_zero(out - label);
        if (d_out == 0.0) continue;
        for (std::size_t k = 0; k < n_filters; ++k) {
          grads.weight_grads[k] += d_out * relu(scores[k]);
          if (scores[k] <= 0.0) continue;
          const double d_score = d_out * net.weights[k];
          auto& gk = grad_fn[k];
          const auto pv = pn.values();
          for (std::size_t i = 0; i < taps; ++i) gk[i] += d_score * pv[i];
        }
      }
      if (used == 0) {
        throw DegeneratePatchError("every sample in a training batch is a flat patch");
      }
      const double inv = 1.0 / static_cast<double>(used);
      for (std::size_t k = 0; k < n_filters; ++k) {
        grads.weight_grads[k] *= inv;
        for (double& x : grad_fn[k]) x *= inv;
        const std::vector<double> g =
            backprop_normalization(grad_fn[k], net.filters[k], net.norm_mode, KinkPolicy::Subgradient);
        std::copy(g.begin(), g.end(), grads.filter_grads[k].values().begin());
      }
      sgd_step(net, grads, step_config, velocity);
    }

    record.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    const std::vector<Patch> end_filters =
        net.norm_mode == NormMode::None ? net.filters : normalized_filters(net);
    for (std::size_t k = 0; k < n_filters; ++k) {
      std::vector<double> diff(taps);
      for (std::size_t i = 0; i < taps; ++i) diff[i] = end_filters[k][i] - start_filters[k][i];
      const double base = l2(start_filters[k].values());
      record.filter_change = std::max(record.filter_change, base > 0.0 ? l2(diff) / base : l2(diff));
    }
    if (heldout != nullptr && heldout->size() > 0) {
      record.decision_threshold = calibrate_threshold(net, data);
      const Accuracy acc = evaluate_accuracy(net, *heldout, record.decision_threshold);
      record.heldout_accuracy = acc.accuracy;
      record.heldout_balanced_accuracy = acc.balanced;
    }
    result.history.epochs.push_back(record);
  }
  net.train_config = config;
  result.net = std::move(net);
  return result;
}

// Network text format:
//   irncc-network 1
//   norm_mode <std|mad|none>
//   filter_count <N>
//   weights <w_1> ... <w_N>
//   train_config <none | lr lr_decay momentum decay batch epochs seed>
//   filter <k>            (N times, each followed by a grid in patch text format)
//   end
void write_network(std::ostream& out, const NccNetwork& net) {
  net.validate();
  out << "irncc-network 1\n";
  out << "norm_mode " << to_string(net.norm_mode) << '\n';
  out << "filter_count " << net.filter_count() << '\n';
  out << "weights";
  for (double w : net.weights) out << ' ' << format_real(w);
  out << '\n';
  out << "train_config";
  if (net.train_config) {
    const TrainConfig& c = *net.train_config;
    out << ' ' << format_real(c.learning_rate) << ' ' << format_real(c.lr_decay) << ' '
        << format_real(c.momentum) << ' '
        << format_real(c.weight_decay) << ' ' << c.batch_size << ' ' << c.max_epochs << ' '
        << c.rng_seed;
  } else {
    out << " none";
  }
  out << '\n';
  for (int k = 0; k < net.filter_count(); ++k) {
    out << "filter " << k << '\n';
    write_patch_text(out, net.filters[k]);
  }
  out << "end\n";
}

NccNetwork read_network(std::istream& in) {
  std::string tok;
  auto next = [&]() {
    if (!(in >> tok)) throw FormatError("network file truncated");
    return tok;
  };
  auto expect = [&](const char* word) {
    if (next() != word) throw FormatError(std::string("network file: expected '") + word + "', got '" + tok + "'");
  };
  auto next_int = [&]() {
    const std::string t = next();
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(t, &pos);
      if (pos != t.size()) throw FormatError("bad integer '" + t + "'");
      return v;
    } catch (const std::logic_error&) {
      throw FormatError("bad integer '" + t + "'");
    }
  };
  expect("irncc-network");
  if (next_int() != 1) throw FormatError("unsupported network file version");
  NccNetwork net;
  expect("norm_mode");
  try {
    net.norm_mode = parse_norm_mode(next());
  } catch (const InvalidArgumentError& e) {
    throw FormatError(e.what());
  }
  expect("filter_count");
  const long long n = next_int();
  if (n < 1 || n > kMaxFilters) throw FormatError("network file: filter_count out of range");
  expect("weights");
  for (long long k = 0; k < n; ++k) net.weights.push_back(parse_real(next()));
  expect("train_config");
  if (next() != "none") {
    TrainConfig c;
    c.learning_rate = parse_real(tok);
    c.lr_decay = parse_real(next());
    c.momentum = parse_real(next());
    c.weight_decay = parse_real(next());
    c.batch_size = static_cast<int>(next_int());
    c.max_epochs = static_cast<int>(next_int());
    const std::string seed = next();
    try {
      c.rng_seed = std::stoull(seed);
    } catch (const std::logic_error&) {
      throw FormatError("bad rng seed '" + seed + "'");
    }
    net.train_config = c;
  }
  for (long long k = 0; k < n; ++k) {
    expect("filter");
    if (next_int() != k) throw FormatError("network file: filters out of order");
    net.filters.push_back(read_patch_text(in));
  }
  expect("end");
  try {
    net.validate();
  } catch (const InvalidArgumentError& e) {
    throw FormatError(std::string("network file: ") + e.what());
  }
  return net;
}

void save_network(const std::filesystem::path& path, const NccNetwork& net) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_network(out, net);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

NccNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_network(in);
}

}  // namespace irncc
