// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails. `acceptance 3 5` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "irncc/bench.hpp"
#include "irncc/cli.hpp"
#include "irncc/error.hpp"
#include "irncc/filterbank.hpp"
#include "irncc/instrument.hpp"
#include "irncc/irdatagen.hpp"
#include "irncc/nccnet.hpp"
#include "irncc/patchmath.hpp"
#include "irncc/rng.hpp"

using namespace irncc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Patch random_patch(Rng& rng, int side) {
  Patch p(side, side);
  for (double& v : p.values()) v = rng.uniform(-1, 1);
  return p;
}

Patch kink_free_patch(Rng& rng, int side, double gap = 0.1) {
  Patch p = random_patch(rng, side);
  for (bool moved = true; moved;) {
    moved = false;
    const double mean = patch_mean(p);
    for (double& v : p.values())
      if (std::abs(v - mean) <= gap) {
        v = mean + (v >= mean ? 1 : -1) * (gap + rng.uniform(0.05, 0.5));
        moved = true;
      }
  }
  return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "irncc");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) throw Error("irncc " + args[1] + " failed: " + err.str());
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// datagen -> train -> export-filter -> fit-hat -> bench with the CLI defaults.
void run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  const std::string d = (dir / "data").string();
  cli({"datagen", "--out", d});
  cli({"train", "--data", d, "--out", (dir / "net.txt").string(), "--history", (dir / "history.csv").string()});
  cli({"export-filter", "--net", (dir / "net.txt").string(), "--out", (dir / "filter.txt").string()});
  cli({"fit-hat", "--filter", (dir / "filter.txt").string(), "--out", (dir / "hat.txt").string()});
  cli({"bench", "--data", d, "--out-dir", (dir / "bench").string(), "--hat", (dir / "hat.txt").string(), "--no-timing"});
}

const fs::path& workspace() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "irncc_acceptance" / "run_a";
    run_pipeline(d);
    return d;
  }();
  return dir;
}

const std::vector<LabeledSample>& standard_samples() {
  static const std::vector<LabeledSample> s = read_dataset(workspace() / "data" / "dataset.nccd");
  return s;
}

struct Split {
  AugmentedSet train;
  AugmentedSet heldout;
};

Split make_split(std::uint64_t seed) {
  const auto& all = standard_samples();
  const SplitIndices idx = split_indices(all.size(), 0.8, seed);
  std::vector<LabeledSample> a, b;
  for (std::size_t i : idx.train) a.push_back(all[i]);
  for (std::size_t i : idx.heldout) b.push_back(all[i]);
  return {AugmentedSet(std::move(a)), AugmentedSet(std::move(b))};
}

// 1 ---------------------------------------------------------------------
Verdict gradient_suite() {
  Rng rng(101);
  const int patches = 100;
  double worst_std = 0, worst_mad = 0, worst_net = 0;
  const double h = 1e-6;
  for (int t = 0; t < patches; ++t) {
    const Patch p = kink_free_patch(rng, 15);
    const int n = static_cast<int>(p.size());
    const JacobianMatrix js = jacobian_normalize_std(p), jm = jacobian_normalize_mad(p);
    for (int j = 0; j < n; ++j) {
      Patch plus = p, minus = p;
      plus[j] += h;
      minus[j] -= h;
      const Patch sp = normalize_std(plus), sm = normalize_std(minus);
      const Patch mp = normalize_mad(plus), mm = normalize_mad(minus);
      for (int i = 0; i < n; ++i) {
        worst_std = std::max(worst_std, rel_err(js(i, j), (sp[i] - sm[i]) / (2 * h)));
        worst_mad = std::max(worst_mad, rel_err(jm(i, j), (mp[i] - mm[i]) / (2 * h)));
      }
    }
    for (NormMode mode : {NormMode::Std, NormMode::Mad, NormMode::None}) {
      NccNetwork net;
      net.norm_mode = mode;
      for (;;) {
        net.filters = {kink_free_patch(rng, 15), kink_free_patch(rng, 15)};
        net.weights = {rng.uniform(0.2, 1.2), rng.uniform(-1.2, -0.2)};
        bool ok = std::abs(forward(net, p) - 1.0) > 1e-3;
        for (double s : filter_scores(net, p)) ok = ok && std::abs(s) > 1e-3;
        if (ok) break;
      }
      const BackwardResult b = backward(net, p, 1.0);
      auto loss = [&](const NccNetwork& m) { return l1_loss(forward(m, p), 1.0); };
      for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < n; ++i) {
          NccNetwork a = net, c = net;
          a.filters[k][i] += h;
          c.filters[k][i] -= h;
          worst_net = std::max(worst_net, rel_err(b.grads.filter_grads[k][i], (loss(a) - loss(c)) / (2 * h)));
        }
        NccNetwork a = net, c = net;
        a.weights[k] += h;
        c.weights[k] -= h;
        worst_net = std::max(worst_net, rel_err(b.grads.weight_grads[k], (loss(a) - loss(c)) / (2 * h)));
      }
    }
  }
  const bool pass = worst_std < 1e-4 && worst_mad < 1e-4 && worst_net < 1e-4;
  return {pass, std::to_string(patches) + " patches; max rel err std " + fmt("%.2e", worst_std) + ", mad " +
                    fmt("%.2e", worst_mad) + ", network " + fmt("%.2e", worst_net)};
}

// 2 ---------------------------------------------------------------------
Verdict ncc_contracts() {
  Rng rng(202);
  double max_abs = 0, worst_std = 0, worst_mad = 0;
  for (int t = 0; t < 1000; ++t) {
    const Patch p = random_patch(rng, 15);
    Patch f = random_patch(rng, 15);
    if (t % 2 == 0) {
      // Near-aligned or anti-aligned pairs probe the bound at +-1.
      const double eps = std::pow(10.0, -rng.uniform(0, 8)), sign = t % 4 == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = sign * p[i] + eps * f[i];
    }
    const double a = std::exp(rng.uniform(-4, 4)), b = rng.uniform(-1e4, 1e4);
    Patch q = p;
    for (double& v : q.values()) v = a * v + b;
    const double s = ncc_score(p, f, NormMode::Std);
    max_abs = std::max(max_abs, std::abs(s));
    worst_std = std::max(worst_std, std::abs(ncc_score(q, f, NormMode::Std) - s));
    worst_mad = std::max(worst_mad, std::abs(ncc_score(q, f, NormMode::Mad) - ncc_score(p, f, NormMode::Mad)));
  }
  Rng seeded(7);
  NccNetwork none = init_network(2, 15, NormMode::None, 7);
  const Patch p = random_patch(seeded, 15);
  Patch q = p;
  for (double& v : q.values()) v = 2.0 * v + 100.0;
  const double none_gap = std::abs(forward(none, q) - forward(none, p));
  const bool pass = max_abs <= 1 + 1e-9 && worst_std <= 1e-9 && worst_mad <= 1e-9 && none_gap > 1e-6;
  return {pass, "max |score| " + fmt("%.12f", max_abs) + "; affine drift std " + fmt("%.1e", worst_std) + ", mad " +
                    fmt("%.1e", worst_mad) + "; none-mode change " + fmt("%.3g", none_gap)};
}

// 3 ---------------------------------------------------------------------
Verdict convergence() {
  std::size_t pos = 0;
  for (const LabeledSample& s : standard_samples()) pos += s.label == 1;
  std::string detail = std::to_string(pos) + " positives, " + std::to_string(standard_samples().size() - pos) +
                       " negatives;";
  bool pass = true;
  for (std::uint64_t run = 1; run <= 5; ++run) {
    const Split split = make_split(run);
    TrainConfig cfg;
    cfg.rng_seed = run;
    const TrainResult r = train(init_network(1, 15, NormMode::Std, 10 + run), split.train, cfg, &split.heldout);
    int converged_at = 0;
    for (const EpochRecord& e : r.history.epochs)
      if (converged_at == 0 && e.filter_change < 0.05) converged_at = e.epoch;
    const double acc = r.history.epochs.back().heldout_accuracy;
    pass = pass && converged_at > 0 && acc > 0.9;
    detail += " run" + std::to_string(run) + " acc " + fmt("%.3f", acc) + " change " +
              fmt("%.4f", r.history.epochs.back().filter_change) + " (<5% at epoch " + std::to_string(converged_at) + ")";
  }
  return {pass, detail};
}

// 4 ---------------------------------------------------------------------
Verdict redundancy() {
  int hits = 0;
  std::string detail;
  for (std::uint64_t run = 1; run <= 5; ++run) {
    const Split split = make_split(run);
    TrainConfig cfg;
    cfg.rng_seed = run;
    const TrainResult r = train(init_network(4, 15, NormMode::Std, 40 + run), split.train, cfg);
    double best = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) best = std::max(best, std::abs(filter_similarity(r.net.filters[i], r.net.filters[j])));
    hits += best > 0.8;
    detail += " run" + std::to_string(run) + " max|sim| " + fmt("%.3f", best);
  }
  return {hits >= 3, std::to_string(hits) + "/5 runs above 0.8;" + detail};
}

// 5 ---------------------------------------------------------------------
Verdict fig6_ordering() {
  std::ifstream hat_in(workspace() / "hat.txt");
  const HatParams hat = read_hat_params(hat_in);
  const BenchFrames data = read_bench_frames(workspace() / "data" / "bench");
  BenchConfig cfg;
  cfg.timing = false;
  const BenchReport r =
      run_benchmark(data, {"hat15-ideal", "gauss-1.2", "mad-ratio", "hat7-fixed", "hat5-fixed"}, cfg, hat);
  const double h15 = r.at("hat15-ideal").roc.auc, g12 = r.at("gauss-1.2").roc.auc, mr = r.at("mad-ratio").roc.auc;
  const double h7 = r.at("hat7-fixed").roc.auc, h5 = r.at("hat5-fixed").roc.auc;
  const bool pass = h15 >= g12 && g12 >= mr && h15 >= h7 && h15 >= h5;
  return {pass, std::to_string(data.frames.size()) + " frames; AUC hat15-ideal " + fmt("%.4f", h15) + ", gauss-1.2 " +
                    fmt("%.4f", g12) + ", mad-ratio " + fmt("%.4f", mr) + ", hat7-fixed " + fmt("%.4f", h7) +
                    ", hat5-fixed " + fmt("%.4f", h5)};
}

// 6 ---------------------------------------------------------------------
Verdict fixed_point_fidelity() {
  const FilterSpec fixed = hat_variant(9, true, NormMode::Mad, HatParams{});
  const FixedMadNcc scorer(fixed);
  Rng rng(606);
  double worst = 0;
  int scored = 0;
  while (scored < 1000) {
    IntPatch p{9, 9, std::vector<std::uint16_t>(81)};
    const int base = rng.between(0, 50000), span = rng.between(1, 15000);
    for (auto& v : p.values) v = static_cast<std::uint16_t>(std::min(65535, base + rng.between(0, span)));
    if (scored % 3 == 0) p.values[40] = static_cast<std::uint16_t>(std::min(65535, p.values[40] + span));
    const FixedScore s = scorer.score(p);
    if (s.degenerate) continue;
    worst = std::max(worst, std::abs(s.value() - ncc_score(to_patch(p), fixed.grid, NormMode::Mad)));
    ++scored;
  }

  SceneSetConfig frames_cfg;
  frames_cfg.frames = 200;
  frames_cfg.targets_per_frame = 10;
  frames_cfg.seed = 6006;
  // Reference: 64-bit float MAD-NCC on the same (dequantized) taps. The
  // unquantized filter is reported alongside.
  const auto quant = make_filter_scorer(fixed);
  const auto same_taps = make_filter_scorer(make_filter("hat9-dequantized-mad", fixed.grid, NormMode::Mad));
  const auto ideal = resolve_method("hat9-ideal-mad");
  int same = 0, same_ideal = 0;
  for (const Scene& s : synth_scene_set(frames_cfg)) {
    const int rows = s.image.rows(), cols = s.image.cols();
    const auto q = nms_candidates(quant->score_map(s.image), 9, rows, cols);
    const auto f = nms_candidates(same_taps->score_map(s.image), 9, rows, cols);
    const auto i = nms_candidates(ideal->score_map(s.image), 9, rows, cols);
    same += !q.empty() && !f.empty() && q[0].row == f[0].row && q[0].col == f[0].col;
    same_ideal += !q.empty() && !i.empty() && q[0].row == i[0].row && q[0].col == i[0].col;
  }
  return {worst <= std::ldexp(1.0, -5) && same >= 190,
          "max |fixed - float| " + fmt("%.5f", worst) + " (bound 0.03125) over 1000 patches; top-1 agreement " +
              std::to_string(same) + "/200 (vs unquantized taps " + std::to_string(same_ideal) + "/200)"};
}

// 7 ---------------------------------------------------------------------
Verdict cardinalities() {
  std::size_t pos = 0, neg = 0;
  bool exact = true;
  for (const LabeledSample& s : standard_samples()) {
    if (s.label == 1) {
      exact = exact && augment_positive(s).size() == 64;
      ++pos;
    } else {
      exact = exact && augment_negative(s).size() == 4;
      ++neg;
    }
  }
  const AugmentedSet set(standard_samples());
  exact = exact && set.size() == 64 * pos + 4 * neg;
  return {exact, std::to_string(pos) + " positives x64 + " + std::to_string(neg) + " negatives x4 = " +
                     std::to_string(set.size()) + " samples"};
}

// 8 ---------------------------------------------------------------------
Verdict op_counts() {
  const int N = 256, f = 15;
  const OpCount std_ops = op_count("ncc-std", N, f), mad_ops = op_count("ncc-mad", N, f);
  const std::uint64_t tiles = static_cast<std::uint64_t>(N / f) * (N / f);
  const bool table = mad_ops.square_roots == 0 && std_ops.square_roots == tiles &&
                     op_count("ncc-std", 512, 15).square_roots == (512 / 15) * (512 / 15);

  SceneConfig sc;
  sc.rng_seed = 88;
  const Scene scene = synth_scene(sc);
  const Patch filt = normalize_std(ricker_hat_filter(f, HatParams{}).grid);
  const Patch filt_mad = normalize_mad(ricker_hat_filter(f, HatParams{}).grid);
  const FixedMadNcc fixed(hat_variant(f, true, NormMode::Mad, HatParams{}));
  const IntPatch ints = to_int_patch(scene.image);

  instrument::reset();
  double sink = 0;
  for (int r = 0; r + f <= N; r += f)
    for (int c = 0; c + f <= N; c += f) sink += dot(normalize_std(scene.image.window(r, c, f, f)), filt);
  const std::uint64_t std_sqrt = instrument::sqrt_calls();

  instrument::reset();
  for (int r = 0; r + f <= N; r += f)
    for (int c = 0; c + f <= N; c += f) {
      sink += dot(normalize_mad(scene.image.window(r, c, f, f)), filt_mad);
      sink += fixed.score(ints, r, c).value();
    }
  const std::uint64_t mad_sqrt = instrument::sqrt_calls();
  const bool pass = instrument::kEnabled && table && std_sqrt == std_ops.square_roots && mad_sqrt == 0 &&
                    std::isfinite(sink);
  return {pass, "analytic sqrt std " + std::to_string(std_ops.square_roots) + ", mad " +
                    std::to_string(mad_ops.square_roots) + "; counted on 256x256 tile scan std " +
                    std::to_string(std_sqrt) + ", mad " + std::to_string(mad_sqrt)};
}

// 9 ---------------------------------------------------------------------
Verdict determinism() {
  const fs::path a = workspace();
  const fs::path b = a.parent_path() / "run_b";
  run_pipeline(b);
  std::vector<fs::path> files = {"data/dataset.nccd", "data/bench/truths.csv", "net.txt", "history.csv", "filter.txt",
                                 "hat.txt", "bench/roc.csv", "bench/auc.csv", "bench/scores.csv",
                                 "bench/score_range.csv"};
  for (const auto& e : fs::directory_iterator(a / "data" / "bench" / "frames"))
    files.push_back(fs::relative(e.path(), a));
  std::size_t identical = 0;
  std::string diff;
  for (const fs::path& f : files) {
    if (fs::exists(a / f) && slurp(a / f) == slurp(b / f))
      ++identical;
    else
      diff += " " + f.string();
  }
  fs::remove_all(b);
  return {identical == files.size(),
          std::to_string(identical) + "/" + std::to_string(files.size()) + " files byte-identical" +
              (diff.empty() ? "" : "; differ:" + diff)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"ncc contracts", ncc_contracts},
      {"convergence", convergence},
      {"filter redundancy (N=4)", redundancy},
      {"benchmark ordering", fig6_ordering},
      {"fixed-point fidelity", fixed_point_fidelity},
      {"augmentation cardinalities", cardinalities},
      {"operation counts", op_counts},
      {"pipeline determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::cout << "criterion " << id << " [" << (v.pass ? "PASS" : "FAIL") << "] " << criteria[i].first << ": "
              << v.detail << " (" << fmt("%.1f", secs) << " s)" << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / "irncc_acceptance");
  return failed == 0 ? 0 : 1;
}
