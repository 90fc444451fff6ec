#include "irncc/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "irncc/bench.hpp"
#include "irncc/error.hpp"
#include "irncc/filterbank.hpp"
#include "irncc/irdatagen.hpp"
#include "irncc/nccnet.hpp"

namespace irncc {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path dataset_file(const fs::path& p) { return fs::is_directory(p) ? p / "dataset.nccd" : p; }
fs::path bench_dir(const fs::path& p) { return fs::exists(p / "frames") ? p : p / "bench"; }

HatParams hat_from(const std::string& path) {
  if (path.empty()) return HatParams{};
  std::ifstream in = open_in(path);
  return read_hat_params(in);
}

std::vector<ClutterKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<ClutterKind> kinds;
  for (const std::string& n : names) kinds.push_back(parse_clutter_kind(n));
  return kinds;
}

struct DatagenOptions {
  fs::path out;
  int scenes = 25;
  int frames_per_scene = 4;
  int targets = 20;
  int width = 256;
  int height = 256;
  std::size_t negatives = 8000;
  double positive_fraction = 0.0;
  int bench_frames = 40;
  int bench_targets = 10;
  std::vector<std::string> clutter = {"sky", "terrain", "sea-glint", "collimator"};
  double bad_pixel_rate = 2e-4;
  double amplitude = 40.0;
  double noise = 4.0;
  double psf = 1.0;
  double clutter_strength = 60.0;
  std::uint64_t seed = 1;
};

void run_datagen(const DatagenOptions& o, std::ostream& out) {
  SceneSetConfig scenes;
  scenes.frames = o.scenes * o.frames_per_scene;
  scenes.frames_per_scene = o.frames_per_scene;
  scenes.width = o.width;
  scenes.height = o.height;
  scenes.targets_per_frame = o.targets;
  scenes.kinds = parse_kinds(o.clutter);
  scenes.target_amplitude = o.amplitude;
  scenes.noise_sigma = o.noise;
  scenes.psf_sigma = o.psf;
  scenes.clutter_strength = o.clutter_strength;
  scenes.bad_pixel_rate = o.bad_pixel_rate;
  scenes.seed = o.seed;

  DatasetBuildConfig build;
  build.scenes = scenes;
  build.negative_budget = o.negatives;
  build.positive_fraction = o.positive_fraction;
  build.subsample_seed = o.seed + 6;
  const BuiltDataset ds = build_dataset(build);
  std::vector<LabeledSample> all = ds.positives;
  all.insert(all.end(), ds.negatives.begin(), ds.negatives.end());
  fs::create_directories(o.out);
  write_dataset(all, o.out / "dataset.nccd");
  out << "dataset: " << ds.positives.size() << " positives, " << ds.negatives.size() << " negatives (of "
      << ds.negative_pool << " candidates) -> " << (o.out / "dataset.nccd").string() << '\n';

  if (o.bench_frames > 0) {
    SceneSetConfig bench = scenes;
    bench.frames = o.bench_frames;
    bench.frames_per_scene = 1;
    bench.targets_per_frame = o.bench_targets;
    bench.seed = o.seed + 1000003;
    write_bench_frames(o.out / "bench", synth_scene_set(bench));
    out << "bench: " << o.bench_frames << " frames -> " << (o.out / "bench").string() << '\n';
  }
}

struct TrainOptions {
  fs::path data;
  fs::path out;
  fs::path history;
  int filters = 1;
  int size = kCoreSize;
  std::string norm = "std";
  TrainConfig config;
  std::uint64_t init_seed = 11;
  std::uint64_t split_seed = 3;
  double train_fraction = 0.8;
};

void run_train(const TrainOptions& o, std::ostream& out) {
  const std::vector<LabeledSample> samples = read_dataset(dataset_file(o.data));
  const SplitIndices split = split_indices(samples.size(), o.train_fraction, o.split_seed);
  std::vector<LabeledSample> train_part;
  std::vector<LabeledSample> heldout_part;
  for (std::size_t i : split.train) train_part.push_back(samples[i]);
  for (std::size_t i : split.heldout) heldout_part.push_back(samples[i]);
  const AugmentedSet train_set(std::move(train_part));
  const AugmentedSet heldout_set(std::move(heldout_part));
  const NccNetwork init = init_network(o.filters, o.size, parse_norm_mode(o.norm), o.init_seed);
  const TrainResult res = train(init, train_set, o.config, heldout_set.size() > 0 ? &heldout_set : nullptr);

  out << "epoch  loss      change    heldout_acc  balanced  threshold\n";
  for (const EpochRecord& e : res.history.epochs) {
    out << e.epoch << "      " << fixed(e.mean_loss, 5) << "  " << fixed(e.filter_change, 5) << "   "
        << fixed(e.heldout_accuracy, 4) << "       " << fixed(e.heldout_balanced_accuracy, 4) << "    "
        << fixed(e.decision_threshold, 4) << '\n';
  }
  save_network(o.out, res.net);
  out << "network -> " << o.out.string() << '\n';
  if (!o.history.empty()) {
    std::ofstream h = open_out(o.history);
    h << "epoch,mean_loss,filter_change,heldout_accuracy,heldout_balanced_accuracy,decision_threshold,"
         "skipped_degenerate\n";
    for (const EpochRecord& e : res.history.epochs) {
      h << e.epoch << ',' << format_real(e.mean_loss) << ',' << format_real(e.filter_change) << ','
        << format_real(e.heldout_accuracy) << ',' << format_real(e.heldout_balanced_accuracy) << ','
        << format_real(e.decision_threshold) << ',' << e.skipped_degenerate << '\n';
    }
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"NCC filter learning, fixed-point MAD-NCC and ROC benchmarking for IR small targets", "irncc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  DatagenOptions dg;
  CLI::App* datagen = app.add_subcommand("datagen", "Synthesize training patches and benchmark frames");
  datagen->add_option("--out", dg.out, "Output directory")->required();
  datagen->add_option("--scenes", dg.scenes, "Training scenes")->capture_default_str()->check(CLI::PositiveNumber);
  datagen->add_option("--frames-per-scene", dg.frames_per_scene, "Frames per training scene")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  datagen->add_option("--targets", dg.targets, "Targets per training frame")->capture_default_str();
  datagen->add_option("--width", dg.width, "Frame width")->capture_default_str();
  datagen->add_option("--height", dg.height, "Frame height")->capture_default_str();
  datagen->add_option("--negatives", dg.negatives, "Negatives kept after subsampling")->capture_default_str();
  datagen->add_option("--positive-fraction", dg.positive_fraction,
                      "Choose the negative budget so positives are this fraction after augmentation (0: off)")
      ->capture_default_str();
  datagen->add_option("--bench-frames", dg.bench_frames, "Benchmark frames (0: none)")->capture_default_str();
  datagen->add_option("--bench-targets", dg.bench_targets, "Targets per benchmark frame")->capture_default_str();
  datagen->add_option("--clutter", dg.clutter, "Clutter kinds: sky, terrain, sea-glint, collimator")
      ->delimiter(',')
      ->capture_default_str();
  datagen->add_option("--bad-pixel-rate", dg.bad_pixel_rate, "Fraction of bad pixels")->capture_default_str();
  datagen->add_option("--amplitude", dg.amplitude, "Target peak amplitude (counts)")->capture_default_str();
  datagen->add_option("--noise", dg.noise, "Detector noise sigma (counts)")->capture_default_str();
  datagen->add_option("--psf", dg.psf, "PSF sigma (pixels)")->capture_default_str();
  datagen->add_option("--clutter-strength", dg.clutter_strength, "Clutter strength (counts)")->capture_default_str();
  datagen->add_option("--seed", dg.seed, "Seed")->capture_default_str();

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train an NCC network on a dataset");
  train_cmd->add_option("--data", tr.data, "Dataset file or datagen directory")->required();
  train_cmd->add_option("--out", tr.out, "Network file to write")->required();
  train_cmd->add_option("--filters", tr.filters, "Number of filters (1-4)")->capture_default_str()->check(CLI::Range(1, 4));
  train_cmd->add_option("--norm", tr.norm, "Normalization: std, mad or none")
      ->capture_default_str()
      ->check(CLI::IsMember({"std", "mad", "none"}));
  train_cmd->add_option("--epochs", tr.config.max_epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--batch", tr.config.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", tr.config.learning_rate, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--lr-decay", tr.config.lr_decay, "Per-epoch learning-rate factor")->capture_default_str();
  train_cmd->add_option("--momentum", tr.config.momentum, "Momentum")->capture_default_str();
  train_cmd->add_option("--weight-decay", tr.config.weight_decay, "L2 weight decay")->capture_default_str();
  train_cmd->add_option("--seed", tr.config.rng_seed, "Shuffle seed")->capture_default_str();
  train_cmd->add_option("--init-seed", tr.init_seed, "Filter initialization seed")->capture_default_str();
  train_cmd->add_option("--split-seed", tr.split_seed, "Train/held-out split seed")->capture_default_str();
  train_cmd->add_option("--train-fraction", tr.train_fraction, "Fraction of base samples used for training")
      ->capture_default_str();
  train_cmd->add_option("--history", tr.history, "Per-epoch history CSV");

  fs::path ef_net;
  fs::path ef_out;
  int ef_index = 0;
  CLI::App* export_filter = app.add_subcommand("export-filter", "Write one filter of a network as a grid");
  export_filter->add_option("--net", ef_net, "Network file")->required();
  export_filter->add_option("--index", ef_index, "Filter index")->capture_default_str();
  export_filter->add_option("--out", ef_out, "Filter file")->required();

  fs::path fh_filter;
  fs::path fh_out;
  fs::path fh_grid;
  CLI::App* fit_hat_cmd = app.add_subcommand("fit-hat", "Fit hat parameters to a trained filter");
  fit_hat_cmd->add_option("--filter", fh_filter, "Filter grid file")->required();
  fit_hat_cmd->add_option("--out", fh_out, "Hat parameter file")->required();
  fit_hat_cmd->add_option("--grid", fh_grid, "Also write the 15x15 hat grid here");

  fs::path q_filter;
  fs::path q_out;
  int q_bits = 8;
  int q_frac = 7;
  std::string q_dev = "std";
  CLI::App* quantize = app.add_subcommand("quantize", "Quantize a filter grid to fixed-point taps");
  quantize->add_option("--filter", q_filter, "Filter grid file")->required();
  quantize->add_option("--out", q_out, "Quantized filter file")->required();
  quantize->add_option("--bits", q_bits, "Total bits")->capture_default_str();
  quantize->add_option("--frac", q_frac, "Fractional bits")->capture_default_str();
  quantize->add_option("--deviation", q_dev, "std or mad")->capture_default_str()->check(CLI::IsMember({"std", "mad"}));

  fs::path dt_frame;
  fs::path dt_out;
  fs::path dt_hat;
  std::string dt_method;
  double dt_threshold = 0.0;
  int dt_nms = kDefaultNmsRadius;
  CLI::App* detect = app.add_subcommand("detect", "Detect targets in one 16-bit PGM frame");
  detect->add_option("--frame", dt_frame, "Frame (16-bit PGM)")->required();
  detect->add_option("--method", dt_method, "Method name")->required();
  detect->add_option("--threshold", dt_threshold, "Score threshold")->capture_default_str();
  detect->add_option("--nms", dt_nms, "NMS radius")->capture_default_str();
  detect->add_option("--hat", dt_hat, "Hat parameter file for hat methods");
  detect->add_option("--out", dt_out, "Detections CSV (default: stdout)");

  fs::path bn_data;
  fs::path bn_out;
  fs::path bn_hat;
  std::vector<std::string> bn_methods;
  BenchConfig bn_config;
  bool bn_no_timing = false;
  CLI::App* bench = app.add_subcommand("bench", "ROC benchmark over benchmark frames");
  bench->add_option("--data", bn_data, "Benchmark directory (or datagen directory)")->required();
  bench->add_option("--methods", bn_methods, "Comma-separated methods (default: built-in grid)")->delimiter(',');
  bench->add_option("--out-dir", bn_out, "Output directory")->required();
  bench->add_option("--hat", bn_hat, "Hat parameter file for hat methods");
  bench->add_option("--nms", bn_config.nms_radius, "NMS radius")->capture_default_str();
  bench->add_option("--match-radius", bn_config.match_radius, "Match radius")->capture_default_str();
  bench->add_option("--thresholds", bn_config.threshold_count, "ROC thresholds")->capture_default_str();
  bench->add_flag("--no-timing", bn_no_timing, "Write ms_per_frame = 0 (byte-reproducible CSVs)");

  fs::path rc_scores;
  fs::path rc_data;
  fs::path rc_out;
  fs::path rc_auc;
  BenchConfig rc_config;
  CLI::App* roc = app.add_subcommand("roc", "Recompute ROC curves from a stored scores CSV");
  roc->add_option("--scores", rc_scores, "scores.csv written by bench")->required();
  roc->add_option("--data", rc_data, "Benchmark directory with truths.csv")->required();
  roc->add_option("--out", rc_out, "ROC CSV")->required();
  roc->add_option("--auc-out", rc_auc, "AUC CSV");
  roc->add_option("--match-radius", rc_config.match_radius, "Match radius")->capture_default_str();
  roc->add_option("--thresholds", rc_config.threshold_count, "ROC thresholds")->capture_default_str();

  int oc_size = 512;
  int oc_filter = 15;
  CLI::App* opcount = app.add_subcommand("opcount", "Analytic operation counts per detector");
  opcount->add_option("--size", oc_size, "Image side N")->capture_default_str();
  opcount->add_option("--filter", oc_filter, "Filter side f")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*datagen) {
      run_datagen(dg, out);
    } else if (*train_cmd) {
      run_train(tr, out);
    } else if (*export_filter) {
      const NccNetwork net = load_network(ef_net);
      if (ef_index < 0 || ef_index >= net.filter_count()) throw InvalidArgumentError("filter index out of range");
      save_patch(ef_out, net.filters[static_cast<std::size_t>(ef_index)]);
    } else if (*fit_hat_cmd) {
      const HatFit fit = fit_hat(load_patch(fh_filter));
      std::ofstream o = open_out(fh_out);
      write_hat_params(o, fit);
      if (!fh_grid.empty()) save_patch(fh_grid, ricker_hat_filter(kCoreSize, fit.params).grid);
      out << "a=" << fixed(fit.params.support_halfwidth, 4) << " depth=" << fixed(fit.params.pit_depth, 4)
          << " rho=" << fixed(fit.params.pit_radius, 4) << " similarity=" << fixed(fit.similarity, 4) << '\n';
    } else if (*quantize) {
      const FilterSpec f = make_filter("filter", load_patch(q_filter), parse_norm_mode(q_dev));
      const FilterSpec q = quantize_filter(f, QFormat{q_bits, q_frac});
      std::ofstream o = open_out(q_out);
      write_quantized_filter(o, q);
    } else if (*detect) {
      const std::unique_ptr<WindowScorer> scorer = resolve_method(dt_method, hat_from(dt_hat.string()));
      const std::vector<Detection> dets = sliding_detect(read_pgm16(dt_frame), *scorer, dt_threshold, dt_nms);
      if (dt_out.empty()) {
        write_detections_csv(out, dets);
      } else {
        std::ofstream o = open_out(dt_out);
        write_detections_csv(o, dets);
      }
    } else if (*bench) {
      bn_config.timing = !bn_no_timing;
      const BenchFrames data = read_bench_frames(bench_dir(bn_data));
      const std::vector<std::string> methods = bn_methods.empty() ? default_bench_methods() : bn_methods;
      const BenchReport report = run_benchmark(data, methods, bn_config, hat_from(bn_hat.string()));
      fs::create_directories(bn_out);
      {
        std::ofstream o = open_out(bn_out / "roc.csv");
        write_roc_csv(o, report);
      }
      {
        std::ofstream o = open_out(bn_out / "auc.csv");
        write_auc_csv(o, report);
      }
      {
        std::ofstream o = open_out(bn_out / "scores.csv");
        write_scores_csv(o, report);
      }
      {
        std::ofstream o = open_out(bn_out / "score_range.csv");
        write_score_range_csv(o, report);
      }
      for (const MethodResult& m : report.methods) {
        out << m.method << "  auc=" << fixed(m.roc.auc, 4) << "  ms/frame=" << fixed(m.ms_per_frame, 2) << '\n';
      }
    } else if (*roc) {
      const fs::path dir = bench_dir(rc_data);
      const auto truths = read_truths_csv(dir / "truths.csv", count_bench_frames(dir));
      std::ifstream in = open_in(rc_scores);
      const BenchReport report = read_scores_csv(in, truths, rc_config);
      {
        std::ofstream o = open_out(rc_out);
        write_roc_csv(o, report);
      }
      if (!rc_auc.empty()) {
        std::ofstream o = open_out(rc_auc);
        write_auc_csv(o, report);
      }
    } else if (*opcount) {
      write_op_count_csv(out, oc_size, oc_filter);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace irncc
