#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <string>
#include <vector>

#include "irncc/bench.hpp"
#include "irncc/error.hpp"
#include "irncc/filterbank.hpp"
#include "irncc/irdatagen.hpp"
#include "irncc/nccnet.hpp"
#include "irncc/patchmath.hpp"

namespace py = pybind11;
using namespace irncc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U16Array = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;

Patch to_patch(const Array& a) {
  if (a.ndim() != 2) throw SizeMismatchError("expected a 2-D array");
  const auto rows = static_cast<int>(a.shape(0)), cols = static_cast<int>(a.shape(1));
  return Patch(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const Patch& p) {
  py::array_t<double> out({p.rows(), p.cols()});
  std::copy(p.values().begin(), p.values().end(), out.mutable_data());
  return out;
}

IntPatch to_int(const U16Array& a) {
  if (a.ndim() != 2) throw SizeMismatchError("expected a 2-D array");
  return IntPatch{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                  std::vector<std::uint16_t>(a.data(), a.data() + a.size())};
}

std::vector<Patch> to_patches(const std::vector<Array>& arrays) {
  std::vector<Patch> out;
  out.reserve(arrays.size());
  for (const Array& a : arrays) out.push_back(to_patch(a));
  return out;
}

std::vector<py::array_t<double>> to_arrays(const std::vector<Patch>& patches) {
  std::vector<py::array_t<double>> out;
  for (const Patch& p : patches) out.push_back(to_array(p));
  return out;
}

py::array_t<double> jacobian_array(const JacobianMatrix& j) {
  py::array_t<double> out({j.n(), j.n()});
  auto m = out.mutable_unchecked<2>();
  for (int r = 0; r < j.n(); ++r)
    for (int c = 0; c < j.n(); ++c) m(r, c) = j(r, c);
  return out;
}

PatchSet make_set(const std::vector<Array>& patches, const std::vector<int>& labels) {
  if (patches.size() != labels.size()) throw SizeMismatchError("patches and labels differ in length");
  PatchSet set;
  for (std::size_t i = 0; i < patches.size(); ++i) set.add(to_patch(patches[i]), labels[i]);
  return set;
}

py::list detections(const std::vector<Detection>& dets) {
  py::list out;
  for (const Detection& d : dets) out.append(py::make_tuple(d.row, d.col, d.score));
  return out;
}

}  // namespace

PYBIND11_MODULE(_irncc, m) {
  m.doc() = "NCC filter learning, fixed-point MAD-NCC and IR small-target benchmarking";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<DegeneratePatchError> degenerate(m, "DegeneratePatchError", error.ptr());
  static py::exception<KinkProximityError> kink(m, "KinkProximityError", error.ptr());
  static py::exception<SizeMismatchError> size(m, "SizeMismatchError", error.ptr());
  static py::exception<InvalidArgumentError> invalid(m, "InvalidArgumentError", error.ptr());
  static py::exception<FormatError> format(m, "FormatError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DegeneratePatchError& e) {
      py::set_error(degenerate, e.what());
    } catch (const KinkProximityError& e) {
      py::set_error(kink, e.what());
    } catch (const SizeMismatchError& e) {
      py::set_error(size, e.what());
    } catch (const InvalidArgumentError& e) {
      py::set_error(invalid, e.what());
    } catch (const FormatError& e) {
      py::set_error(format, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::enum_<NormMode>(m, "NormMode")
      .value("STD", NormMode::Std)
      .value("MAD", NormMode::Mad)
      .value("NONE", NormMode::None);
  py::enum_<KinkPolicy>(m, "KinkPolicy")
      .value("STRICT", KinkPolicy::Strict)
      .value("SUBGRADIENT", KinkPolicy::Subgradient);

  // patch math
  m.def("patch_stats", [](const Array& p) {
    const PatchStats s = patch_stats(to_patch(p));
    return py::make_tuple(s.mean, s.std, s.mad);
  }, "(mean, sample std, mean absolute deviation)");
  m.def("normalize", [](const Array& p, NormMode mode) { return to_array(normalize(to_patch(p), mode)); });
  m.def("ncc_score", [](const Array& p, const Array& f, NormMode mode) {
    return ncc_score(to_patch(p), to_patch(f), mode);
  });
  m.def("cross_correlate_valid", [](const Array& image, const Array& f) {
    return to_array(cross_correlate_valid(to_patch(image), to_patch(f)));
  });
  m.def("jacobian_normalize", [](const Array& p, NormMode mode, KinkPolicy policy) {
    if (mode == NormMode::Std) return jacobian_array(jacobian_normalize_std(to_patch(p)));
    if (mode == NormMode::Mad) return jacobian_array(jacobian_normalize_mad(to_patch(p), policy));
    throw InvalidArgumentError("jacobian_normalize needs STD or MAD");
  }, py::arg("p"), py::arg("mode"), py::arg("policy") = KinkPolicy::Strict,
        "d normalize(p)[i] / d p[j], flattened row-major");

  // network
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("lr_decay", &TrainConfig::lr_decay)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("rng_seed", &TrainConfig::rng_seed);

  py::class_<NccNetwork>(m, "NccNetwork")
      .def(py::init<>())
      .def_readwrite("norm_mode", &NccNetwork::norm_mode)
      .def_property(
          "filters", [](const NccNetwork& n) { return to_arrays(n.filters); },
          [](NccNetwork& n, const std::vector<Array>& f) { n.filters = to_patches(f); })
      .def_readwrite("weights", &NccNetwork::weights)
      .def_property_readonly("filter_count", &NccNetwork::filter_count)
      .def_property_readonly("filter_size", &NccNetwork::filter_size)
      .def("validate", &NccNetwork::validate);

  m.def("init_network", &init_network, py::arg("filter_count"), py::arg("filter_size"), py::arg("mode"),
        py::arg("seed"));
  m.def("forward", [](const NccNetwork& net, const Array& p) { return forward(net, to_patch(p)); });
  m.def("filter_scores", [](const NccNetwork& net, const Array& p) { return filter_scores(net, to_patch(p)); });
  m.def("backward", [](const NccNetwork& net, const Array& p, double label) {
    const BackwardResult r = backward(net, to_patch(p), label);
    return py::make_tuple(r.loss, to_arrays(r.grads.filter_grads), r.grads.weight_grads);
  }, "(loss, filter gradients, weight gradients)");
  m.def("filter_similarity", [](const Array& a, const Array& b) {
    return filter_similarity(to_patch(a), to_patch(b));
  });
  m.def("train", [](const NccNetwork& net, const std::vector<Array>& patches, const std::vector<int>& labels,
                    const TrainConfig& config) {
    const PatchSet set = make_set(patches, labels);
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(net, set, config);
    }
    py::list history;
    for (const EpochRecord& e : r.history.epochs) {
      py::dict d;
      d["epoch"] = e.epoch;
      d["mean_loss"] = e.mean_loss;
      d["filter_change"] = e.filter_change;
      d["skipped_degenerate"] = e.skipped_degenerate;
      history.append(d);
    }
    return py::make_tuple(r.net, history);
  }, "(trained network, per-epoch records)");
  m.def("load_network", [](const std::string& path) { return load_network(path); });
  m.def("save_network", [](const std::string& path, const NccNetwork& net) { save_network(path, net); });

  // filter bank
  py::class_<HatParams>(m, "HatParams")
      .def(py::init<>())
      .def_readwrite("support_halfwidth", &HatParams::support_halfwidth)
      .def_readwrite("ricker_sigma", &HatParams::ricker_sigma)
      .def_readwrite("pit_depth", &HatParams::pit_depth)
      .def_readwrite("pit_radius", &HatParams::pit_radius);

  py::class_<QFormat>(m, "QFormat")
      .def(py::init([](int total, int frac) { return QFormat{total, frac}; }), py::arg("total_bits") = 8,
           py::arg("frac_bits") = 7)
      .def_readwrite("total_bits", &QFormat::total_bits)
      .def_readwrite("frac_bits", &QFormat::frac_bits);

  py::class_<FilterSpec>(m, "FilterSpec")
      .def_readonly("name", &FilterSpec::name)
      .def_property_readonly("grid", [](const FilterSpec& f) { return to_array(f.grid); })
      .def_readonly("deviation", &FilterSpec::deviation)
      .def_readonly("raw", &FilterSpec::raw)
      .def_readonly("scale_exponent", &FilterSpec::scale_exponent)
      .def_property_readonly("is_fixed", &FilterSpec::is_fixed)
      .def_property_readonly("size", &FilterSpec::size);

  m.def("make_filter", [](const std::string& name, const Array& grid, NormMode deviation) {
    return make_filter(name, to_patch(grid), deviation);
  }, py::arg("name"), py::arg("grid"), py::arg("deviation") = NormMode::Std);
  m.def("ricker_hat_filter", &ricker_hat_filter, py::arg("size"), py::arg("params") = HatParams{});
  m.def("gaussian_filter", &gaussian_filter, py::arg("size"), py::arg("sigma"));
  m.def("fit_hat", [](const Array& trained) {
    const HatFit fit = fit_hat(to_patch(trained));
    return py::make_tuple(fit.params, fit.similarity);
  }, "(HatParams, similarity)");
  m.def("crop_filter", &crop_filter);
  m.def("quantize_filter", [](const FilterSpec& f, const QFormat& q) { return quantize_filter(f, q); },
        py::arg("filter"), py::arg("q") = QFormat{});
  m.def("hat_variant", &hat_variant, py::arg("size"), py::arg("fixed"), py::arg("deviation"),
        py::arg("hat") = HatParams{});
  m.def("mad_ncc_fixed_score", [](const U16Array& p, const FilterSpec& f) {
    if (!f.is_fixed()) throw InvalidArgumentError("filter is not quantized");
    const FixedScore s = mad_ncc_fixed_score(to_int(p), f, *f.q);
    py::dict d;
    d["value"] = s.value();
    d["raw"] = s.raw;
    d["degenerate"] = s.degenerate;
    d["saturated"] = s.saturated;
    return d;
  });
  m.def("op_count", [](const std::string& method, int image_side, int filter_side) {
    const OpCount c = op_count(method, image_side, filter_side);
    py::dict d;
    d["multiplications"] = c.multiplications;
    d["additions"] = c.additions;
    d["divisions"] = c.divisions;
    d["square_roots"] = c.square_roots;
    return d;
  });

  // synthetic data
  py::enum_<ClutterKind>(m, "ClutterKind")
      .value("SKY", ClutterKind::Sky)
      .value("TERRAIN", ClutterKind::Terrain)
      .value("SEA_GLINT", ClutterKind::SeaGlint)
      .value("COLLIMATOR", ClutterKind::Collimator);

  py::class_<SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("width", &SceneConfig::width)
      .def_readwrite("height", &SceneConfig::height)
      .def_readwrite("clutter_kind", &SceneConfig::clutter_kind)
      .def_readwrite("clutter_strength", &SceneConfig::clutter_strength)
      .def_readwrite("target_count", &SceneConfig::target_count)
      .def_readwrite("target_amplitude", &SceneConfig::target_amplitude)
      .def_readwrite("psf_sigma", &SceneConfig::psf_sigma)
      .def_readwrite("noise_sigma", &SceneConfig::noise_sigma)
      .def_readwrite("bad_pixel_rate", &SceneConfig::bad_pixel_rate)
      .def_readwrite("base_level", &SceneConfig::base_level)
      .def_readwrite("rng_seed", &SceneConfig::rng_seed)
      .def_readwrite("clutter_seed", &SceneConfig::clutter_seed);

  m.def("synth_scene", [](const SceneConfig& config) {
    const Scene s = synth_scene(config);
    std::vector<std::pair<int, int>> truths, bad;
    for (const PixelPos& p : s.truths) truths.emplace_back(p.row, p.col);
    for (const PixelPos& p : s.bad_pixels) bad.emplace_back(p.row, p.col);
    return py::make_tuple(to_array(s.image), truths, bad);
  }, "(image, target positions, bad pixel positions)");

  // benchmark
  m.def("builtin_methods", &builtin_methods);
  m.def("sliding_detect", [](const Array& frame, const std::string& method, double threshold, const HatParams& hat) {
    return detections(sliding_detect(to_patch(frame), *resolve_method(method, hat), threshold));
  }, py::arg("frame"), py::arg("method"), py::arg("threshold"), py::arg("hat") = HatParams{},
        "[(row, col, score)] after non-maximum suppression");
  m.def("run_benchmark", [](const std::vector<Array>& frames, const std::vector<std::vector<std::pair<int, int>>>& truths,
                            const std::vector<std::string>& methods, const HatParams& hat) {
    if (frames.size() != truths.size()) throw SizeMismatchError("frames and truths differ in length");
    BenchFrames data;
    data.frames = to_patches(frames);
    for (const auto& t : truths) {
      std::vector<PixelPos> pos;
      for (const auto& [r, c] : t) pos.push_back({r, c});
      data.truths.push_back(std::move(pos));
    }
    BenchConfig config;
    config.timing = false;
    BenchReport report;
    {
      py::gil_scoped_release release;
      report = run_benchmark(data, methods, config, hat);
    }
    py::dict aucs;
    for (const MethodResult& r : report.methods) aucs[py::str(r.method)] = r.roc.auc;
    return aucs;
  }, py::arg("frames"), py::arg("truths"), py::arg("methods"), py::arg("hat") = HatParams{},
        "{method: AUC}");
}
