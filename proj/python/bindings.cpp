#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "smamba/checkpoint.hpp"
#include "smamba/cost.hpp"
#include "smamba/error.hpp"
#include "smamba/split.hpp"
#include "smamba/ssm.hpp"
#include "smamba/train.hpp"

namespace py = pybind11;
using namespace smamba;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;

data::HsiCube to_cube(const FloatArray& a) {
  if (a.ndim() != 3) throw DimensionError("cube must be an (H, W, L) array");
  data::HsiCube cube;
  cube.height = static_cast<std::size_t>(a.shape(0));
  cube.width = static_cast<std::size_t>(a.shape(1));
  cube.bands = static_cast<std::size_t>(a.shape(2));
  cube.reflectance.assign(a.data(), a.data() + a.size());
  cube.validate();
  return cube;
}

FloatArray from_cube(const data::HsiCube& cube) {
  FloatArray a({cube.height, cube.width, cube.bands});
  std::copy(cube.reflectance.begin(), cube.reflectance.end(), a.mutable_data());
  return a;
}

data::LabelMap to_labels(const LabelArray& a) {
  if (a.ndim() != 2) throw DimensionError("labels must be an (H, W) array");
  return {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
          std::vector<std::uint16_t>(a.data(), a.data() + a.size())};
}

LabelArray from_labels(const data::LabelMap& m) {
  LabelArray a({m.height, m.width});
  std::copy(m.labels.begin(), m.labels.end(), a.mutable_data());
  return a;
}

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> a(shape);
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

py::dict discrete_dict(const ssm::DiscreteSsm& d) {
  py::dict out;
  out["a_bar"] = d.a_bar;
  out["b_bar"] = d.b_bar;
  out["c"] = d.c;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SpectralMamba: selective state-space models for hyperspectral classification.";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (e.kind() + ": " + e.what()).c_str());
    }
  });

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("bands", &ModelConfig::bands)
      .def_readwrite("pieces", &ModelConfig::pieces)
      .def_readwrite("state", &ModelConfig::state)
      .def_readwrite("expand", &ModelConfig::expand)
      .def_readwrite("patch", &ModelConfig::patch)
      .def_readwrite("classes", &ModelConfig::classes)
      .def_readwrite("depth", &ModelConfig::depth)
      .def_readwrite("mamba", &ModelConfig::mamba)
      .def_property(
          "variant", [](const ModelConfig& c) { return variant_name(c.variant); },
          [](ModelConfig& c, const std::string& v) { c.variant = parse_variant(v); })
      .def_property_readonly("piece_len", &ModelConfig::piece_len)
      .def("validate", &ModelConfig::validate);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr0", &TrainConfig::lr0)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("step_epochs", &TrainConfig::step_epochs)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<data::SplitSpec>(m, "SplitSpec")
      .def(py::init<>())
      .def_readwrite("budget", &data::SplitSpec::budget)
      .def_readwrite("superpixels", &data::SplitSpec::superpixels)
      .def_readwrite("compactness", &data::SplitSpec::compactness)
      .def_readwrite("seed", &data::SplitSpec::seed)
      .def_readwrite("slic_iterations", &data::SplitSpec::slic_iterations);

  py::class_<ModelWeights>(m, "ModelWeights")
      .def("parameters", [](const ModelWeights& w) {
        py::dict out;
        for (const auto& [name, t] : w.parameters()) out[py::str(name)] = from_tensor(*t);
        return out;
      });

  py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
      .def(py::init<std::size_t, std::vector<std::uint64_t>>(), py::arg("classes"), py::arg("counts"))
      .def_property_readonly("classes", &ConfusionMatrix::classes)
      .def_property_readonly("counts", &ConfusionMatrix::counts)
      .def("total", &ConfusionMatrix::total);

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("oa", &Metrics::oa)
      .def_readonly("aa", &Metrics::aa)
      .def_readonly("kappa", &Metrics::kappa)
      .def_readonly("ca", &Metrics::ca)
      .def_readonly("confusion", &Metrics::confusion)
      .def_readonly("absent_classes", &Metrics::absent_classes);

  m.def("compute_metrics", &compute_metrics, py::arg("confusion"));

  m.def(
      "discretize_zoh",
      [](std::vector<double> a, std::vector<double> b, std::vector<double> c, double delta) {
        const auto z = ssm::discretize_zoh({std::move(a), std::move(b), std::move(c), delta, 0.0});
        py::dict d = discrete_dict(z.ssm);
        d["limit_entries"] = z.limit_entries;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("c"), py::arg("delta"));
  m.def(
      "discretize_taylor",
      [](std::vector<double> a, std::vector<double> b, std::vector<double> c, double delta) {
        return discrete_dict(ssm::discretize_taylor({std::move(a), std::move(b), std::move(c), delta, 0.0}));
      },
      py::arg("a"), py::arg("b"), py::arg("c"), py::arg("delta"));
  m.def(
      "recurrent_scan",
      [](std::vector<double> a_bar, std::vector<double> b_bar, std::vector<double> c, std::vector<double> x,
         std::vector<double> h0) {
        return ssm::recurrent_scan({std::move(a_bar), std::move(b_bar), std::move(c)}, x, h0);
      },
      py::arg("a_bar"), py::arg("b_bar"), py::arg("c"), py::arg("x"), py::arg("h0") = std::vector<double>{});
  m.def(
      "ssm_conv_kernel",
      [](std::vector<double> a_bar, std::vector<double> b_bar, std::vector<double> c, std::size_t length) {
        return ssm::ssm_conv_kernel({std::move(a_bar), std::move(b_bar), std::move(c)}, length);
      },
      py::arg("a_bar"), py::arg("b_bar"), py::arg("c"), py::arg("length"));
  m.def(
      "conv_scan", [](std::vector<double> x, std::vector<double> k) { return ssm::conv_scan(x, k); },
      py::arg("x"), py::arg("kernel"));

  m.def(
      "pss_scan",
      [](std::vector<double> spectrum, std::size_t pieces) {
        const auto flat = pss_scan(std::span<const double>(spectrum), pieces);
        py::array_t<double> out({flat.size() / pieces, pieces});
        std::copy(flat.begin(), flat.end(), out.mutable_data());
        return out;
      },
      py::arg("spectrum"), py::arg("pieces"));
  m.def(
      "pss_unscan",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& mat, std::size_t bands) {
        if (mat.ndim() != 2) throw DimensionError("pss_unscan: expected a 2-D matrix");
        return pss_unscan(std::span<const double>(mat.data(), mat.size()),
                          static_cast<std::size_t>(mat.shape(1)), bands);
      },
      py::arg("matrix"), py::arg("bands"));

  m.def(
      "synth_scene",
      [](std::size_t h, std::size_t w, std::size_t l, std::size_t k, double noise, std::uint64_t seed,
         double jitter) {
        data::SynthOptions o{h, w, l, k, noise, jitter, seed};
        const auto s = data::synth_scene(o);
        return py::make_tuple(from_cube(s.cube), from_labels(s.labels));
      },
      py::arg("h") = 32, py::arg("w") = 32, py::arg("l") = 48, py::arg("k") = 4, py::arg("noise") = 0.05,
      py::arg("seed") = 0, py::arg("jitter") = 0.2);

  m.def(
      "slic_segment",
      [](const FloatArray& cube, const data::SplitSpec& spec) {
        const auto seg = data::slic_segment(to_cube(cube), spec);
        py::array_t<std::uint32_t> out({seg.height, seg.width});
        std::copy(seg.ids.begin(), seg.ids.end(), out.mutable_data());
        return out;
      },
      py::arg("cube"), py::arg("spec"));
  m.def(
      "make_split",
      [](const LabelArray& labels, const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& ids,
         const data::SplitSpec& spec) {
        const auto lm = to_labels(labels);
        data::Segmentation seg{lm.height, lm.width, std::vector<std::uint32_t>(ids.data(), ids.data() + ids.size()), 0};
        const auto split = data::make_split(lm, seg, spec);
        return py::make_tuple(from_labels(split.train), from_labels(split.test));
      },
      py::arg("labels"), py::arg("segments"), py::arg("spec"));

  m.def("init_weights", &init_weights, py::arg("config"), py::arg("seed") = 0);
  m.def(
      "forward",
      [](const ModelConfig& cfg, const ModelWeights& w,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& input) {
        Graph g;
        const Tensor logits = forward(g, to_tensor(input), w, cfg);
        return logits.values();
      },
      py::arg("config"), py::arg("weights"), py::arg("input"));
  m.def(
      "predict", [](std::vector<double> logits) { return predict(logits); }, py::arg("logits"));

  m.def(
      "train",
      [](const ModelConfig& cfg, const FloatArray& cube, const LabelArray& labels, const TrainConfig& tcfg) {
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cfg, to_cube(cube), to_labels(labels), tcfg);
        }
        py::list log;
        for (const auto& e : r.log) log.append(py::make_tuple(e.epoch, e.loss, e.lr));
        return py::make_tuple(std::move(r.weights), log);
      },
      py::arg("config"), py::arg("cube"), py::arg("train_labels"), py::arg("train_config"));
  m.def(
      "evaluate",
      [](const ModelConfig& cfg, const ModelWeights& w, const FloatArray& cube, const LabelArray& labels,
         unsigned threads) { return evaluate(cfg, w, to_cube(cube), to_labels(labels), threads); },
      py::arg("config"), py::arg("weights"), py::arg("cube"), py::arg("test_labels"), py::arg("threads") = 1);
  m.def("lr_at", &lr_at, py::arg("epoch"), py::arg("train_config"));

  m.def(
      "count_params", [](const ModelWeights& w) { return count_params(w); }, py::arg("weights"));
  m.def(
      "count_params", [](const ModelConfig& cfg) { return count_params(layer_plan(cfg)); }, py::arg("config"));
  m.def(
      "count_macs", [](const ModelConfig& cfg, std::size_t batch) { return count_macs(cfg, batch); },
      py::arg("config"), py::arg("batch") = kCostBatch);
  m.def(
      "layer_plan",
      [](const ModelConfig& cfg) {
        py::list out;
        for (const auto& l : layer_plan(cfg)) {
          py::dict d;
          d["name"] = l.name;
          d["params"] = l.params;
          d["macs"] = l.macs;
          out.append(d);
        }
        return out;
      },
      py::arg("config"));

  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("config"), py::arg("weights"));
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& p) {
        auto ck = load_checkpoint(p);
        return py::make_tuple(ck.config, std::move(ck.weights));
      },
      py::arg("path"));
}
