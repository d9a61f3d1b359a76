#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "sdsr/dataset.hpp"
#include "sdsr/dictionary_learning.hpp"
#include "sdsr/error.hpp"
#include "sdsr/evaluation.hpp"
#include "sdsr/imaging.hpp"
#include "sdsr/model_io.hpp"
#include "sdsr/sdsr.hpp"
#include "sdsr/sparse_coding.hpp"

namespace py = pybind11;
using sdsr::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// 1-D arrays become column vectors.
Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) {
    Matrix m(static_cast<std::size_t>(a.shape(0)), 1);
    std::copy_n(a.data(), a.size(), m.data().data());
    return m;
  }
  if (a.ndim() != 2) throw sdsr::InvalidInput("expected a 1-D or 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy_n(a.data(), a.size(), m.data().data());
  return m;
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy_n(m.data().data(), m.data().size(), out.mutable_data());
  return out;
}

Array column_result(const Matrix& m, bool flat) {
  if (!flat) return to_array(m);
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(m.rows())});
  std::copy_n(m.data().data(), m.rows(), out.mutable_data());
  return out;
}

sdsr::GrayImage to_image(const Array& a) {
  if (a.ndim() != 2) throw sdsr::InvalidInput("images are 2-D arrays (height, width)");
  std::vector<double> px(a.data(), a.data() + a.size());
  return sdsr::GrayImage(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)),
                         std::move(px));
}

Array image_array(const sdsr::GrayImage& img) {
  Array out({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

sdsr::LassoConfig lasso(double lambda, std::size_t max_iters, double tol) {
  sdsr::LassoConfig cfg;
  cfg.lambda = lambda;
  cfg.max_iters = max_iters;
  cfg.tol = tol;
  return cfg;
}

py::dict level_dict(const sdsr::LevelResult& r) {
  py::dict d;
  d["dictionary"] = to_array(r.dictionary.atoms());
  d["codes"] = to_array(r.codes);
  d["objective_trace"] = r.objective_trace;
  d["replacement_epochs"] = r.replacement_epochs;
  d["rejected_updates"] = r.rejected_updates;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sdsr, m) {
  m.doc() = "Deep sparse representation face synthesis";

  // Later registrations are tried first, so the subclasses win over the base.
  const auto base = py::register_exception<sdsr::Error>(m, "Error");
  py::register_exception<sdsr::InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<sdsr::NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<sdsr::FormatError>(m, "FormatError", base.ptr());
  py::register_exception<sdsr::IoError>(m, "IoError", base.ptr());

  m.attr("FORMAT_VERSION") = sdsr::kModelFormatVersion;

  // sparse coding
  m.def("soft_threshold", &sdsr::soft_threshold, py::arg("v"), py::arg("t"));
  m.def(
      "sparse_encode",
      [](const Array& d, const Array& x, double lambda, std::size_t max_iters, double tol) {
        const sdsr::Dictionary dict(to_matrix(d));
        const Matrix xs = to_matrix(x);
        return column_result(sdsr::sparse_encode_batch(dict, xs, lasso(lambda, max_iters, tol)),
                             x.ndim() == 1);
      },
      py::arg("dictionary"), py::arg("x"), py::arg("lam"), py::arg("max_iters") = 300,
      py::arg("tol") = 1e-6,
      "Lasso code of x (one signal, or one per column) against unit-norm atoms.");
  m.def(
      "lasso_objective",
      [](const Array& d, const Array& x, const Array& a, double lambda) {
        return sdsr::lasso_objective(sdsr::Dictionary(to_matrix(d)), to_matrix(x), to_matrix(a),
                                     lambda);
      },
      py::arg("dictionary"), py::arg("x"), py::arg("alpha"), py::arg("lam"));
  m.def(
      "lasso_certificate_violation",
      [](const Array& d, const Array& x, const Array& a, double lambda) {
        return sdsr::lasso_certificate_violation(sdsr::Dictionary(to_matrix(d)), to_matrix(x),
                                                 to_matrix(a), lambda);
      },
      py::arg("dictionary"), py::arg("x"), py::arg("alpha"), py::arg("lam"));

  // dictionary learning
  m.def(
      "learn_level",
      [](const Array& xs, std::size_t n_atoms, double lambda, std::size_t epochs,
         std::uint64_t seed) {
        sdsr::DictLearnConfig cfg;
        cfg.n_atoms = n_atoms;
        cfg.lambda = lambda;
        cfg.epochs = epochs;
        cfg.seed = seed;
        const Matrix data = to_matrix(xs);
        const auto r = [&] {
          py::gil_scoped_release release;
          return sdsr::learn_level(data, cfg);
        }();
        return level_dict(r);
      },
      py::arg("xs"), py::arg("n_atoms"), py::arg("lam"), py::arg("epochs") = 30,
      py::arg("seed") = 0);
  m.def(
      "learn_mapping",
      [](const Array& high, const Array& low, double lambda_m) {
        return to_array(sdsr::learn_mapping(to_matrix(high), to_matrix(low), lambda_m));
      },
      py::arg("codes_high"), py::arg("codes_low"), py::arg("lambda_m") = 1e-6);

  // model
  py::class_<sdsr::SdsrModel>(m, "Model")
      .def_property_readonly("levels", &sdsr::SdsrModel::levels)
      .def_property_readonly("lr_dim", [](const sdsr::SdsrModel& s) { return s.config.lr_dim; })
      .def_property_readonly("hr_dim", [](const sdsr::SdsrModel& s) { return s.config.hr_dim; })
      .def_property_readonly(
          "lr_shape",
          [](const sdsr::SdsrModel& s) {
            return py::make_tuple(s.config.lr_shape.height, s.config.lr_shape.width);
          })
      .def_property_readonly(
          "hr_shape",
          [](const sdsr::SdsrModel& s) {
            return py::make_tuple(s.config.hr_shape.height, s.config.hr_shape.width);
          })
      .def_property_readonly("mapping", [](const sdsr::SdsrModel& s) { return to_array(s.mapping); })
      .def_property_readonly("low_dicts",
                             [](const sdsr::SdsrModel& s) {
                               py::list out;
                               for (const auto& d : s.low_dicts) out.append(to_array(d.atoms()));
                               return out;
                             })
      .def_property_readonly("high_dicts",
                             [](const sdsr::SdsrModel& s) {
                               py::list out;
                               for (const auto& d : s.high_dicts) out.append(to_array(d.atoms()));
                               return out;
                             })
      .def_property_readonly("config_json",
                             [](const sdsr::SdsrModel& s) { return sdsr::config_to_json(s.config); })
      .def("to_bytes",
           [](const sdsr::SdsrModel& s) {
             const auto b = sdsr::serialize_model(s);
             return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
           })
      .def_static("from_bytes",
                  [](const py::bytes& data) {
                    const std::string s = data;
                    std::vector<std::uint8_t> b(s.begin(), s.end());
                    return sdsr::deserialize_model(b);
                  })
      .def("save", [](const sdsr::SdsrModel& s, const std::filesystem::path& p) {
        sdsr::write_model(s, p);
      })
      .def_static("load", &sdsr::read_model, py::arg("path"))
      .def("__eq__", [](const sdsr::SdsrModel& a, const sdsr::SdsrModel& b) { return a == b; });

  m.def(
      "train",
      [](const Array& xl, const Array& xh, std::vector<std::size_t> atoms, double lambda,
         std::size_t epochs, std::uint64_t seed, double lambda_m, py::object lr_shape,
         py::object hr_shape) {
        const Matrix low = to_matrix(xl), high = to_matrix(xh);
        auto cfg = sdsr::make_config(low.rows(), high.rows(), std::move(atoms), lambda, epochs, seed);
        cfg.lambda_m = lambda_m;
        if (!lr_shape.is_none()) {
          const auto hw = lr_shape.cast<std::pair<std::size_t, std::size_t>>();
          cfg.lr_shape = {hw.second, hw.first};
        }
        if (!hr_shape.is_none()) {
          const auto hw = hr_shape.cast<std::pair<std::size_t, std::size_t>>();
          cfg.hr_shape = {hw.second, hw.first};
        }
        sdsr::TrainResult r;
        {
          py::gil_scoped_release release;
          r = sdsr::train(low, high, cfg);
        }
        py::list low_levels, high_levels;
        for (const auto& l : r.low_levels) low_levels.append(level_dict(l));
        for (const auto& h : r.high_levels) high_levels.append(level_dict(h));
        py::dict info;
        info["low_levels"] = low_levels;
        info["high_levels"] = high_levels;
        info["warnings"] = r.warnings;
        return py::make_tuple(r.model, info);
      },
      py::arg("xl"), py::arg("xh"), py::arg("atoms") = std::vector<std::size_t>{100, 80},
      py::arg("lam") = 0.85, py::arg("epochs") = 30, py::arg("seed") = 0,
      py::arg("lambda_m") = 1e-6, py::arg("lr_shape") = py::none(),
      py::arg("hr_shape") = py::none(),
      "Trains both chains on paired columns and the code mapping. Returns (model, info).");
  m.def(
      "synthesize",
      [](const sdsr::SdsrModel& model, const Array& x, std::size_t max_iters, double tol) {
        const Matrix xs = to_matrix(x);
        Matrix out;
        {
          py::gil_scoped_release release;
          out = sdsr::synthesize_batch(model, xs, lasso(0.0, max_iters, tol));
        }
        return column_result(out, x.ndim() == 1);
      },
      py::arg("model"), py::arg("x_low"), py::arg("max_iters") = 300, py::arg("tol") = 1e-6,
      "High-resolution vector(s) for one low-resolution vector or one per column.");

  // imaging
  m.def("load_image", [](const std::filesystem::path& p) { return image_array(sdsr::load_image(p)); });
  m.def("save_image", [](const Array& img, const std::filesystem::path& p) {
    sdsr::save_image(to_image(img), p);
  });
  m.def(
      "bicubic_resize",
      [](const Array& img, std::size_t width, std::size_t height, bool box_prefilter) {
        return image_array(sdsr::bicubic_resize(
            to_image(img), width, height, box_prefilter ? sdsr::Prefilter::Box : sdsr::Prefilter::None));
      },
      py::arg("image"), py::arg("width"), py::arg("height"), py::arg("box_prefilter") = false);
  m.def("psnr", [](const Array& a, const Array& b) { return sdsr::psnr(to_image(a), to_image(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return sdsr::ssim(to_image(a), to_image(b)); });

  // dataset and evaluation
  m.def(
      "generate_toy_corpus",
      [](const std::filesystem::path& out_dir, std::size_t n_subjects, std::size_t hr_size,
         std::size_t lr_size, std::size_t probes_per_subject, double perturbation,
         std::uint64_t seed) {
        sdsr::ToyCorpusSpec spec;
        spec.n_subjects = n_subjects;
        spec.hr_size = hr_size;
        spec.lr_size = lr_size;
        spec.probes_per_subject = probes_per_subject;
        spec.perturbation = perturbation;
        spec.seed = seed;
        return sdsr::generate_toy_corpus(spec, out_dir).manifest_path;
      },
      py::arg("out_dir"), py::arg("n_subjects") = 40, py::arg("hr_size") = 24,
      py::arg("lr_size") = 6, py::arg("probes_per_subject") = 2, py::arg("perturbation") = 0.5,
      py::arg("seed") = 7, "Writes a procedural corpus and returns its manifest path.");
  m.def(
      "load_training_pairs",
      [](const std::filesystem::path& manifest, std::size_t lr_size) {
        const auto tp = sdsr::load_training_pairs(sdsr::load_manifest(manifest), lr_size);
        py::dict d;
        d["low"] = to_array(tp.low);
        d["high"] = to_array(tp.high);
        d["low_shape"] = py::make_tuple(tp.low_shape.height, tp.low_shape.width);
        d["high_shape"] = py::make_tuple(tp.high_shape.height, tp.high_shape.width);
        d["subject_ids"] = tp.subject_ids;
        return d;
      },
      py::arg("manifest"), py::arg("lr_size") = 0,
      "Gallery columns and their bicubic downsamples; lr_size 0 follows the probes.");
  m.def(
      "evaluate",
      [](const sdsr::SdsrModel& model, const std::filesystem::path& manifest,
         std::set<std::string> baselines, std::vector<std::size_t> ranks, bool resize_probes) {
        sdsr::EvalOptions opt;
        opt.baselines = std::move(baselines);
        opt.ranks = std::move(ranks);
        opt.resize_probes = resize_probes;
        const auto man = sdsr::load_manifest(manifest);
        sdsr::EvalReport rep;
        {
          py::gil_scoped_release release;
          rep = sdsr::evaluate_pipeline(model, man, opt);
        }
        return py::module_::import("json").attr("loads")(sdsr::report_json(rep));
      },
      py::arg("model"), py::arg("manifest"),
      py::arg("baselines") = std::set<std::string>{"bicubic"},
      py::arg("ranks") = std::vector<std::size_t>{}, py::arg("resize_probes") = false,
      "Identification and image-quality report as a dict.");
}
