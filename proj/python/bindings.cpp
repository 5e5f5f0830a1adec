#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "repdyn/coherence.hpp"
#include "repdyn/error.hpp"
#include "repdyn/imbalance.hpp"
#include "repdyn/lowlevel.hpp"
#include "repdyn/probes.hpp"
#include "repdyn/stats.hpp"
#include "repdyn/synth.hpp"

namespace py = pybind11;
using namespace repdyn;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

EmbeddingMatrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw UsageError("expected a 2-d array of shape (n_points, dim)");
  const auto n = static_cast<std::size_t>(a.shape(0)), d = static_cast<std::size_t>(a.shape(1));
  return EmbeddingMatrix(n, d, std::vector<float>(a.data(), a.data() + n * d));
}

py::array_t<float> to_array(const EmbeddingMatrix& m) {
  py::array_t<float> out({m.n_points(), m.dim()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

ImageRaster to_image(const ByteArray& a) {
  ImageRaster img;
  if (a.ndim() == 2) {
    img.channels = 1;
  } else if (a.ndim() == 3 && a.shape(2) == 3) {
    img.channels = 3;
  } else {
    throw UsageError("expected an image of shape (h, w) or (h, w, 3)");
  }
  img.height = static_cast<std::size_t>(a.shape(0));
  img.width = static_cast<std::size_t>(a.shape(1));
  img.samples.assign(a.data(), a.data() + a.size());
  return img;
}

std::vector<py::array_t<float>> to_arrays(std::span<const EmbeddingMatrix> ms) {
  std::vector<py::array_t<float>> out;
  for (const auto& m : ms) out.push_back(to_array(m));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  // UsageError derives from std::invalid_argument and so surfaces as ValueError.
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  m.def(
      "information_imbalance",
      [](const FloatArray& a, const FloatArray& b, const std::string& metric) {
        return information_imbalance(to_matrix(a), to_matrix(b), parse_metric(metric));
      },
      py::arg("a"), py::arg("b"), py::arg("metric") = "euclidean",
      "Information imbalance from space a to space b (rows aligned).");
  m.def(
      "imbalance_both",
      [](const FloatArray& a, const FloatArray& b, const std::string& metric) {
        const auto r = imbalance_both(to_matrix(a), to_matrix(b), parse_metric(metric));
        return py::make_tuple(r.delta_ab, r.delta_ba);
      },
      py::arg("a"), py::arg("b"), py::arg("metric") = "euclidean", "Both directions as (a->b, b->a).");
  m.def("imbalance_range_checks", &imbalance_range_checks);
  m.def("anchor_layers", [](std::size_t layer_count, const std::string& rule) {
    return anchor_layers(layer_count, parse_anchor_rule(rule));
  }, py::arg("layer_count"), py::arg("rule") = "three");
  m.def("smoothness", [](std::vector<double> s) { return smoothness(s); });
  m.def("roughness", [](std::vector<double> s) { return roughness(s); });
  m.def("population_std", [](std::vector<double> s) { return population_std(s); });
  m.def("spearman", [](std::vector<double> x, std::vector<double> y) { return spearman(x, y); });

  m.def(
      "k_nearest",
      [](const FloatArray& a, std::size_t query, std::size_t k, const std::string& metric) {
        return k_nearest(to_matrix(a), query, k, parse_metric(metric));
      },
      py::arg("a"), py::arg("query"), py::arg("k"), py::arg("metric") = "euclidean");
  m.def(
      "rank_of",
      [](const FloatArray& a, std::size_t query, std::size_t target, const std::string& metric) {
        return rank_of(to_matrix(a), query, target, parse_metric(metric));
      },
      py::arg("a"), py::arg("query"), py::arg("target"), py::arg("metric") = "euclidean");
  m.def("set_num_threads", &set_num_threads);
  m.def("jaccard", &jaccard);

  m.def("edge_density", [](const ByteArray& img) { return edge_density(to_image(img)); });
  m.def("color_warmth", [](const ByteArray& img) { return color_warmth(to_image(img)); });
  m.def("texture_complexity", [](const ByteArray& img) { return texture_complexity(to_image(img)); });
  m.def("analytic_baseline", [](std::vector<CategoryMask> masks) { return analytic_baseline(masks); });

  m.def(
      "probe_accuracy",
      [](const FloatArray& x, std::vector<std::uint8_t> labels, std::size_t epochs, std::uint64_t seed) {
        ProbeHyperparams hp;
        hp.epochs = epochs;
        hp.seed = seed;
        return train_probe(to_matrix(x), labels, hp).heldout_accuracy;
      },
      py::arg("x"), py::arg("labels"), py::arg("epochs") = 500, py::arg("seed") = 0,
      "Heldout accuracy of a binary linear probe.");

  m.def("gen_gaussian", [](std::size_t n, std::size_t d, std::uint64_t seed) {
    return to_array(gen_gaussian(n, d, seed));
  });
  m.def("gen_noisy_copy", [](const FloatArray& a, double sigma, std::uint64_t seed) {
    return to_array(gen_noisy_copy(to_matrix(a), sigma, seed));
  });
  m.def("gen_two_process", [](std::size_t n, std::uint64_t seed) {
    const auto tp = gen_two_process(n, seed);
    return py::make_tuple(to_arrays(tp.a), to_arrays(tp.b));
  });
  m.def(
      "gen_drift_stack",
      [](std::size_t n, std::size_t d, std::size_t layers, double step, std::uint64_t seed, std::uint64_t walk_seed) {
        return to_arrays(gen_drift_stack(n, d, layers, step, seed, walk_seed, "drift"));
      },
      py::arg("n"), py::arg("dim"), py::arg("layers"), py::arg("step"), py::arg("seed"), py::arg("walk_seed"));

  m.def(
      "read_embeddings",
      [](const std::filesystem::path& path) {
        const auto mat = read_embeddings(path);
        return py::make_tuple(to_array(mat), mat.layer().model_name, mat.layer().layer_index,
                              mat.layer().layer_count);
      },
      "Returns (array, model, layer_index, layer_count).");
  m.def(
      "write_embeddings",
      [](const FloatArray& a, const std::filesystem::path& path, const std::string& model, std::size_t layer_index,
         std::size_t layer_count) {
        auto mat = to_matrix(a);
        mat.set_layer(LayerRef{model, layer_index, layer_count});
        write_embeddings(mat, path);
      },
      py::arg("array"), py::arg("path"), py::arg("model"), py::arg("layer_index"), py::arg("layer_count"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        py::print(out.str(), py::arg("end") = "");
        if (!err.str().empty())
          py::print(err.str(), py::arg("end") = "", py::arg("file") = py::module_::import("sys").attr("stderr"));
        return code;
      },
      "Runs the command-line tool in-process; args[0] is the program name.");
}
