#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sensalign/cli.hpp"
#include "sensalign/embedding_store.hpp"
#include "sensalign/error.hpp"
#include "sensalign/kernel.hpp"
#include "sensalign/neighbor_report.hpp"
#include "sensalign/sensory_axis.hpp"
#include "sensalign/stats.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IndexArray = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

sensalign::EmbeddingMatrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  std::vector<float> data(a.data(), a.data() + n * d);
  return sensalign::EmbeddingMatrix(n, d, std::move(data));
}

FloatArray from_matrix(const sensalign::EmbeddingMatrix& m) {
  FloatArray out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

sensalign::Kernel to_kernel(const DoubleArray& k) {
  if (k.ndim() != 2 || k.shape(0) != k.shape(1)) throw py::value_error("expected a square array");
  const auto n = static_cast<std::size_t>(k.shape(0));
  return sensalign::Kernel(n, std::vector<double>(k.data(), k.data() + n * n));
}

sensalign::NeighborIndex to_index(const IndexArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected an n x k array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto k = static_cast<std::size_t>(a.shape(1));
  for (std::size_t i = 0; i < n * k; ++i) {
    if (a.data()[i] >= n) throw py::value_error("neighbor index out of range");
  }
  return sensalign::NeighborIndex(n, k, std::vector<std::uint32_t>(a.data(), a.data() + n * k));
}

IndexArray from_index(const sensalign::NeighborIndex& idx) {
  IndexArray out({idx.n(), idx.k()});
  std::copy(idx.lists().begin(), idx.lists().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::dict curve_dict(const sensalign::DensityCurve& c) {
  return py::dict("grid"_a = to_array(c.grid), "density"_a = to_array(c.density),
                  "bandwidth"_a = c.bandwidth);
}

}  // namespace

PYBIND11_MODULE(_sensalign, m) {
  m.doc() = "Kernel alignment metrics between language-model and sensory-encoder embeddings";

  py::register_exception<sensalign::Error>(m, "SensalignError", PyExc_ValueError);

  m.def("load_matrix", [](const std::string& path) {
    const auto mat = sensalign::load_matrix(path);
    return py::make_tuple(from_matrix(mat), sensalign::meta_to_json(mat.meta()).dump());
  }, "path"_a, "Returns (array, metadata JSON text).");

  m.def("write_matrix", [](const std::string& path, const FloatArray& data,
                           const std::string& meta_json) {
    auto mat = to_matrix(data);
    mat.meta() = sensalign::meta_from_json(nlohmann::json::parse(meta_json));
    sensalign::write_matrix(mat, path);
  }, "path"_a, "data"_a, "meta_json"_a = "{}");

  m.def("cosine_kernel", [](const FloatArray& x) {
    const auto k = sensalign::cosine_kernel(to_matrix(x));
    DoubleArray out({k.n(), k.n()});
    std::copy(k.values().begin(), k.values().end(), out.mutable_data());
    return out;
  }, "x"_a);

  m.def("topk_neighbors", [](const DoubleArray& kernel, std::size_t k) {
    return from_index(sensalign::topk_neighbors(to_kernel(kernel), k));
  }, "kernel"_a, "k"_a = sensalign::kDefaultK);

  m.def("mutual_knn_alignment", [](const IndexArray& a, const IndexArray& b) {
    return sensalign::mutual_knn_alignment(to_index(a), to_index(b)).value;
  }, "a"_a, "b"_a);

  m.def("alignment", [](const FloatArray& a, const FloatArray& b, std::size_t k) {
    return sensalign::alignment(to_matrix(a), to_matrix(b), k).value;
  }, "a"_a, "b"_a, "k"_a = sensalign::kDefaultK);

  m.def("linear_cka", [](const FloatArray& x, const FloatArray& y) {
    return sensalign::linear_cka(to_matrix(x), to_matrix(y));
  }, "x"_a, "y"_a);

  m.def("bootstrap_alignment",
        [](const FloatArray& a, const FloatArray& b, std::size_t k, std::size_t replicates,
           std::uint64_t seed, std::size_t threads) {
          sensalign::BootstrapOptions opt{k, replicates, seed, threads, true};
          const auto ma = to_matrix(a);
          const auto mb = to_matrix(b);
          sensalign::BootstrapResult r;
          {
            py::gil_scoped_release release;
            r = sensalign::bootstrap_alignment(ma, mb, opt);
          }
          return py::dict("point_estimate"_a = r.point_estimate,
                          "standard_error"_a = r.standard_error,
                          "replicate_mean"_a = r.replicate_mean, "B"_a = r.replicates,
                          "seed"_a = r.seed, "k"_a = r.k, "n"_a = r.n,
                          "replicate_scores"_a = to_array(r.replicate_scores));
        },
        "a"_a, "b"_a, "k"_a = sensalign::kDefaultK, "replicates"_a = 1000, "seed"_a = 0,
        "threads"_a = 0);

  m.def("cohens_d", [](const std::vector<double>& a, const std::vector<double>& b) {
    return sensalign::cohens_d(a, b);
  }, "a"_a, "b"_a);

  m.def("auroc", [](const std::vector<double>& pos, const std::vector<double>& neg) {
    return sensalign::auroc(pos, neg);
  }, "pos"_a, "neg"_a);

  m.def("kde", [](const std::vector<double>& samples, std::size_t grid_points,
                  std::optional<double> bandwidth) {
    return curve_dict(sensalign::kde(samples, grid_points, bandwidth));
  }, "samples"_a, "grid_points"_a = sensalign::kDefaultGridPoints,
     "bandwidth"_a = py::none());

  m.def("fit_axis", [](const FloatArray& see, const FloatArray& hear) {
    const auto axis = sensalign::fit_axis(to_matrix(see), to_matrix(hear));
    return py::dict("direction"_a = to_array(axis.direction), "mu_see"_a = to_array(axis.mu_see),
                    "mu_hear"_a = to_array(axis.mu_hear), "delta_norm"_a = axis.delta_norm);
  }, "see"_a, "hear"_a);

  m.def("project", [](const FloatArray& x, const FloatArray& see, const FloatArray& hear) {
    const auto axis = sensalign::fit_axis(to_matrix(see), to_matrix(hear));
    return to_array(sensalign::project(to_matrix(x), axis));
  }, "x"_a, "see"_a, "hear"_a, "Projects x onto the axis fitted from see and hear.");

  m.def("separation_report",
        [](const FloatArray& see, const FloatArray& hear,
           const std::map<std::string, FloatArray>& extra, std::size_t grid_points) {
          std::map<std::string, sensalign::EmbeddingMatrix> extras;
          for (const auto& [name, x] : extra) extras.emplace(name, to_matrix(x));
          const auto r =
              sensalign::separation_report(to_matrix(see), to_matrix(hear), extras, grid_points);
          py::dict projections;
          py::dict curves;
          for (const auto& [name, s] : r.projections) projections[py::str(name)] = to_array(s);
          for (const auto& [name, c] : r.curves) curves[py::str(name)] = curve_dict(c);
          return py::dict("delta_mu"_a = r.delta_mu, "cohens_d"_a = r.cohens_d,
                          "auroc"_a = r.auroc, "delta_norm"_a = r.axis.delta_norm,
                          "projections"_a = projections, "curves"_a = curves);
        },
        "see"_a, "hear"_a, "extra"_a = std::map<std::string, FloatArray>{},
        "grid_points"_a = sensalign::kDefaultGridPoints);

  m.def("overlap_per_item", [](const IndexArray& llm, const IndexArray& ref) {
    std::vector<std::size_t> counts;
    for (const auto& o : sensalign::overlap_per_item(to_index(llm), to_index(ref))) {
      counts.push_back(o.overlap);
    }
    return counts;
  }, "llm"_a, "ref"_a);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> argv{"sensalign"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::ostringstream out;
    std::ostringstream err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = sensalign::run_cli(argv, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "args"_a, "Runs a sensalign subcommand; returns (exit code, stdout, stderr).");
}
