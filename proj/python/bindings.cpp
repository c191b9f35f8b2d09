// Python bindings for the core operations: geometry, metrics, synthetic-shape
// generation, file I/O, and checkpointed inference. Clouds cross the boundary
// as lists of [x, y, z] rows; images as [h][w][3] nested lists in [0, 1].

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <memory>
#include <vector>

#include "dmfnet/dataio.hpp"
#include "dmfnet/geometry.hpp"
#include "dmfnet/metrics.hpp"
#include "dmfnet/model.hpp"

namespace py = pybind11;
using namespace dmfnet;

namespace {

using Rows = std::vector<std::array<double, 3>>;
using Image = std::vector<std::vector<std::array<double, 3>>>;

Tensor cloud_in(const Rows& rows) {
  Tensor t({static_cast<int64_t>(rows.size()), 3});
  for (size_t i = 0; i < rows.size(); ++i)
    for (int64_t c = 0; c < 3; ++c) t.at(static_cast<int64_t>(i), c) = rows[i][static_cast<size_t>(c)];
  return t;
}

Rows cloud_out(const Tensor& t) {
  Rows rows(static_cast<size_t>(t.dim(0)));
  for (int64_t i = 0; i < t.dim(0); ++i)
    for (int64_t c = 0; c < 3; ++c) rows[static_cast<size_t>(i)][static_cast<size_t>(c)] = t.at(i, c);
  return rows;
}

Tensor image_in(const Image& img) {
  const int64_t h = static_cast<int64_t>(img.size());
  if (h == 0) shape_error("image must be non-empty");
  const int64_t w = static_cast<int64_t>(img[0].size());
  Tensor t({h, w, 3});
  for (int64_t y = 0; y < h; ++y) {
    if (static_cast<int64_t>(img[static_cast<size_t>(y)].size()) != w)
      shape_error("image rows must all have the same width");
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        t.at(y, x, c) = img[static_cast<size_t>(y)][static_cast<size_t>(x)][static_cast<size_t>(c)];
  }
  return t;
}

Image image_out(const Tensor& t) {
  Image img(static_cast<size_t>(t.dim(0)));
  for (int64_t y = 0; y < t.dim(0); ++y) {
    img[static_cast<size_t>(y)].resize(static_cast<size_t>(t.dim(1)));
    for (int64_t x = 0; x < t.dim(1); ++x)
      for (int64_t c = 0; c < 3; ++c)
        img[static_cast<size_t>(y)][static_cast<size_t>(x)][static_cast<size_t>(c)] = t.at(y, x, c);
  }
  return img;
}

std::vector<int64_t> index_out(const IndexArray& idx) {
  return std::vector<int64_t>(idx.vec().begin(), idx.vec().end());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core operations of the image-guided point-cloud completion pipeline";

  // --- geometry -------------------------------------------------------------
  m.def(
      "fps", [](const Rows& cloud, int64_t count) { return index_out(fps(cloud_in(cloud), count)); },
      py::arg("cloud"), py::arg("count"),
      "Farthest-point-sampling indices (greedy from index 0, ties to the smaller index)");
  m.def(
      "knn",
      [](const Rows& query, const Rows& ref, int64_t k) {
        const IndexArray idx = knn(cloud_in(query), cloud_in(ref), k);
        std::vector<std::vector<int64_t>> out(static_cast<size_t>(idx.dim(0)));
        for (int64_t i = 0; i < idx.dim(0); ++i)
          for (int64_t j = 0; j < idx.dim(1); ++j) out[static_cast<size_t>(i)].push_back(idx.at(i, j));
        return out;
      },
      py::arg("query"), py::arg("ref"), py::arg("k"),
      "k nearest reference rows per query row, ascending by squared distance");
  m.def(
      "pairwise_sq_dist",
      [](const Rows& a, const Rows& b) {
        const Tensor d = pairwise_sq_dist(cloud_in(a), cloud_in(b));
        std::vector<std::vector<double>> out(static_cast<size_t>(d.dim(0)));
        for (int64_t i = 0; i < d.dim(0); ++i)
          for (int64_t j = 0; j < d.dim(1); ++j) out[static_cast<size_t>(i)].push_back(d.at(i, j));
        return out;
      },
      py::arg("a"), py::arg("b"));

  // --- metrics ----------------------------------------------------------------
  m.def(
      "chamfer_l1", [](const Rows& y, const Rows& gt) { return cd_l1(cloud_in(y), cloud_in(gt)); },
      py::arg("y"), py::arg("gt"), "Two-sided mean of Euclidean nearest-neighbour distances");
  m.def(
      "chamfer_l2", [](const Rows& y, const Rows& gt) { return cd_l2(cloud_in(y), cloud_in(gt)); },
      py::arg("y"), py::arg("gt"), "Two-sided mean of squared nearest-neighbour distances");
  m.def(
      "f_score",
      [](const Rows& y, const Rows& gt, double tau) { return f_score(cloud_in(y), cloud_in(gt), tau); },
      py::arg("y"), py::arg("gt"), py::arg("tau") = 0.01);

  // --- synthetic shapes -------------------------------------------------------
  m.def(
      "make_shape",
      [](const std::string& kind, int64_t n, uint64_t seed) {
        RandomStream rng(seed);
        return cloud_out(gen_primitive(kind, n, rng));
      },
      py::arg("kind"), py::arg("n"), py::arg("seed") = 1,
      "Area-uniform sample of a sphere, box, or cylinder scaled to the unit sphere");
  m.def(
      "silhouette",
      [](const Rows& cloud, const std::array<double, 3>& view, int64_t size) {
        return image_out(render_silhouette(cloud_in(cloud), view, size, size));
      },
      py::arg("cloud"), py::arg("view"), py::arg("size"),
      "Orthographic binary silhouette of a cloud from a unit view direction");

  // --- file I/O -----------------------------------------------------------------
  m.def(
      "save_ply", [](const std::string& path, const Rows& cloud) { save_ply(path, cloud_in(cloud)); },
      py::arg("path"), py::arg("cloud"));
  m.def(
      "load_ply", [](const std::string& path) { return cloud_out(load_ply(path)); }, py::arg("path"));
  m.def(
      "save_pnm", [](const std::string& path, const Image& img) { save_pnm(path, image_in(img)); },
      py::arg("path"), py::arg("image"));
  m.def(
      "load_pnm", [](const std::string& path) { return image_out(load_pnm(path)); }, py::arg("path"));

  // --- configuration + model -----------------------------------------------------
  py::class_<NetConfig>(m, "NetConfig")
      .def(py::init<>())
      .def_static("paper", &NetConfig::paper)
      .def_static("toy", &NetConfig::toy)
      .def("validate", &NetConfig::validate)
      .def_readwrite("n", &NetConfig::n)
      .def_readwrite("n0", &NetConfig::n0)
      .def_readwrite("channels", &NetConfig::channels)
      .def_readwrite("c_local", &NetConfig::c_local)
      .def_readwrite("c_enh", &NetConfig::c_enh)
      .def_readwrite("c_ncb", &NetConfig::c_ncb)
      .def_readwrite("image_size", &NetConfig::image_size)
      .def_readwrite("image_stages", &NetConfig::image_stages)
      .def_readwrite("heads", &NetConfig::heads)
      .def_readwrite("ratio", &NetConfig::ratio)
      .def_readwrite("k_edge", &NetConfig::k_edge)
      .def_readwrite("pool_ratio", &NetConfig::pool_ratio)
      .def_readwrite("k_pool1", &NetConfig::k_pool1)
      .def_readwrite("k_pool2", &NetConfig::k_pool2)
      .def_readwrite("k_ncb", &NetConfig::k_ncb)
      .def_readwrite("sat_blocks", &NetConfig::sat_blocks)
      .def_readwrite("ec1_width", &NetConfig::ec1_width)
      .def_readwrite("ec2_width", &NetConfig::ec2_width)
      .def_readwrite("f_tau", &NetConfig::f_tau)
      .def_property_readonly("seed_points", &NetConfig::seed_points)
      .def_property_readonly("n1", &NetConfig::n1)
      .def_property_readonly("nc", &NetConfig::nc);

  py::class_<CompletionModel>(m, "CompletionModel")
      .def(py::init<const NetConfig&, uint64_t>(), py::arg("config"), py::arg("seed") = 1)
      .def(
          "load_checkpoint",
          [](CompletionModel& self, const std::string& path) {
            load_checkpoint(path, self.params(), nullptr, nullptr);
          },
          py::arg("path"))
      .def(
          "complete",
          [](const CompletionModel& self, const Rows& partial, const Image& image) {
            const CompletionModel::Stages s = self.complete(cloud_in(partial), image_in(image));
            py::dict out;
            out["coarse"] = cloud_out(s.p0);
            out["seed"] = cloud_out(s.seed);
            out["intermediate"] = cloud_out(s.p1);
            out["final"] = cloud_out(s.pc);
            return out;
          },
          py::arg("partial"), py::arg("image"),
          "Run the full pipeline; returns every stage as lists of [x, y, z] rows")
      .def_property_readonly("parameter_count",
                             [](const CompletionModel& self) { return self.params().total_values(); });
}
