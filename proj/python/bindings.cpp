#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "wildseg/clustering.hpp"
#include "wildseg/config.hpp"
#include "wildseg/edges.hpp"
#include "wildseg/eval.hpp"
#include "wildseg/pipeline.hpp"
#include "wildseg/render.hpp"
#include "wildseg/scene.hpp"
#include "wildseg/tracking.hpp"

namespace py = pybind11;
using namespace wildseg;

namespace {

template <class T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

Frame to_frame(const Array<std::uint8_t>& img) {
  if (img.ndim() != 3 || img.shape(2) != 3) throw py::value_error("image must be H x W x 3 uint8");
  Frame f(int(img.shape(1)), int(img.shape(0)));
  auto r = img.unchecked<3>();
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) f.at(x, y) = {r(y, x, 0), r(y, x, 1), r(y, x, 2)};
  return f;
}

template <class T>
Array<T> to_array(const Grid<T>& g) {
  Array<T> out({g.height, g.width});
  std::copy(g.data.begin(), g.data.end(), out.mutable_data());
  return out;
}

LabelGrid to_labels(const Array<std::int32_t>& a) {
  if (a.ndim() != 2) throw py::value_error("label grid must be 2-D");
  LabelGrid g(int(a.shape(1)), int(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), g.data.begin());
  return g;
}

edges::EdgeSet to_edges(const Array<int>& pts) {
  if (pts.ndim() != 2 || (pts.size() && pts.shape(1) != 2)) throw py::value_error("points must be N x 2 (x, y)");
  edges::EdgeSet s;
  auto r = pts.unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i) s.points.push_back({r(i, 0), r(i, 1)});
  return s;
}

tracking::FeatureMatrix to_features(const Array<double>& a) {
  if (a.ndim() != 2) throw py::value_error("features must be N x D");
  tracking::FeatureMatrix f;
  f.dim = int(a.shape(1));
  f.values.assign(a.data(), a.data() + a.size());
  for (int i = 0; i < int(a.shape(0)); ++i) f.row_ids.push_back(i);
  return f;
}

clustering::Assignment to_assignment(const std::vector<int>& labels) {
  std::vector<int> ids(labels.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = int(i);
  return clustering::canonicalize(ids, labels);
}

}  // namespace

PYBIND11_MODULE(_wildseg, m) {
  m.doc() = "Motion-based animal part segmentation";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "WildsegError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& cls = error_type.get_stored();
      py::object inst = cls(e.what());
      inst.attr("name") = e.name();
      PyErr_SetObject(cls.ptr(), inst.ptr());
    }
  });

  m.def(
      "detect_edges",
      [](const Array<std::uint8_t>& image, double sigma, std::optional<double> low, std::optional<double> high,
         double high_percentile, double low_ratio) {
        edges::CannyParams p;
        p.sigma = sigma;
        p.low = low;
        p.high = high;
        p.high_percentile = high_percentile;
        p.low_ratio = low_ratio;
        const auto e = edges::detect_edges(to_frame(image), p);
        Array<int> out({py::ssize_t(e.points.size()), py::ssize_t(2)});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < e.points.size(); ++i) w(i, 0) = e.points[i].x, w(i, 1) = e.points[i].y;
        return out;
      },
      py::arg("image"), py::arg("sigma") = 1.4, py::arg("low") = py::none(), py::arg("high") = py::none(),
      py::arg("high_percentile") = 0.9, py::arg("low_ratio") = 0.4,
      "Edge pixels of an H x W x 3 uint8 image as an N x 2 array of (x, y).");

  m.def(
      "match_edge_sets",
      [](const Array<int>& prev, const Array<int>& next, double gate) {
        std::vector<std::tuple<int, int, double>> out;
        for (const auto& c : tracking::match_edge_sets(to_edges(prev), to_edges(next), gate))
          out.emplace_back(c.index_prev, c.index_next, c.distance);
        return out;
      },
      py::arg("prev"), py::arg("next"), py::arg("gate"),
      "Greedy one-to-one correspondences (i, j, distance), shortest first.");

  m.def(
      "complete_linkage",
      [](const Array<double>& features) {
        const auto f = to_features(features);
        std::vector<std::tuple<int, int, double, int>> out;
        for (const auto& mg : clustering::complete_linkage(f).merges) out.emplace_back(mg.a, mg.b, mg.distance, mg.node);
        return out;
      },
      py::arg("features"), "Merges (a, b, distance, node) of the complete-linkage dendrogram.");

  m.def(
      "cluster",
      [](const Array<double>& features, int k) {
        const auto f = to_features(features);
        return clustering::cut(clustering::complete_linkage(f), clustering::CutCriterion::exact(k)).labels;
      },
      py::arg("features"), py::arg("k"), "Complete-linkage labels for each row, cut at exactly k clusters.");

  m.def(
      "adjusted_rand_index",
      [](const std::vector<int>& pred, const std::vector<int>& truth) {
        return eval::adjusted_rand_index(to_assignment(pred), to_assignment(truth));
      },
      py::arg("pred"), py::arg("truth"));

  m.def(
      "mean_log_likelihood",
      [](const Array<double>& features, const std::vector<int>& labels, double var_floor) {
        return eval::mean_log_likelihood(to_features(features), to_assignment(labels), var_floor);
      },
      py::arg("features"), py::arg("labels"), py::arg("var_floor") = 1e-4);

  m.def(
      "fill_between", [](const Array<std::int32_t>& grid) { return to_array(render::fill_between(to_labels(grid)).labels); },
      py::arg("grid"), "Fill background runs between equal labels along each row (-1 is background).");

  m.def(
      "generate_scene",
      [](const std::string& spec_json) {
        const auto s = eval::generate_scene(eval::scene_from_json(spec_json));
        const py::ssize_t t = s.sequence.frames.size(), h = s.sequence.frames[0].height,
                          w = s.sequence.frames[0].width;
        Array<std::uint8_t> frames({t, h, w, py::ssize_t(3)}), mattes({t, h, w});
        Array<std::int32_t> truth({t, h, w});
        auto* fp = frames.mutable_data();
        auto* mp = mattes.mutable_data();
        auto* tp = truth.mutable_data();
        for (py::ssize_t i = 0; i < t; ++i) {
          for (const auto& px : s.sequence.frames[i].data) *fp++ = px.r, *fp++ = px.g, *fp++ = px.b;
          mp = std::copy(s.mattes[i].data.begin(), s.mattes[i].data.end(), mp);
          tp = std::copy(s.truth[i].data.begin(), s.truth[i].data.end(), tp);
        }
        py::dict out;
        out["frames"] = frames;
        out["mattes"] = mattes;
        out["truth"] = truth;
        return out;
      },
      py::arg("spec_json"), "Render a scene spec (JSON text) to frames, mattes and truth labels.");

  m.def(
      "run",
      [](const std::string& config_path, std::optional<std::string> out_dir, std::optional<int> k, bool compare) {
        auto cfg = config::load(config_path);
        if (out_dir) cfg.out_dir = *out_dir;
        if (k) cfg.cut = clustering::CutCriterion::exact(*k);
        cfg.validate();
        std::ostringstream log;
        std::vector<std::tuple<std::string, bool, std::string>> out;
        {
          py::gil_scoped_release release;
          for (const auto& s : pipeline::Runner(cfg, compare, log).run_all())
            out.emplace_back(s.stage, s.cache_hit, s.summary);
        }
        return out;
      },
      py::arg("config_path"), py::arg("out_dir") = py::none(), py::arg("k") = py::none(),
      py::arg("compare_contrastive") = false, "Run every cached stage; returns (stage, cache_hit, summary) tuples.");
}
