#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "c2am/config.hpp"
#include "c2am/contrastive.hpp"
#include "c2am/dataset.hpp"
#include "c2am/disentangler.hpp"
#include "c2am/errors.hpp"
#include "c2am/metrics.hpp"
#include "c2am/model.hpp"
#include "c2am/pipeline.hpp"
#include "c2am/postprocess.hpp"
#include "c2am/refine.hpp"
#include "c2am/synthetic.hpp"
#include "c2am/trainer.hpp"

namespace py = pybind11;
using namespace c2am;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid<double> to_grid(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  Grid<double> g(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), g.values.begin());
  return g;
}

template <typename T>
py::array_t<T> from_grid(const Grid<T>& g) {
  py::array_t<T> out({g.height, g.width});
  std::copy(g.values.begin(), g.values.end(), out.mutable_data());
  return out;
}

std::vector<std::vector<double>> to_rows(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected an n x C array");
  std::vector<std::vector<double>> rows(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) rows[i].assign(a.data(i, 0), a.data(i, 0) + a.shape(1));
  return rows;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

BinaryMask to_mask(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d mask");
  BinaryMask m;
  m.pixels = Grid<std::uint8_t>(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t k = 0; k < a.size(); ++k) m.pixels.values[k] = a.data()[k] != 0;
  return m;
}

py::tuple box_tuple(const BoundingBox& b) { return py::make_tuple(b.xmin, b.ymin, b.xmax, b.ymax); }

BoundingBox box_from(const std::array<int, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

py::dict loss_dict(const LossBreakdown& l) {
  py::dict d;
  d["l_neg"] = l.l_neg;
  d["l_pos_f"] = l.l_pos_f;
  d["l_pos_b"] = l.l_pos_b;
  d["l_pos"] = l.l_pos;
  d["l_total"] = l.l_total;
  return d;
}

Config config_from(const std::map<std::string, std::string>& overrides) {
  Config cfg;
  apply_config_values(cfg, overrides);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contrastive class-agnostic activation maps: core operations.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  m.attr("DEFAULT_ALPHA") = kDefaultAlpha;

  m.def(
      "disentangle",
      [](const Array& z, const Array& p) {
        if (z.ndim() != 3) throw ShapeError("features must be C x H x W");
        FeatureMap fm(static_cast<int>(z.shape(0)), static_cast<int>(z.shape(1)), static_cast<int>(z.shape(2)));
        std::copy(z.data(), z.data() + z.size(), fm.values.begin());
        const auto rep = disentangle(fm, to_grid(p));
        return py::make_tuple(to_array(rep.foreground), to_array(rep.background));
      },
      py::arg("features"), py::arg("activation"));

  m.def(
      "cosine_sim",
      [](const std::vector<double>& a, const std::vector<double>& b) { return cosine_sim(a, b); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "negative_loss",
      [](const Array& fg, const Array& bg) { return negative_loss(to_rows(fg), to_rows(bg)); },
      py::arg("foreground"), py::arg("background"));
  m.def(
      "positive_loss", [](const Array& reps, double alpha) { return positive_loss(to_rows(reps), alpha); },
      py::arg("reps"), py::arg("alpha") = kDefaultAlpha);
  m.def(
      "rank_weights",
      [](const std::vector<double>& pairs, double alpha) { return rank_weights_for_pairs(pairs, alpha); },
      py::arg("pair_similarities"), py::arg("alpha") = kDefaultAlpha);
  m.def(
      "total_loss",
      [](const Array& fg, const Array& bg, double alpha) {
        return loss_dict(total_loss(to_rows(fg), to_rows(bg), alpha));
      },
      py::arg("foreground"), py::arg("background"), py::arg("alpha") = kDefaultAlpha);

  m.def(
      "binarize", [](const Array& p, double theta) { return from_grid(binarize(to_grid(p), theta).pixels); },
      py::arg("activation"), py::arg("theta") = kDefaultTheta);
  m.def(
      "largest_component",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask) {
        return from_grid(largest_component(to_mask(mask)).pixels);
      },
      py::arg("mask"));
  m.def(
      "extract_bbox",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask,
         std::pair<int, int> image) { return box_tuple(extract_bbox(to_mask(mask), {image.first, image.second})); },
      py::arg("mask"), py::arg("image_size"));
  m.def(
      "box_from_map",
      [](const Array& p, double theta, std::pair<int, int> image) {
        return box_tuple(box_from_map(to_grid(p), theta, {image.first, image.second}).box);
      },
      py::arg("activation"), py::arg("theta"), py::arg("image_size"));

  m.def(
      "box_iou", [](std::array<int, 4> a, std::array<int, 4> b) { return box_iou(box_from(a), box_from(b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "max_box_acc_v2",
      [](const std::vector<Array>& maps, const std::vector<std::vector<std::array<int, 4>>>& gts) {
        if (maps.size() != gts.size()) throw InputError("one GT list per map is required");
        std::vector<NamedMap> named;
        GtBoxTable table;
        for (std::size_t k = 0; k < maps.size(); ++k) {
          const std::string id = std::to_string(k);
          Grid<double> g = to_grid(maps[k]);
          const ImageSize size{g.height, g.width};
          named.push_back({id, std::move(g), size});
          for (const auto& b : gts[k]) table[id].push_back(box_from(b));
        }
        return max_box_acc_v2(named, table).score;
      },
      py::arg("maps"), py::arg("gt_boxes"));

  m.def(
      "refine_cam",
      [](const Array& cams, const std::vector<int>& class_ids, const Array& cue) {
        if (cams.ndim() != 3) throw ShapeError("cams must be K x H x W");
        CamStack stack;
        stack.class_ids = class_ids;
        const int h = static_cast<int>(cams.shape(1)), w = static_cast<int>(cams.shape(2));
        for (py::ssize_t k = 0; k < cams.shape(0); ++k) {
          Grid<double> g(h, w);
          std::copy(cams.data(k, 0, 0), cams.data(k, 0, 0) + h * w, g.values.begin());
          stack.maps.push_back(std::move(g));
        }
        return from_grid(refine_cam(stack, to_grid(cue)));
      },
      py::arg("cams"), py::arg("class_ids"), py::arg("background_cue"));

  m.def(
      "generate_synthetic",
      [](const std::filesystem::path& out, int n_train, int n_calib, int n_test, std::uint64_t seed, int size) {
        SyntheticOptions o;
        o.n_train = n_train;
        o.n_calib = n_calib;
        o.n_test = n_test;
        o.seed = seed;
        o.image_size = size;
        generate_synthetic(o, out);
      },
      py::arg("out_dir"), py::arg("n_train") = 256, py::arg("n_calib") = 32, py::arg("n_test") = 64,
      py::arg("seed") = 7, py::arg("image_size") = 64);

  m.def(
      "train",
      [](const std::filesystem::path& data_dir, const std::map<std::string, std::string>& overrides,
         const std::filesystem::path& checkpoint_dir) {
        Config cfg = config_from(overrides);
        cfg.data_dir = data_dir.string();
        const Dataset ds(data_dir);
        C2amModel model(cfg);
        TrainOptions opts;
        opts.checkpoint_dir = checkpoint_dir;
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(model, ds, opts);
        }
        py::list epochs;
        for (const auto& e : result.epochs) epochs.append(loss_dict(e.mean));
        return epochs;
      },
      py::arg("data_dir"), py::arg("overrides") = std::map<std::string, std::string>{},
      py::arg("checkpoint_dir") = std::filesystem::path{},
      "Trains on <data_dir>; returns the per-epoch mean losses.");

  m.def(
      "infer",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir, const std::string& split) {
        const LoadedCheckpoint loaded = load_checkpoint(checkpoint);
        const Dataset ds(data_dir);
        py::dict out;
        for (const auto& entry : infer_maps(*loaded.model, ds, ds.split_ids(split))) {
          out[py::str(entry.id)] = from_grid(upsample_to_image(entry));
        }
        return out;
      },
      py::arg("checkpoint"), py::arg("data_dir"), py::arg("split") = "test",
      "Activation maps at image resolution, keyed by image id.");
}
