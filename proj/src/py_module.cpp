// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hlf/diffopt.hpp"
#include "hlf/error.hpp"
#include "hlf/insertion.hpp"
#include "hlf/io.hpp"
#include "hlf/lightfield.hpp"
#include "hlf/sky.hpp"

namespace py = pybind11;
using namespace hlf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const RgbImage& img) {
  Array out({img.height(), img.width(), 3});
  auto v = out.mutable_unchecked<3>();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) v(y, x, c) = img.at(x, y)[c];
  return out;
}

Array to_numpy(const ScalarImage& img) {
  Array out({img.height(), img.width()});
  auto v = out.mutable_unchecked<2>();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) v(y, x) = img.at(x, y);
  return out;
}

RgbImage rgb_from_numpy(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ValidationError("expected an array of shape (H, W, 3)");
  const auto v = a.unchecked<3>();
  RgbImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.at(x, y) = Rgb(v(y, x, 0), v(y, x, 1), v(y, x, 2));
  return img;
}

ScalarImage scalar_from_numpy(const Array& a) {
  if (a.ndim() != 2) throw ValidationError("expected an array of shape (H, W)");
  const auto v = a.unchecked<2>();
  ScalarImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.at(x, y) = v(y, x);
  return img;
}

Vec3 vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
std::array<double, 3> arr(const Vec3& v) { return {v.x, v.y, v.z}; }
std::array<double, 3> arr(const Rgb& c) { return {c.r, c.g, c.b}; }

RunOverrides overrides(std::optional<std::string> quality, std::optional<std::uint64_t> seed,
                       std::optional<int> threads) {
  RunOverrides ov;
  if (quality) ov.quality = parse_quality(*quality);
  ov.seed = seed;
  ov.threads = threads;
  return ov;
}

py::dict trace_dict(const std::vector<FitTraceRow>& trace) {
  std::vector<int> it;
  std::vector<double> recon, transmit, reg, depth, insert, total;
  for (const auto& r : trace) {
    it.push_back(r.iteration);
    recon.push_back(r.recon);
    transmit.push_back(r.transmit);
    reg.push_back(r.reg);
    depth.push_back(r.depth);
    insert.push_back(r.insert);
    total.push_back(r.total);
  }
  py::dict d;
  d["iteration"] = it;
  d["recon"] = recon;
  d["transmit"] = transmit;
  d["reg"] = reg;
  d["depth"] = depth;
  d["insert"] = insert;
  d["total"] = total;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid sky + volumetric light field: rendering, object insertion and fitting";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<HybridLightField>(m, "LightField")
      .def_property_readonly("grid_dims", [](const HybridLightField& lf) {
        const GridDims& d = lf.grid.dims();
        return std::array<int, 3>{d.x, d.y, d.z};
      })
      .def_property(
          "peak_dir", [](const HybridLightField& lf) { return arr(lf.sky.peak_dir); },
          [](HybridLightField& lf, const std::array<double, 3>& d) {
            lf.sky.peak_dir = normalize(vec(d));
            lf.validate();
          })
      .def_property(
          "peak_intensity", [](const HybridLightField& lf) { return arr(lf.sky.peak_intensity); },
          [](HybridLightField& lf, const std::array<double, 3>& c) {
            lf.sky.peak_intensity = Rgb(c[0], c[1], c[2]);
            lf.validate();
          })
      .def_property_readonly("sharpness", [](const HybridLightField& lf) { return lf.sky.sharpness; })
      .def_property(
          "background", [](const HybridLightField& lf) { return to_numpy(lf.sky.background); },
          [](HybridLightField& lf, const Array& a) {
            lf.sky.background = rgb_from_numpy(a);
            lf.validate();
          })
      .def_readwrite("samples_per_ray", &HybridLightField::samples_per_ray)
      .def("radiance",
           [](const HybridLightField& lf, const std::array<double, 3>& x, const std::array<double, 3>& l) {
             return arr(lf.radiance(vec(x), normalize(vec(l))));
           },
           py::arg("x"), py::arg("direction"))
      .def("transmittance",
           [](const HybridLightField& lf, const std::array<double, 3>& x, const std::array<double, 3>& l) {
             return lf.transmittance(vec(x), normalize(vec(l)));
           },
           py::arg("x"), py::arg("direction"))
      .def("bake_envmap",
           [](const HybridLightField& lf, const std::array<double, 3>& x, int height, int width) {
             return to_numpy(lf.bake_envmap(vec(x), width, height));
           },
           py::arg("x"), py::arg("height") = kDefaultSkyHeight, py::arg("width") = kDefaultSkyWidth)
      .def("scale_radiance", [](HybridLightField& lf, double k) { scale_radiance(lf, k); })
      .def("__copy__", [](const HybridLightField& lf) { return lf; });

  m.def("analytic_lighting",
        [](const std::array<double, 3>& sun_dir, double sun_intensity, double sharpness, double background,
           int height, int width) {
          AnalyticLighting a;
          a.sun_dir = vec(sun_dir);
          a.sun_intensity = Rgb(sun_intensity);
          a.sharpness = sharpness;
          a.background = Rgb(background);
          a.height = height;
          a.width = width;
          return analytic_lighting(a);
        },
        py::arg("sun_dir"), py::arg("sun_intensity") = 20.0, py::arg("sharpness") = kDefaultSunSharpness,
        py::arg("background") = 0.5, py::arg("height") = kDefaultSkyHeight,
        py::arg("width") = kDefaultSkyWidth);

  m.def("read_hlf", [](const fs::path& p) { return read_hlf(p); });
  m.def("write_hlf", [](const fs::path& p, const HybridLightField& lf) { write_hlf(p, lf); });
  m.def("read_hdr", [](const fs::path& p) { return to_numpy(read_hdr(p)); });
  m.def("write_hdr", [](const fs::path& p, const Array& a) { write_hdr(p, rgb_from_numpy(a)); });
  m.def("read_png", [](const fs::path& p) { return to_numpy(read_png(p)); });
  m.def("read_pfm", [](const fs::path& p) { return to_numpy(read_pfm(p)); });
  m.def("write_pfm", [](const fs::path& p, const Array& a) {
    if (a.ndim() == 2) write_pfm(p, scalar_from_numpy(a));
    else write_pfm(p, rgb_from_numpy(a));
  });

  m.def("tonemap",
        [](const Array& hdr, double gamma, double tau) {
          ToneMapParams t;
          t.gamma = gamma;
          t.tau = tau;
          return to_numpy(hdr_to_ldr(rgb_from_numpy(hdr), t));
        },
        py::arg("hdr"), py::arg("gamma") = 2.2, py::arg("tau") = 0.95);

  m.def("insert",
        [](const fs::path& scene, std::optional<std::string> quality, std::optional<std::uint64_t> seed,
           std::optional<int> threads) {
          const LoadedScene ls = load_scene(load_scene_config(scene), overrides(quality, seed, threads));
          InsertionResult r;
          {
            py::gil_scoped_release release;
            r = render_insertion(ls.lf, ls.scene, ls.cfg);
          }
          py::dict d;
          d["composite"] = to_numpy(r.composite);
          d["foreground"] = to_numpy(r.foreground);
          d["mask"] = to_numpy(r.mask);
          d["shadow"] = to_numpy(r.shadow_full);
          d["input"] = to_numpy(ls.scene.background);
          return d;
        },
        py::arg("scene"), py::arg("quality") = py::none(), py::arg("seed") = py::none(),
        py::arg("threads") = py::none(),
        "Render the object insertion described by a scene JSON file.");

  m.def("scene_lighting",
        [](const fs::path& scene) { return load_scene(load_scene_config(scene)).lf; },
        "Light field referenced by a scene JSON file.");

  m.def("grad_check",
        [](std::uint64_t seed, int random_directions) {
          GradCheckOptions opt;
          opt.seed = seed;
          opt.random_directions = random_directions;
          GradCheckReport r;
          {
            py::gil_scoped_release release;
            r = grad_check(make_tiny_scene(seed), opt);
          }
          py::dict d;
          d["checked"] = r.checked;
          d["skipped"] = r.skipped;
          d["max_rel_err"] = r.max_rel_err;
          d["max_abs_err"] = r.max_abs_err;
          d["worst_param"] = r.worst_param;
          d["pass"] = r.pass;
          return d;
        },
        py::arg("seed") = 0, py::arg("random_directions") = 4,
        "Finite-difference check of every lighting adjoint on a tiny random scene.");

  m.def("fit",
        [](const fs::path& observations, std::optional<fs::path> config, const std::string& init,
           std::optional<std::uint64_t> seed, std::optional<int> iterations) {
          const RunOverrides ov = overrides(std::nullopt, seed, std::nullopt);
          FitConfig cfg = config ? load_fit_config(*config, ov) : parse_fit_config("{}", "<defaults>", ov);
          if (iterations) cfg.iterations = *iterations;
          cfg.validate();
          const ObservationSet set = load_observations(observations, ov);
          HybridLightField lf0;
          if (init == "random") lf0 = random_lighting(set.lighting_template, cfg.seed, cfg.trainable.volume);
          else if (init == "seeded") lf0 = seeded_lighting(set);
          else throw ValidationError("init must be 'random' or 'seeded'");
          FitResult r;
          {
            py::gil_scoped_release release;
            r = fit(std::move(lf0), set.observations, cfg);
          }
          return py::make_tuple(r.lf, trace_dict(r.trace));
        },
        py::arg("observations"), py::arg("config") = py::none(), py::arg("init") = "random",
        py::arg("seed") = py::none(), py::arg("iterations") = py::none(),
        "Fit a light field to an observation set; returns (light_field, trace).");

  m.def("angular_error_deg", [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return angular_loss(normalize(vec(a)), normalize(vec(b))) * 180.0 / kPi;
  });
}
