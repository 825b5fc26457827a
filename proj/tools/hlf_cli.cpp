// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

// hlf: object insertion, light-field baking, probing, fitting and gradient checks.
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hlf/diffopt.hpp"
#include "hlf/io.hpp"

namespace {

using namespace hlf;

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

std::vector<double> split_numbers(const std::string& s, char sep, std::size_t n, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string("bad ") + what + " '" + s + "'");
    }
  }
  if (out.size() != n) throw ValidationError(std::string("bad ") + what + " '" + s + "'");
  return out;
}

Vec3 parse_point(const std::string& s) {
  const auto v = split_numbers(s, ',', 3, "point (expected x,y,z)");
  return {v[0], v[1], v[2]};
}

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string quality;
  bool seed_set = false;

  RunOverrides overrides() const {
    RunOverrides ov;
    if (!quality.empty()) ov.quality = parse_quality(quality);
    if (seed_set) ov.seed = seed;
    ov.threads = threads;
    return ov;
  }
};

int run_insert(const Globals& g, const std::string& scene_path, const fs::path& out_dir) {
  const SceneConfig sc = load_scene_config(scene_path);
  const LoadedScene ls = load_scene(sc, g.overrides());
  std::printf("insert: %dx%d image, %zu triangles, seed %llu\n", ls.scene.camera.width,
              ls.scene.camera.height, ls.scene.object.mesh.triangles.size(),
              static_cast<unsigned long long>(ls.cfg.seed));
  const InsertionResult r = render_insertion(ls.lf, ls.scene, ls.cfg);
  for (const Rgb& p : r.composite.pixels())
    if (!is_finite(p)) throw NumericalError("insert: non-finite composite pixel");
  fs::create_directories(out_dir);
  write_png(out_dir / "input.png", ls.scene.background);
  write_hdr(out_dir / "foreground.hdr", r.foreground);
  RgbImage fg_ldr = hdr_to_ldr(r.foreground, ls.cfg.tone);
  for (std::size_t i = 0; i < fg_ldr.size(); ++i) fg_ldr[i] *= r.mask[i];
  write_png(out_dir / "foreground.png", fg_ldr);
  write_png(out_dir / "mask.png", r.mask);
  if (ls.cfg.shadow_rgb) {
    write_pfm(out_dir / "shadow.pfm", r.shadow_full);
  } else {
    ScalarImage s(r.shadow_full.width(), r.shadow_full.height());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = r.shadow_full[i].r;
    write_pfm(out_dir / "shadow.pfm", s);
  }
  write_png(out_dir / "composite.png", r.composite);
  std::printf("insert: wrote input.png foreground.hdr foreground.png mask.png shadow.pfm composite.png to %s\n",
              out_dir.string().c_str());
  return 0;
}

int run_bake(const std::string& lighting, const std::string& at, const std::string& res,
             const fs::path& out) {
  const HybridLightField lf = read_hlf(lighting);
  const Vec3 x = parse_point(at);
  const auto hw = split_numbers(res, 'x', 2, "resolution (expected HxW)");
  const int h = static_cast<int>(hw[0]), w = static_cast<int>(hw[1]);
  if (h <= 0 || w <= 0 || h != hw[0] || w != hw[1]) throw ValidationError("bad resolution '" + res + "'");
  const RgbImage env = lf.bake_envmap(x, w, h);
  write_hdr(out, env);
  std::printf("bake: %dx%d environment map at (%g, %g, %g) written to %s\n", h, w, x.x, x.y, x.z,
              out.string().c_str());
  return 0;
}

int run_probe(const Globals& g, const std::string& scene_path, const std::string& material,
              const std::string& at, double radius, const fs::path& out) {
  SceneConfig sc = load_scene_config(scene_path);
  sc.object = ObjectConfig{};
  sc.object.mesh = "builtin:sphere";
  sc.object.scale = 2.0 * radius;
  const Vec3 c = parse_point(at);
  sc.object.translation = {c.x, c.y, c.z - radius};
  if (material == "specular") {
    sc.object.base_color = Rgb(1.0);
    sc.object.metallic = 1.0;
    sc.object.roughness = kMinRoughness;
  } else if (material == "diffuse") {
    sc.object.base_color = Rgb(0.8);
    sc.object.metallic = 0.0;
    sc.object.roughness = 1.0;
  } else {
    throw ValidationError("probe: --material must be specular or diffuse");
  }
  LoadedScene ls = load_scene(sc, g.overrides());
  // A mirror-like probe needs BRDF importance sampling regardless of the preset.
  ls.cfg.fg_sampling = ForegroundSampling::PixelImportance;
  const InsertionResult r = render_insertion(ls.lf, ls.scene, ls.cfg);
  write_png(out, r.composite);
  std::printf("probe: %s sphere (radius %g) written to %s\n", material.c_str(), radius, out.string().c_str());
  return 0;
}

int run_fit(const Globals& g, const std::string& obs_path, const std::string& init,
            const std::string& cfg_path, const fs::path& out, const fs::path& trace_path) {
  const RunOverrides ov = g.overrides();
  FitConfig cfg = cfg_path.empty() ? parse_fit_config("{}", "<defaults>", ov) : load_fit_config(cfg_path, ov);
  const ObservationSet set = load_observations(obs_path, ov);
  HybridLightField lf0;
  if (init == "random") lf0 = random_lighting(set.lighting_template, cfg.seed, cfg.trainable.volume);
  else if (init == "seeded") lf0 = seeded_lighting(set);
  else throw ValidationError("fit: --init must be random or seeded");
  std::printf("fit: %zu observations, %d iterations, step %g\n", set.observations.size(), cfg.iterations, cfg.step);
  const int report_every = std::max(1, cfg.iterations / 10);
  const FitResult res = fit(std::move(lf0), set.observations, cfg, [&](const FitTraceRow& r) {
    if (r.iteration % report_every == 0) std::printf("  iter %5d  loss %.6g\n", r.iteration, r.total);
    return true;
  });
  write_hlf(out, res.lf);
  if (!trace_path.empty()) write_trace_csv(trace_path, res.trace);
  std::printf("fit: final loss %.6g after %d iterations; light field written to %s\n", res.trace.back().total,
              res.trace.back().iteration, out.string().c_str());
  return 0;
}

int run_gradcheck(const Globals& g, const std::string& scene_path, int count) {
  bool all_pass = true;
  for (int k = 0; k < count; ++k) {
    const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(k);
    GradCheckScene s;
    if (scene_path.empty()) {
      s = make_tiny_scene(seed);
    } else {
      const LoadedScene ls = load_scene(load_scene_config(scene_path), g.overrides());
      s.lf = ls.lf;
      s.scene = ls.scene;
      s.cfg = ls.cfg;
      s.cfg.seed = seed;
      Rng rng = Rng::for_stream(seed, 0x77);
      s.weights = RgbImage(ls.scene.camera.width, ls.scene.camera.height);
      for (Rgb& w : s.weights.pixels())
        w = Rgb(2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
    }
    if (g.threads > 0) s.cfg.threads = g.threads;
    GradCheckOptions opt;
    opt.seed = seed;
    const GradCheckReport rep = grad_check(s, opt);
    std::printf("gradcheck seed=%llu checked=%zu skipped=%zu max_rel_err=%.3g worst=%s %s\n",
                static_cast<unsigned long long>(seed), rep.checked, rep.skipped.size(), rep.max_rel_err,
                rep.worst_param.empty() ? "-" : rep.worst_param.c_str(), rep.pass ? "PASS" : "FAIL");
    for (const std::string& p : rep.skipped) std::printf("  skipped at boundary: %s\n", p.c_str());
    all_pass = all_pass && rep.pass;
  }
  return all_pass ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid light field object insertion"};
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  Globals g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--quality", g.quality, "render preset")->check(CLI::IsMember({"draft", "paper", "final"}));

  std::string scene, out_dir = "out", lighting, at, res = "64x256", out_path, material, obs, init = "random",
                     cfg_path, trace;
  double radius = 0.3;
  int count = 1;

  auto* insert = app.add_subcommand("insert", "insert an object and write every composition buffer");
  insert->add_option("--scene", scene, "scene config (JSON)")->required();
  insert->add_option("--out", out_dir, "output directory")->required();

  auto* bake = app.add_subcommand("bake", "bake an equirect environment map at a point");
  bake->add_option("--lighting", lighting, "light field (HLF1)")->required();
  bake->add_option("--at", at, "world point x,y,z")->required();
  bake->add_option("--res", res, "resolution HxW")->capture_default_str();
  bake->add_option("--out", out_path, "output .hdr")->required();

  auto* probe = app.add_subcommand("probe", "render a probe sphere under the scene lighting");
  probe->add_option("--scene", scene, "scene config (JSON)")->required();
  probe->add_option("--material", material, "probe material")->required()->check(CLI::IsMember({"specular", "diffuse"}));
  probe->add_option("--at", at, "sphere center x,y,z (z above ground)")->required();
  probe->add_option("--radius", radius, "sphere radius in meters")->capture_default_str()->check(CLI::PositiveNumber);
  probe->add_option("--out", out_path, "output PNG")->default_str("probe.png");

  auto* fitc = app.add_subcommand("fit", "fit a light field to observations");
  fitc->add_option("--obs", obs, "observation set (JSON)")->required();
  fitc->add_option("--init", init, "initialization")->capture_default_str()->check(CLI::IsMember({"random", "seeded"}));
  fitc->add_option("--cfg", cfg_path, "fit config (JSON)");
  fitc->add_option("--out", out_path, "fitted light field (HLF1)")->required();
  fitc->add_option("--trace", trace, "loss trace (CSV)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every lighting adjoint");
  gc->add_option("--scene", scene, "small scene config (JSON); random tiny scene when omitted");
  gc->add_option("--count", count, "number of consecutive seeds")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  g.seed_set = app.count("--seed") > 0;

  try {
    if (insert->parsed()) return run_insert(g, scene, out_dir);
    if (bake->parsed()) return run_bake(lighting, at, res, out_path);
    if (probe->parsed()) return run_probe(g, scene, material, at, radius, out_path.empty() ? "probe.png" : out_path);
    if (fitc->parsed()) return run_fit(g, obs, init, cfg_path, out_path, trace);
    if (gc->parsed()) return run_gradcheck(g, scene, count);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
