// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "hlf/diffopt.hpp"
#include "hlf/error.hpp"

using namespace hlf;

namespace {

PinholeCamera tiny_camera(int w = 4, int h = 4) {
  PinholeCamera cam;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = w;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.pose = Pose::street_view(0);
  return cam;
}

HybridLightField half_alpha_field() {
  SkyDome sky = SkyDome::uniform(Rgb(0.5), 4, 8);
  sky.peak_intensity = Rgb(0.0);
  VsgGrid grid(GridDims{1, 1, 1}, LogProjection{50, 50, -50, 50, 1});
  VsgVoxel v;
  v.alpha = 0.5;
  v.c = Rgb(0.3);
  grid.set_voxel(0, v);
  return HybridLightField(sky, grid, 1);
}

}  // namespace

TEST_CASE("sky separation") {
  const HybridLightField lf = half_alpha_field();
  const PinholeCamera cam = tiny_camera();
  const LossValue l = loss_sky_separation(lf, cam, ScalarImage(4, 4, 1.0), 1);
  CHECK(l.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Sky pixels push opacity down.
  CHECK(l.grad.volume.d_voxels[0].d_alpha > 0);

  SkyDome sky = SkyDome::uniform(Rgb(0.5), 4, 8);
  HybridLightField clear(sky, VsgGrid(GridDims{1, 1, 1}), 1);
  CHECK(loss_sky_separation(clear, cam, ScalarImage(4, 4, 1.0), 1).value < 1e-5);
}

TEST_CASE("alpha regularizer") {
  VsgGrid grid(GridDims{2, 2, 1});
  VsgVoxel v;
  v.alpha = 1.0;
  grid.set_voxel(0, v);
  CHECK(loss_alpha_reg(grid) == 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    v.alpha = 0.5;
    grid.set_voxel(i, v);
  }
  VolumeAdjoint g(grid.size());
  CHECK(loss_alpha_reg(grid, &g) == 0.25);
  CHECK(g.d_voxels[0].d_alpha == 0.0);
  v.alpha = 0.25;
  grid.set_voxel(1, v);
  VolumeAdjoint g2(grid.size());
  loss_alpha_reg(grid, &g2);
  CHECK(g2.d_voxels[1].d_alpha == doctest::Approx(0.5 / 4));
}

TEST_CASE("radiance reconstruction") {
  const HybridLightField lf = half_alpha_field();
  const PinholeCamera cam = tiny_camera();
  RgbImage target(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      const Ray r = pixel_ray(cam, pixel_center(x, y));
      target.at(x, y) = lf.radiance(r.origin, r.direction);
    }
  CHECK(loss_radiance_recon(lf, cam, target, 1).value == 0.0);

  // One pixel, one channel off by 0.1.
  const PinholeCamera one = tiny_camera(1, 1);
  const Ray r = pixel_ray(one, pixel_center(0, 0));
  const Rgb L = lf.radiance(r.origin, r.direction);
  RgbImage t1(1, 1, L);
  t1[0].g += 0.1;
  const LossValue lv = loss_radiance_recon(lf, one, t1, 1);
  CHECK(lv.value == doctest::Approx(0.01 / 3).epsilon(1e-9));
}

TEST_CASE("depth loss") {
  PinholeCamera cam = tiny_camera(1, 1);
  cam.pose = Pose{};
  VsgGrid grid(GridDims{1, 1, 4}, LogProjection{1, 1, 0, 8, 1});
  VsgVoxel v;
  v.alpha = 1.0;
  grid.set_voxel(VoxelIndex{0, 0, 1}, v);
  const DepthMap rendered = render_depth(grid, cam, 4);
  CHECK(loss_depth_recon(grid, cam, rendered, 4, VoxelInterpolation::Nearest) ==
        doctest::Approx(0).epsilon(1e-12));
  DepthMap shifted = rendered;
  shifted[0] += 1.0;
  CHECK(loss_depth_recon(grid, cam, shifted, 4, VoxelInterpolation::Nearest) ==
        doctest::Approx(1.0));
}

TEST_CASE("gradient check on a tiny scene") {
  const GradCheckScene s = make_tiny_scene(1);
  const GradCheckReport r = grad_check(s);
  CHECK(r.pass);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("parameters at a boundary are skipped") {
  GradCheckScene s = make_tiny_scene(2);
  VsgVoxel v = s.lf.grid.voxel(0);
  v.alpha = 1.0;
  s.lf.grid.set_voxel(0, v);
  GradCheckOptions opt;
  opt.random_directions = 0;
  const GradCheckReport r = grad_check(s, opt);
  bool found = false;
  for (const auto& name : r.skipped)
    if (name == param_name(ParamRef{ParamKind::VoxelAlpha, 0, 0})) found = true;
  CHECK(found);
}

TEST_CASE("fit fixed points") {
  const GradCheckScene s = make_tiny_scene(3);
  const InsertionResult rec = render_insertion(s.lf, s.scene, s.cfg);
  std::vector<Observation> obs(1);
  obs[0].camera = s.scene.camera;
  obs[0].insertion = InsertionObservation{s.scene, rec.composite};
  FitConfig cfg;
  cfg.insertion = s.cfg;
  cfg.iterations = 5;
  cfg.weights.reg = 0;
  const FitResult at_truth = fit(s.lf, obs, cfg);
  CHECK(at_truth.lf.sky.peak_dir == s.lf.sky.peak_dir);
  CHECK(at_truth.lf.grid == s.lf.grid);

  FitConfig zero = cfg;
  zero.weights = LossWeights{0, 0, 0, 0, 0};
  const HybridLightField start = random_lighting(s.lf, 8);
  const FitResult same = fit(start, obs, zero);
  CHECK(same.lf.grid == start.grid);
  CHECK(same.lf.sky.background == start.sky.background);
}

TEST_CASE("single voxel fit descends") {
  const HybridLightField truth = half_alpha_field();
  const PinholeCamera cam = tiny_camera(2, 2);
  RgbImage target(2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      const Ray r = pixel_ray(cam, pixel_center(x, y));
      target.at(x, y) = truth.radiance(r.origin, r.direction);
    }
  HybridLightField start = truth;
  VsgVoxel v = start.grid.voxel(0);
  v.c = Rgb(1.2, 0.1, 0.6);
  start.grid.set_voxel(0, v);
  std::vector<Observation> obs(1);
  obs[0].camera = cam;
  obs[0].radiance = target;
  FitConfig cfg;
  cfg.iterations = 10;
  cfg.weights.reg = 0;
  cfg.trainable.peak_dir = cfg.trainable.peak_intensity = cfg.trainable.background = false;
  const FitResult r = fit(start, obs, cfg);
  for (std::size_t i = 1; i < r.trace.size(); ++i)
    CHECK(r.trace[i].total < r.trace[i - 1].total);
}

TEST_CASE("uniform sky intensity from one lambertian pixel") {
  InsertionScene scene;
  scene.camera = tiny_camera(1, 1);
  scene.camera.pose = Pose::street_view(60);
  scene.background = RgbImage(1, 1, Rgb(0.5));
  scene.depth = DepthMap(1, 1, 1000.0);
  TriMesh patch;
  const Vec3 c = scene.camera.origin() + scene.camera.forward() * 3.0;
  patch.vertices = {c + Vec3{-1, -1, 0}, c + Vec3{1, -1, 0}, c + Vec3{1, 1, 0}, c + Vec3{-1, 1, 0}};
  patch.triangles = {{0, 1, 2}, {0, 2, 3}};
  patch.compute_vertex_normals();
  patch.material.base_color = Rgb(0.5);
  patch.material.roughness = 1;
  scene.object = PlacedMesh(patch);

  InsertionConfig cfg;
  cfg.fg_sampling = ForegroundSampling::PixelImportance;
  cfg.specular_lobe = false;
  cfg.self_occlusion = false;
  cfg.diffuse_rays = 16;
  cfg.shadow_width = cfg.shadow_height = 1;
  cfg.shadow_rays = 4;
  cfg.threads = 1;

  // Linear pixel value 0.3 under albedo 0.5 needs sky radiance 0.6.
  const double u_true = 0.6;
  RgbImage target(1, 1, Rgb(tonemap(0.5 * u_true, cfg.tone)));
  std::vector<Observation> obs(1);
  obs[0].camera = scene.camera;
  obs[0].insertion = InsertionObservation{scene, target};

  HybridLightField start(SkyDome::uniform(Rgb(0.1), 2, 4), VsgGrid(GridDims{1, 1, 1}), 1);
  start.sky.peak_intensity = Rgb(0.0);
  FitConfig fc;
  fc.insertion = cfg;
  fc.iterations = 600;
  fc.step = 0.02;
  fc.weights.reg = 0;
  fc.trainable.volume = fc.trainable.peak_dir = fc.trainable.peak_intensity = false;
  const FitResult r = fit(start, obs, fc);
  const RgbImage fg = shade_foreground(rasterize_gbuffer(scene.camera, scene.object, scene.depth),
                                       r.lf, scene.object, cfg);
  CHECK(fg[0].r / 0.5 == doctest::Approx(u_true).epsilon(0.01));
}

TEST_CASE("non-finite loss names the term") {
  GradCheckScene s = make_tiny_scene(4);
  std::vector<Observation> obs(1);
  obs[0].camera = s.scene.camera;
  RgbImage bad(s.scene.camera.width, s.scene.camera.height, Rgb(0.0));
  bad[0].r = std::nan("");
  obs[0].radiance = bad;
  FitConfig cfg;
  try {
    evaluate_objective(s.lf, obs, cfg, nullptr);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("recon") != std::string::npos);
  }
}
