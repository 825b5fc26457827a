// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>
#include <tuple>

#include "doctest.h"
#include "hlf/insertion.hpp"

using namespace hlf;

namespace {

PinholeCamera street_camera() {
  PinholeCamera cam;
  cam.width = 24;
  cam.height = 16;
  cam.fx = cam.fy = 20;
  cam.cx = 12;
  cam.cy = 8;
  cam.pose = Pose::street_view(15);
  return cam;
}

InsertionScene sphere_scene(double radius = 0.5) {
  InsertionScene s;
  s.camera = street_camera();
  s.depth = plane_depth(s.camera, -1.5);
  s.background = RgbImage(24, 16, Rgb(0.5));
  s.object = PlacedMesh(make_uv_sphere({0, 4, -1.5 + radius}, radius, 12, 24));
  return s;
}

HybridLightField uniform_sky(double u) {
  SkyDome sky = SkyDome::uniform(Rgb(u), 8, 16);
  sky.peak_intensity = Rgb(0.0);
  return HybridLightField(sky, VsgGrid(GridDims{1, 1, 1}));
}

}  // namespace

TEST_CASE("fibonacci hemisphere") {
  const auto d = fibonacci_hemisphere(450, {0, 0, 1});
  std::set<std::tuple<double, double, double>> unique;
  for (const auto& v : d) {
    CHECK(v.z >= 0);
    unique.insert({v.x, v.y, v.z});
  }
  CHECK(unique.size() == 450);
  const auto many = fibonacci_hemisphere(10000, normalize(Vec3{1, 1, 0}));
  double mean = 0;
  for (const auto& v : many) mean += dot(v, normalize(Vec3{1, 1, 0}));
  CHECK(mean / 10000 == doctest::Approx(0.5).epsilon(2e-3));
}

TEST_CASE("gbuffer depth test") {
  InsertionScene s = sphere_scene();
  const GBuffer g = rasterize_gbuffer(s.camera, s.object, s.depth);
  const ScalarImage m = gbuffer_mask(g);
  double covered = 0;
  for (double v : m.pixels()) covered += v;
  CHECK(covered > 0);

  DepthMap wall(s.camera.width, s.camera.height, 1.0);
  const ScalarImage hidden = gbuffer_mask(rasterize_gbuffer(s.camera, s.object, wall));
  for (double v : hidden.pixels()) CHECK(v == 0.0);

  // A pole occluding the left half of the image.
  DepthMap pole = s.depth;
  for (int y = 0; y < pole.height(); ++y)
    for (int x = 0; x < 12; ++x) pole.at(x, y) = 1.0;
  const ScalarImage half = gbuffer_mask(rasterize_gbuffer(s.camera, s.object, pole));
  for (int y = 0; y < pole.height(); ++y)
    for (int x = 0; x < pole.width(); ++x) {
      if (x < 12) CHECK(half.at(x, y) == 0.0);
      else CHECK(half.at(x, y) == m.at(x, y));
    }
}

TEST_CASE("foreground shading") {
  InsertionScene s = sphere_scene();
  s.object.mesh.material.base_color = Rgb(0.7);
  s.object.mesh.material.metallic = 0;
  s.object = PlacedMesh(s.object.mesh);
  const GBuffer g = rasterize_gbuffer(s.camera, s.object, s.depth);
  InsertionConfig cfg = InsertionConfig::preset(Quality::Draft);
  cfg.threads = 1;
  cfg.ambient = 0;

  const RgbImage dark = shade_foreground(g, uniform_sky(0.0), s.object, cfg);
  for (const auto& c : dark.pixels()) CHECK(c == Rgb(0.0));

  cfg.fg_sampling = ForegroundSampling::PixelImportance;
  cfg.specular_lobe = false;
  cfg.self_occlusion = false;
  cfg.diffuse_rays = 64;
  const RgbImage lit = shade_foreground(g, uniform_sky(1.2), s.object, cfg);
  for (std::size_t i = 0; i < lit.size(); ++i)
    if (g[i].hit) CHECK(lit[i].r == doctest::Approx(0.84).epsilon(1e-12));
}

TEST_CASE("shadow ratio limits") {
  InsertionScene s = sphere_scene();
  InsertionConfig cfg = InsertionConfig::preset(Quality::Draft);
  cfg.shadow_width = 0;
  cfg.shadow_height = 0;
  cfg.shadow_rays = 64;
  cfg.threads = 1;
  const HybridLightField lf = uniform_sky(1.0);

  PlacedMesh buried(make_uv_sphere({0, 4, -10}, 0.5, 8, 16));
  const RgbImage none = shadow_ratio(s.depth, s.camera, buried, lf, cfg);
  for (const auto& c : none.pixels()) CHECK(c == Rgb(1.0));

  const RgbImage shadow = shadow_ratio(s.depth, s.camera, s.object, lf, cfg);
  double darkest = 1;
  for (const auto& c : shadow.pixels()) {
    CHECK(c.r <= 1.0);
    CHECK(c.r >= cfg.ambient - 1e-12);
    darkest = std::min(darkest, c.r);
  }
  CHECK(darkest < 0.9);
}

TEST_CASE("composite") {
  const RgbImage bg(4, 3, Rgb(0.5));
  const RgbImage fg(4, 3, Rgb(0.2));
  const ToneMapParams tone;
  const RgbImage ones(4, 3, Rgb(1.0));
  const RgbImage all_fg = composite(bg, fg, ScalarImage(4, 3, 1.0), ones, tone);
  CHECK(all_fg[0].r == doctest::Approx(tonemap(0.2, tone)));
  const RgbImage same = composite(bg, fg, ScalarImage(4, 3, 0.0), ones, tone);
  CHECK(same == bg);
  const RgbImage shaded = composite(bg, fg, ScalarImage(4, 3, 0.0), RgbImage(4, 3, Rgb(0.25)), tone);
  CHECK(shaded[0].r == doctest::Approx(std::pow(0.25, 1 / 2.2) * 0.5).epsilon(1e-12));
  CHECK_THROWS(composite(bg, fg, ScalarImage(2, 2, 0.0), ones, tone));
}

TEST_CASE("upsample transpose is the adjoint") {
  RgbImage src(5, 3), dst_w(11, 7);
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = Rgb(std::sin(1.0 + i), 0, 0);
  for (std::size_t i = 0; i < dst_w.size(); ++i) dst_w[i] = Rgb(std::cos(2.0 * i), 0, 0);
  const RgbImage up = upsample_bilinear(src, 11, 7);
  const RgbImage back = upsample_bilinear_transpose(dst_w, 5, 3);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < up.size(); ++i) lhs += up[i].r * dst_w[i].r;
  for (std::size_t i = 0; i < src.size(); ++i) rhs += src[i].r * back[i].r;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("render is deterministic across thread counts") {
  InsertionScene s = sphere_scene();
  HybridLightField lf = uniform_sky(0.4);
  lf.sky.peak_intensity = Rgb(20.0);
  lf.sky.peak_dir = normalize(Vec3{0.4, 0.2, 0.8});
  InsertionConfig cfg = InsertionConfig::preset(Quality::Draft);
  cfg.center_rays = 256;
  cfg.shadow_rays = 64;
  cfg.threads = 1;
  const InsertionResult a = render_insertion(lf, s, cfg);
  cfg.threads = 3;
  const InsertionResult b = render_insertion(lf, s, cfg);
  CHECK(a.composite == b.composite);
  CHECK(a.shadow == b.shadow);
}

TEST_CASE("presets and parsing") {
  CHECK(parse_quality("paper") == Quality::Paper);
  CHECK(parse_fg_sampling("pixel_uniform") == ForegroundSampling::PixelUniform);
  CHECK_THROWS(parse_quality("best"));
  InsertionConfig bad;
  bad.shadow_rays = 0;
  CHECK_THROWS(bad.validate());
  CHECK(InsertionConfig::preset(Quality::Final).shadow_width == 0);
}
