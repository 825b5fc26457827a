// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "hlf/lightfield.hpp"

using namespace hlf;

namespace {

HybridLightField single_voxel_field() {
  SkyDome sky = SkyDome::uniform(Rgb(0.7, 0.5, 0.3), 8, 16);
  sky.peak_intensity = Rgb(0.0);
  VsgGrid grid(GridDims{1, 1, 1}, LogProjection{2, 2, -2, 2, 1});
  HybridLightField lf(sky, grid, 1);
  return lf;
}

}  // namespace

TEST_CASE("transparent grid returns the sky") {
  HybridLightField lf = single_voxel_field();
  const Vec3 l = normalize(Vec3{0.2, 0.1, 1});
  CHECK(lf.radiance({0, 0, 0}, l) == lf.sky.radiance(l));
  CHECK(lf.transmittance({0, 0, 0}, l) == 1.0);
}

TEST_CASE("opaque voxel hides the sky") {
  HybridLightField lf = single_voxel_field();
  const Vec3 l{0, 0, 1};
  VsgVoxel v;
  v.alpha = 1.0;
  v.c = Rgb(2.0);
  v.mu = -l;
  lf.grid.set_voxel(0, v);
  CHECK(lf.radiance({0, 0, 0}, l) == Rgb(2.0));
  CHECK(lf.transmittance({0, 0, 0}, l) == 0.0);

  HybridLightField two = single_voxel_field();
  two.grid = VsgGrid(GridDims{1, 1, 2}, LogProjection{2, 2, -2, 2, 1});
  two.samples_per_ray = 2;
  VsgVoxel half;
  half.alpha = 0.5;
  two.grid.set_voxel(0, half);
  two.grid.set_voxel(1, half);
  CHECK(two.transmittance({0, 0, -1.9}, l) == 0.25);
}

TEST_CASE("single voxel radiance derivative matches the closed form") {
  HybridLightField lf = single_voxel_field();
  const Vec3 l = normalize(Vec3{0.3, -0.2, 1});
  VsgVoxel v;
  v.alpha = 0.4;
  v.c = Rgb(1.5, 0.5, 0.25);
  v.mu = normalize(Vec3{0.1, 0.2, -1});
  v.sigma = 0.8;
  lf.grid.set_voxel(0, v);

  const Rgb sky = lf.sky.radiance(l);
  const double q = 1 + dot(l, v.mu);
  const double lobe = std::exp(-q / (v.sigma * v.sigma));
  // L = alpha c lobe + (1 - alpha) sky
  const Rgb L = lf.radiance({0, 0, 0}, l);
  CHECK(L.r == doctest::Approx(v.alpha * v.c.r * lobe + (1 - v.alpha) * sky.r).epsilon(1e-14));

  AdjointBuffer adj(lf);
  lf.radiance_backward({0, 0, 0}, l, Rgb(1, 0, 0), adj);
  const VoxelGrad& g = adj.volume.d_voxels[0];
  CHECK(std::abs(g.d_alpha - (v.c.r * lobe - sky.r)) < 1e-10);
  CHECK(std::abs(g.d_c.r - v.alpha * lobe) < 1e-10);
  CHECK(g.d_c.g == 0.0);
  const double d_sigma = v.alpha * v.c.r * lobe * 2 * q / (v.sigma * v.sigma * v.sigma);
  CHECK(std::abs(g.d_sigma - d_sigma) < 1e-10);
  const double d_mu_x = -v.alpha * v.c.r * lobe * l.x / (v.sigma * v.sigma);
  CHECK(std::abs(g.d_mu.x - d_mu_x) < 1e-10);
}

TEST_CASE("bake_envmap") {
  HybridLightField lf = single_voxel_field();
  lf.sky.peak_intensity = Rgb(5.0);
  const RgbImage env = lf.bake_envmap({0, 0, 0}, 16, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 16; ++x) {
      const Vec3 d = equirect_px_to_dir(pixel_center(x, y), 16, 8);
      CHECK(env.at(x, y) == lf.radiance({0, 0, 0}, d));
    }
}

TEST_CASE("scale_radiance doubles every radiance") {
  HybridLightField lf = single_voxel_field();
  lf.sky.peak_intensity = Rgb(3.0);
  VsgVoxel v;
  v.alpha = 0.3;
  v.c = Rgb(1.0);
  lf.grid.set_voxel(0, v);
  const Vec3 l = normalize(Vec3{1, 1, 1});
  const Rgb before = lf.radiance({0, 0, 0}, l);
  scale_radiance(lf, 2.0);
  const Rgb after = lf.radiance({0, 0, 0}, l);
  CHECK(after.r == doctest::Approx(2 * before.r).epsilon(1e-14));
}
