// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "doctest.h"
#include "hlf/error.hpp"
#include "hlf/volume.hpp"

using namespace hlf;

TEST_CASE("log projection") {
  const LogProjection m;
  const Vec3 mid = m.norm_to_world({0, 0, 0});
  CHECK(mid.x == doctest::Approx(0));
  CHECK(mid.z == doctest::Approx(30));
  CHECK(m.norm_to_world({1, 0, 0}).x == doctest::Approx(150));
  CHECK_THROWS_AS(m.norm_to_world({1.5, 0, 0}), ValidationError);

  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 500; ++i) {
    const Vec3 t{u(g), u(g), u(g)};
    const Vec3 back = m.world_to_norm(m.norm_to_world(t));
    CHECK(back.x == doctest::Approx(t.x).epsilon(1e-10));
    CHECK(back.y == doctest::Approx(t.y).epsilon(1e-10));
    CHECK(back.z == doctest::Approx(t.z).epsilon(1e-10));
  }
}

TEST_CASE("world_to_voxel") {
  const VsgGrid grid(GridDims{8, 8, 8});
  CHECK_FALSE(grid.world_to_voxel({10000, 0, 0}));
  const auto c = grid.world_to_voxel({0, 0, 0});
  REQUIRE(c);
  CHECK(c->x == 4);
  CHECK(c->y == 4);
}

TEST_CASE("unproject_image") {
  PinholeCamera cam;
  cam.fx = cam.fy = 4;
  cam.cx = cam.cy = 2;
  cam.width = cam.height = 4;
  const GridDims dims{8, 8, 8};
  const LogProjection mapping{20, 20, -10, 10, 1};
  DepthMap depth(4, 4, 0.0);
  RgbImage image(4, 4, Rgb(0.2, 0.4, 0.6));
  depth.at(1, 2) = 5.0;
  std::size_t deposited = 0;
  const VsgGrid grid = unproject_image(cam, image, depth, dims, mapping, &deposited);
  CHECK(deposited == 1);
  std::size_t opaque = 0;
  for (const auto& v : grid.voxels())
    if (v.alpha > 0) {
      ++opaque;
      CHECK(v.alpha == 1.0);
      CHECK(v.c == Rgb(0.2, 0.4, 0.6));
    }
  CHECK(opaque == 1);

  depth.at(1, 2) = 1e6;
  CHECK(unproject_image(cam, image, depth, dims, mapping).transparent());
}

TEST_CASE("render_depth") {
  PinholeCamera cam;
  cam.fx = cam.fy = 1;
  cam.cx = cam.cy = 0.5;
  cam.width = cam.height = 1;
  VsgGrid grid(GridDims{1, 1, 4}, LogProjection{1, 1, 0, 8, 1});
  // Camera at the origin looking along +z.
  const DepthMap empty = render_depth(grid, cam, 4);
  const auto span = grid_ray_span(grid, {0, 0, 0}, {0, 0, 1});
  REQUIRE(span);
  CHECK(empty[0] == span->t_exit);

  VsgVoxel opaque;
  opaque.alpha = 1.0;
  grid.set_voxel(VoxelIndex{0, 0, 2}, opaque);
  std::vector<MarchSample> samples;
  march_samples(grid, {0, 0, 0}, {0, 0, 1}, 4, VoxelInterpolation::Nearest, samples);
  double expected = 0;
  for (const auto& s : samples)
    if (s.inside && grid.fetch(s.stencil).alpha == 1.0) {
      expected = s.t;
      break;
    }
  CHECK(render_depth(grid, cam, 4)[0] == expected);
}

TEST_CASE("voxel projection and validation") {
  VsgVoxel v;
  v.alpha = 1.5;
  v.sigma = 0;
  v.mu = {0, 0, 3};
  v.c = Rgb(-1, 2, 3);
  const VsgVoxel p = project_voxel(v);
  CHECK(p.alpha == 1.0);
  CHECK(p.sigma == kMinSigma);
  CHECK(p.mu == Vec3{0, 0, 1});
  CHECK(p.c == Rgb(0, 2, 3));
  VsgGrid grid(GridDims{2, 2, 2});
  grid.set_voxel(0, v);
  CHECK(grid.voxel(0) == p);
  grid.set_voxel_unchecked(1, v);
  CHECK_THROWS_AS(grid.validate(), ValidationError);
}
