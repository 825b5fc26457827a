// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "hlf/error.hpp"
#include "hlf/geometry.hpp"

using namespace hlf;

namespace {

PinholeCamera identity_camera() {
  PinholeCamera cam;
  cam.fx = cam.fy = 20;
  cam.cx = 32;
  cam.cy = 24;
  cam.width = 64;
  cam.height = 48;
  return cam;
}

Vec3 random_unit(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  return normalize(Vec3{n(g), n(g), n(g)});
}

}  // namespace

TEST_CASE("pixel_ray through the principal point follows the optical axis") {
  const PinholeCamera cam = identity_camera();
  const Ray r = pixel_ray(cam, {cam.cx, cam.cy});
  CHECK(r.direction.x == doctest::Approx(0));
  CHECK(r.direction.y == doctest::Approx(0));
  CHECK(r.direction.z == doctest::Approx(1));
  const Ray r45 = pixel_ray(cam, {cam.cx + cam.fx, cam.cy});
  CHECK(r45.direction.x == doctest::Approx(std::sqrt(0.5)));
  CHECK(r45.direction.z == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(pixel_ray(cam, {-1, 3}), ValidationError);
}

TEST_CASE("project inverts unproject") {
  PinholeCamera cam = identity_camera();
  cam.pose = Pose::street_view(12);
  cam.pose.translation = {1, 2, 3};
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> ux(0, 64), uy(0, 48), ud(0.5, 50);
  for (int i = 0; i < 200; ++i) {
    const Vec2 px{ux(g), uy(g)};
    const double d = ud(g);
    double z = 0;
    const Vec2 back = project(cam, unproject(cam, px, d), &z);
    CHECK(back.x == doctest::Approx(px.x).epsilon(1e-9));
    CHECK(back.y == doctest::Approx(px.y).epsilon(1e-9));
    CHECK(z == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("unproject_depth") {
  const PinholeCamera cam = identity_camera();
  DepthMap depth(cam.width, cam.height, 0.0);
  CHECK(unproject_depth(cam, depth).empty());

  depth.at(32, 24) = 1.0;
  // Pixel (32, 24) has its center half a pixel off the principal point.
  auto pts = unproject_depth(cam, depth);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].z == doctest::Approx(1.0));

  PinholeCamera street = identity_camera();
  street.pose = Pose::street_view(15);
  const auto ground = unproject_depth(street, plane_depth(street, -1.6));
  REQUIRE(!ground.empty());
  for (const auto& p : ground) CHECK(std::abs(p.z + 1.6) < 1e-5);

  CHECK_THROWS_AS(unproject_depth(cam, DepthMap(3, 3)), ValidationError);
}

TEST_CASE("equirect mapping") {
  const int w = 256, h = 64;
  CHECK(equirect_dir_to_px({0, 0, 1}, w, h).y == doctest::Approx(0));
  CHECK(equirect_dir_to_px({0, 1, 0}, w, h).y == doctest::Approx(h / 2.0));
  std::mt19937_64 g(11);
  const double bound = 0.5 * kTwoPi / w;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 d = random_unit(g);
    if (std::abs(d.z) > 0.95) continue;
    const Vec3 back = equirect_px_to_dir(equirect_dir_to_px(d, w, h), w, h);
    CHECK(std::acos(std::min(1.0, dot(d, back))) < bound);
  }
}

TEST_CASE("ray hits a unit sphere from its center") {
  const TriMesh sphere = make_uv_sphere({0, 0, 0}, 1.0, 32, 64);
  const PlacedMesh placed(sphere);
  const auto hit = placed.intersect(Ray::make({0, 0, 0}, {0, 0, 1}));
  REQUIRE(hit);
  CHECK(hit->t == doctest::Approx(1.0).epsilon(1e-3));
  // The shading normal faces against the ray.
  CHECK(std::abs(hit->normal.z) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_FALSE(placed.intersect(Ray::make({5, 5, 5}, {1, 0, 0})));
}

TEST_CASE("BVH nearest hit equals brute force") {
  const TriMesh sphere = make_uv_sphere({0.2, -0.1, 0.3}, 1.0, 12, 24);
  const PlacedMesh placed(sphere);
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 o{u(g), u(g), u(g)};
    const Vec3 target{u(g) * 0.5, u(g) * 0.5, u(g) * 0.5};
    const Ray r = Ray::make(o, normalize(target - o));
    const auto a = placed.intersect(r);
    const auto b = ray_mesh_hit_brute_force(placed.mesh, r);
    REQUIRE(a.has_value() == b.has_value());
    if (a) {
      CHECK(a->t == b->t);
      CHECK(a->triangle == b->triangle);
    }
    CHECK(placed.occluded(r) == b.has_value());
  }
}

TEST_CASE("mesh validation and degenerate triangles") {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
  m.triangles = {{0, 1, 2}, {0, 1, 3}};
  CHECK(m.drop_degenerate() == 1);
  m.compute_vertex_normals();
  CHECK(m.normals[0].z == doctest::Approx(1));
  m.triangles.push_back({0, 1, 9});
  CHECK_THROWS_AS(m.validate(), ValidationError);
}
