// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

// World frame: right-handed, +z up. Camera frame: +x right, +y down, +z forward.

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hlf/image.hpp"
#include "hlf/material.hpp"
#include "hlf/math.hpp"

namespace hlf {

// Minimum hit distance used to avoid re-hitting the surface a ray leaves from.
inline constexpr double kRayEpsilon = 1e-4;

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double tmin = kRayEpsilon;
  double tmax = std::numeric_limits<double>::infinity();

  // Normalizes `dir`; throws ValidationError on a zero or non-finite direction.
  static Ray make(const Vec3& origin, const Vec3& dir);
  Vec3 at(double t) const { return origin + direction * t; }
};

struct Aabb {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};

  void expand(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
  void expand(const Aabb& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
  bool contains(const Aabb& b) const {
    return lo.x <= b.lo.x && lo.y <= b.lo.y && lo.z <= b.lo.z && hi.x >= b.hi.x &&
           hi.y >= b.hi.y && hi.z >= b.hi.z;
  }
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x && p.y <= hi.y && p.z <= hi.z;
  }
  Vec3 center() const { return (lo + hi) * 0.5; }
  Vec3 extent() const { return hi - lo; }
  int longest_axis() const;

  // Parametric interval [t0, t1] where the ray line is inside the box, clipped to [tmin, tmax].
  bool intersect(const Vec3& origin, const Vec3& inv_dir, double tmin, double tmax, double& t0,
                 double& t1) const;
};

struct Pose {
  Mat3 rotation;  // camera -> world; columns are the camera axes in world coordinates
  Vec3 translation;

  Vec3 to_world(const Vec3& p) const { return rotation * p + translation; }
  Vec3 to_local(const Vec3& p) const { return rotation.transposed() * (p - translation); }

  // Camera at (0, 0, 0) looking along world +y, pitched down by `pitch_deg`.
  static Pose street_view(double pitch_deg = 0.0);
};

struct PinholeCamera {
  double fx = 1, fy = 1;
  double cx = 0, cy = 0;
  int width = 1, height = 1;
  Pose pose;

  void validate() const;
  Vec3 forward() const { return pose.rotation.column(2); }
  Vec3 origin() const { return pose.translation; }
  // Same intrinsics rescaled to a different image resolution.
  PinholeCamera resized(int new_width, int new_height) const;
};

// Center of integer pixel (x, y) in continuous pixel coordinates.
inline Vec2 pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

// Ray through continuous pixel coordinate `px`; throws ValidationError outside the image.
Ray pixel_ray(const PinholeCamera& cam, Vec2 px);

// Continuous pixel coordinate and z-depth of a world point. No bounds check.
Vec2 project(const PinholeCamera& cam, const Vec3& world, double* z_depth = nullptr);

// World point at z-depth `depth` behind continuous pixel coordinate `px`.
Vec3 unproject(const PinholeCamera& cam, Vec2 px, double depth);

// z-depth of the horizontal plane z = plane_z; 0 (invalid) where the pixel ray misses it.
DepthMap plane_depth(const PinholeCamera& cam, double plane_z);

// One world point per valid pixel of `depth`, in row-major pixel order.
std::vector<Vec3> unproject_depth(const PinholeCamera& cam, const DepthMap& depth);

// Equirectangular mapping: azimuth atan2(y, x) -> u in [0, w), polar angle from +z -> v in [0, h).
Vec2 equirect_dir_to_px(const Vec3& dir, int w, int h);
Vec3 equirect_px_to_dir(Vec2 px, int w, int h);

using Triangle = std::array<std::uint32_t, 3>;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec3> normals;  // per vertex, unit length
  MaterialParams material;
  std::string material_name;

  // Drops zero-area triangles and returns how many were removed.
  std::size_t drop_degenerate();
  // Area-weighted vertex normals from the current triangles.
  void compute_vertex_normals();
  void validate() const;
  Aabb bounds() const;
};

// Rotates about world +z by `yaw_deg` then translates.
TriMesh place_mesh(const TriMesh& mesh, const Vec3& translation, double yaw_deg);

// UV sphere used for probes and fixtures.
TriMesh make_uv_sphere(const Vec3& center, double radius, int rings, int segments);

struct Hit {
  double t = 0;
  Vec3 position;
  Vec3 normal;  // shading normal, facing against the ray
  std::uint32_t triangle = 0;
  MaterialParams material;
};

// Binary BVH over the triangles of one mesh. Immutable after construction.
class Bvh {
 public:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // first primitive (leaf) or left child (inner)
    std::uint32_t count = 0;  // number of primitives, 0 for inner nodes
    std::uint32_t right = 0;  // right child (inner)
  };

  Bvh() = default;
  explicit Bvh(const TriMesh& mesh, std::uint32_t max_leaf_size = 4);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& primitives() const { return prims_; }
  bool empty() const { return nodes_.empty(); }

  std::optional<Hit> intersect(const TriMesh& mesh, const Ray& ray) const;
  bool occluded(const TriMesh& mesh, const Ray& ray) const;

 private:
  std::uint32_t build(const TriMesh& mesh, std::vector<Vec3>& centroids, std::uint32_t begin,
                      std::uint32_t end, std::uint32_t max_leaf);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> prims_;
};

// Nearest hit via the BVH.
std::optional<Hit> ray_mesh_hit(const Bvh& bvh, const TriMesh& mesh, const Ray& ray);

// Reference intersector that tests every triangle.
std::optional<Hit> ray_mesh_hit_brute_force(const TriMesh& mesh, const Ray& ray);

// A mesh in world space together with its acceleration structure.
struct PlacedMesh {
  TriMesh mesh;
  Bvh bvh;

  PlacedMesh() = default;
  explicit PlacedMesh(TriMesh m) : mesh(std::move(m)), bvh(mesh) {}

  std::optional<Hit> intersect(const Ray& ray) const { return bvh.intersect(mesh, ray); }
  bool occluded(const Ray& ray) const { return bvh.occluded(mesh, ray); }
  bool empty() const { return mesh.triangles.empty(); }
};

}  // namespace hlf
