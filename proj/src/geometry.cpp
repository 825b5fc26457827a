// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace hlf {

void MaterialParams::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(base_color.r) || !in_unit(base_color.g) || !in_unit(base_color.b))
    throw ValidationError("material base_color must lie in [0,1]^3");
  if (!in_unit(metallic)) throw ValidationError("material metallic must lie in [0,1]");
  if (!in_unit(roughness)) throw ValidationError("material roughness must lie in [0,1]");
  if (!in_unit(specular)) throw ValidationError("material specular must lie in [0,1]");
}

Ray Ray::make(const Vec3& origin, const Vec3& dir) {
  const double len = length(dir);
  if (!(len > 0.0) || !std::isfinite(len)) throw ValidationError("ray direction must be non-zero");
  return Ray{origin, dir / len};
}

int Aabb::longest_axis() const {
  const Vec3 e = extent();
  if (e.x >= e.y && e.x >= e.z) return 0;
  return e.y >= e.z ? 1 : 2;
}

bool Aabb::intersect(const Vec3& origin, const Vec3& inv_dir, double tmin, double tmax,
                     double& t0, double& t1) const {
  t0 = tmin;
  t1 = tmax;
  for (int a = 0; a < 3; ++a) {
    double near = (lo[a] - origin[a]) * inv_dir[a];
    double far = (hi[a] - origin[a]) * inv_dir[a];
    if (near > far) std::swap(near, far);
    // Slab rounding can cull a triangle lying exactly on the box face.
    far *= 1.0 + 4.0 * std::numeric_limits<double>::epsilon();
    // NaN arises when the origin lies on a slab plane of a parallel ray; treat as no constraint.
    if (near > t0) t0 = near;
    if (far < t1) t1 = far;
    if (t0 > t1) return false;
  }
  return true;
}

Pose Pose::street_view(double pitch_deg) {
  const double p = pitch_deg * kPi / 180.0;
  const Vec3 right{1, 0, 0};
  const Vec3 forward{0, std::cos(p), -std::sin(p)};
  const Vec3 down = cross(forward, right);
  return Pose{Mat3::from_columns(right, down, forward), Vec3{}};
}

void PinholeCamera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ValidationError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
    throw ValidationError("camera principal point must lie inside the image");
}

PinholeCamera PinholeCamera::resized(int new_width, int new_height) const {
  PinholeCamera c = *this;
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  c.fx = fx * sx;
  c.fy = fy * sy;
  c.cx = cx * sx;
  c.cy = cy * sy;
  c.width = new_width;
  c.height = new_height;
  return c;
}

Ray pixel_ray(const PinholeCamera& cam, Vec2 px) {
  if (!(px.x >= 0 && px.x < cam.width && px.y >= 0 && px.y < cam.height))
    throw ValidationError("pixel coordinate outside the image");
  const Vec3 local{(px.x - cam.cx) / cam.fx, (px.y - cam.cy) / cam.fy, 1.0};
  return Ray::make(cam.pose.translation, cam.pose.rotation * local);
}

Vec2 project(const PinholeCamera& cam, const Vec3& world, double* z_depth) {
  const Vec3 p = cam.pose.to_local(world);
  if (z_depth) *z_depth = p.z;
  return {cam.cx + cam.fx * p.x / p.z, cam.cy + cam.fy * p.y / p.z};
}

Vec3 unproject(const PinholeCamera& cam, Vec2 px, double depth) {
  const Vec3 local{(px.x - cam.cx) / cam.fx * depth, (px.y - cam.cy) / cam.fy * depth, depth};
  return cam.pose.to_world(local);
}

DepthMap plane_depth(const PinholeCamera& cam, double plane_z) {
  cam.validate();
  DepthMap out(cam.width, cam.height);
  const Vec3 forward = cam.forward();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = pixel_ray(cam, pixel_center(x, y));
      const double t = (plane_z - ray.origin.z) / ray.direction.z;
      if (t > 0 && std::isfinite(t)) out.at(x, y) = t * dot(ray.direction, forward);
    }
  }
  return out;
}

std::vector<Vec3> unproject_depth(const PinholeCamera& cam, const DepthMap& depth) {
  if (!depth.same_size(cam.width, cam.height))
    throw ValidationError("unproject_depth: depth map size does not match the camera");
  std::vector<Vec3> points;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (const double d = depth.at(x, y); valid_depth(d))
        points.push_back(unproject(cam, pixel_center(x, y), d));
  return points;
}

Vec2 equirect_dir_to_px(const Vec3& dir, int w, int h) {
  double u = std::atan2(dir.y, dir.x) / kTwoPi;
  if (u < 0) u += 1.0;
  if (u >= 1.0) u = 0.0;
  const double theta = std::acos(std::clamp(dir.z, -1.0, 1.0));
  double v = theta / kPi * h;
  if (v >= h) v = std::nextafter(static_cast<double>(h), 0.0);
  return {u * w, v};
}

Vec3 equirect_px_to_dir(Vec2 px, int w, int h) {
  const double phi = px.x / w * kTwoPi;
  const double theta = px.y / h * kPi;
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

// --- meshes -----------------------------------------------------------------

namespace {

Vec3 triangle_cross(const TriMesh& m, const Triangle& t) {
  return cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
}

}  // namespace

std::size_t TriMesh::drop_degenerate() {
  const auto before = triangles.size();
  std::erase_if(triangles, [&](const Triangle& t) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return true;
    return !(length(triangle_cross(*this, t)) > 0.0);
  });
  return before - triangles.size();
}

void TriMesh::compute_vertex_normals() {
  normals.assign(vertices.size(), Vec3{});
  // Unnormalized cross product is twice the area, so the sum is area-weighted.
  for (const auto& t : triangles) {
    const Vec3 c = triangle_cross(*this, t);
    for (auto i : t) normals[i] += c;
  }
  for (auto& n : normals) {
    const double len = length(n);
    n = len > 0 ? n / len : Vec3{0, 0, 1};
  }
}

void TriMesh::validate() const {
  if (normals.size() != vertices.size())
    throw ValidationError("mesh must have exactly one normal per vertex");
  for (const auto& t : triangles)
    for (auto i : t)
      if (i >= vertices.size()) throw ValidationError("mesh triangle index out of range");
  for (const auto& n : normals)
    if (std::abs(length(n) - 1.0) > 1e-6) throw ValidationError("mesh normals must be unit length");
  material.validate();
}

Aabb TriMesh::bounds() const {
  Aabb b;
  for (const auto& v : vertices) b.expand(v);
  return b;
}

TriMesh place_mesh(const TriMesh& mesh, const Vec3& translation, double yaw_deg) {
  const Mat3 r = Mat3::rotation_z(yaw_deg * kPi / 180.0);
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = r * v + translation;
  for (auto& n : out.normals) n = normalize(r * n);
  return out;
}

TriMesh make_uv_sphere(const Vec3& center, double radius, int rings, int segments) {
  if (rings < 2 || segments < 3) throw ValidationError("uv sphere needs rings >= 2, segments >= 3");
  TriMesh m;
  m.vertices.push_back(center + Vec3{0, 0, radius});
  m.normals.push_back({0, 0, 1});
  for (int i = 1; i < rings; ++i) {
    const double theta = kPi * i / rings;
    for (int j = 0; j < segments; ++j) {
      const double phi = kTwoPi * j / segments;
      const Vec3 n{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                   std::cos(theta)};
      m.vertices.push_back(center + n * radius);
      m.normals.push_back(n);
    }
  }
  m.vertices.push_back(center - Vec3{0, 0, radius});
  m.normals.push_back({0, 0, -1});
  const auto south = static_cast<std::uint32_t>(m.vertices.size() - 1);
  auto ring_vertex = [&](int ring, int seg) {
    return static_cast<std::uint32_t>(1 + (ring - 1) * segments + (seg % segments));
  };
  for (int j = 0; j < segments; ++j) m.triangles.push_back({0, ring_vertex(1, j), ring_vertex(1, j + 1)});
  for (int i = 1; i < rings - 1; ++i) {
    for (int j = 0; j < segments; ++j) {
      const auto a = ring_vertex(i, j), b = ring_vertex(i, j + 1);
      const auto c = ring_vertex(i + 1, j), d = ring_vertex(i + 1, j + 1);
      m.triangles.push_back({a, c, d});
      m.triangles.push_back({a, d, b});
    }
  }
  for (int j = 0; j < segments; ++j)
    m.triangles.push_back({ring_vertex(rings - 1, j), south, ring_vertex(rings - 1, j + 1)});
  return m;
}

// --- intersection -------------------------------------------------------------

namespace {

struct TriangleHit {
  double t, u, v;
};

// Moller-Trumbore. Returns the hit only inside (ray.tmin, tmax).
std::optional<TriangleHit> intersect_triangle(const TriMesh& m, std::uint32_t tri,
                                              const Ray& ray, double tmax) {
  const Triangle& t = m.triangles[tri];
  const Vec3& p0 = m.vertices[t[0]];
  const Vec3 e1 = m.vertices[t[1]] - p0;
  const Vec3 e2 = m.vertices[t[2]] - p0;
  const Vec3 pv = cross(ray.direction, e2);
  const double det = dot(e1, pv);
  if (det == 0.0) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 tv = ray.origin - p0;
  const double u = dot(tv, pv) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qv = cross(tv, e1);
  const double v = dot(ray.direction, qv) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double dist = dot(e2, qv) * inv_det;
  if (!(dist > ray.tmin) || !(dist < tmax)) return std::nullopt;
  return TriangleHit{dist, u, v};
}

Hit make_hit(const TriMesh& m, const Ray& ray, std::uint32_t tri, const TriangleHit& th) {
  const Triangle& t = m.triangles[tri];
  const double w = 1.0 - th.u - th.v;
  Vec3 n = m.normals[t[0]] * w + m.normals[t[1]] * th.u + m.normals[t[2]] * th.v;
  const double len = length(n);
  n = len > 0 ? n / len : normalize(triangle_cross(m, t));
  if (dot(n, ray.direction) > 0) n = -n;
  return Hit{th.t, ray.at(th.t), n, tri, m.material};
}

}  // namespace

Bvh::Bvh(const TriMesh& mesh, std::uint32_t max_leaf_size) {
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  if (n == 0) return;
  prims_.resize(n);
  std::iota(prims_.begin(), prims_.end(), 0u);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[i];
    centroids[i] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
  }
  nodes_.reserve(2 * n);
  build(mesh, centroids, 0, n, std::max(1u, max_leaf_size));
}

std::uint32_t Bvh::build(const TriMesh& mesh, std::vector<Vec3>& centroids, std::uint32_t begin,
                         std::uint32_t end, std::uint32_t max_leaf) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (auto v : mesh.triangles[prims_[i]]) box.expand(mesh.vertices[v]);
    centroid_box.expand(centroids[prims_[i]]);
  }
  nodes_[index].box = box;
  const std::uint32_t count = end - begin;
  const int axis = centroid_box.longest_axis();
  if (count <= max_leaf || !(centroid_box.extent()[axis] > 0.0)) {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  }
  const std::uint32_t mid = begin + count / 2;
  std::nth_element(prims_.begin() + begin, prims_.begin() + mid, prims_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return centroids[a][axis] < centroids[b][axis];
                   });
  const std::uint32_t left = build(mesh, centroids, begin, mid, max_leaf);
  const std::uint32_t right = build(mesh, centroids, mid, end, max_leaf);
  nodes_[index].first = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

std::optional<Hit> Bvh::intersect(const TriMesh& mesh, const Ray& ray) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv{1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z};
  double best_t = ray.tmax;
  std::optional<TriangleHit> best;
  std::uint32_t best_tri = 0;

  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    double t0, t1;
    if (!node.box.intersect(ray.origin, inv, ray.tmin, best_t, t0, t1)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t tri = prims_[i];
        // Inclusive limit so equal distances resolve to the lowest triangle id, matching the
        // exhaustive scan order.
        const double limit = best ? std::nextafter(best_t, INFINITY) : best_t;
        if (auto th = intersect_triangle(mesh, tri, ray, limit)) {
          if (!best || th->t < best->t || tri < best_tri) {
            best = th;
            best_tri = tri;
            best_t = th->t;
          }
        }
      }
    } else {
      stack[top++] = node.right;
      stack[top++] = node.first;
    }
  }
  if (!best) return std::nullopt;
  return make_hit(mesh, ray, best_tri, *best);
}

bool Bvh::occluded(const TriMesh& mesh, const Ray& ray) const {
  if (nodes_.empty()) return false;
  const Vec3 inv{1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z};
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    double t0, t1;
    if (!node.box.intersect(ray.origin, inv, ray.tmin, ray.tmax, t0, t1)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
        if (intersect_triangle(mesh, prims_[i], ray, ray.tmax)) return true;
    } else {
      stack[top++] = node.right;
      stack[top++] = node.first;
    }
  }
  return false;
}

std::optional<Hit> ray_mesh_hit(const Bvh& bvh, const TriMesh& mesh, const Ray& ray) {
  return bvh.intersect(mesh, ray);
}

std::optional<Hit> ray_mesh_hit_brute_force(const TriMesh& mesh, const Ray& ray) {
  std::optional<TriangleHit> best;
  std::uint32_t best_tri = 0;
  for (std::uint32_t i = 0; i < mesh.triangles.size(); ++i) {
    const double tmax = best ? best->t : ray.tmax;
    if (auto th = intersect_triangle(mesh, i, ray, tmax)) {
      best = th;
      best_tri = i;
    }
  }
  if (!best) return std::nullopt;
  return make_hit(mesh, ray, best_tri, *best);
}

}  // namespace hlf
