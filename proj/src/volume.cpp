// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/volume.hpp"

#include <algorithm>
#include <cmath>

namespace hlf {

VsgVoxel project_voxel(VsgVoxel v) {
  v.alpha = std::clamp(v.alpha, 0.0, 1.0);
  v.sigma = std::max(v.sigma, kMinSigma);
  v.c = {std::max(v.c.r, 0.0), std::max(v.c.g, 0.0), std::max(v.c.b, 0.0)};
  const double len = length(v.mu);
  v.mu = len > 0 ? v.mu / len : Vec3{0, 0, 1};
  return v;
}

VolumeAdjoint& VolumeAdjoint::operator+=(const VolumeAdjoint& o) {
  if (d_voxels.size() != o.d_voxels.size()) throw ValidationError("volume adjoint shape mismatch");
  for (std::size_t i = 0; i < d_voxels.size(); ++i) {
    d_voxels[i].d_c += o.d_voxels[i].d_c;
    d_voxels[i].d_mu += o.d_voxels[i].d_mu;
    d_voxels[i].d_sigma += o.d_voxels[i].d_sigma;
    d_voxels[i].d_alpha += o.d_voxels[i].d_alpha;
  }
  return *this;
}

// --- log projection -----------------------------------------------------------------

namespace {

double warp(double t, double radius, double a) {
  return std::copysign(radius * std::expm1(a * std::abs(t)) / std::expm1(a), t);
}

double unwarp(double x, double radius, double a) {
  return std::copysign(std::log1p(std::abs(x) / radius * std::expm1(a)) / a, x);
}

double warp_slope(double t, double radius, double a) {
  return radius * a * std::exp(a * std::abs(t)) / std::expm1(a);
}

}  // namespace

void LogProjection::validate() const {
  if (!(half_extent_x > 0) || !(half_extent_y > 0))
    throw ValidationError("log projection half extents must be positive");
  if (!(z_max > z_min)) throw ValidationError("log projection z range must be non-empty");
  if (!(curvature > 0)) throw ValidationError("log projection curvature must be positive");
}

Vec3 LogProjection::norm_to_world(const Vec3& t) const {
  for (int a = 0; a < 3; ++a)
    if (!(t[a] >= -1.0 && t[a] <= 1.0))
      throw ValidationError("normalized coordinate outside [-1,1]^3");
  const double zc = 0.5 * (z_min + z_max), zr = 0.5 * (z_max - z_min);
  return {warp(t.x, half_extent_x, curvature), warp(t.y, half_extent_y, curvature),
          zc + warp(t.z, zr, curvature)};
}

Vec3 LogProjection::world_to_norm(const Vec3& x) const {
  const double zc = 0.5 * (z_min + z_max), zr = 0.5 * (z_max - z_min);
  return {unwarp(x.x, half_extent_x, curvature), unwarp(x.y, half_extent_y, curvature),
          unwarp(x.z - zc, zr, curvature)};
}

Vec3 LogProjection::jacobian_diag(const Vec3& t) const {
  const double zr = 0.5 * (z_max - z_min);
  return {warp_slope(t.x, half_extent_x, curvature), warp_slope(t.y, half_extent_y, curvature),
          warp_slope(t.z, zr, curvature)};
}

Aabb LogProjection::world_box() const {
  return Aabb{{-half_extent_x, -half_extent_y, z_min}, {half_extent_x, half_extent_y, z_max}};
}

// --- grid ---------------------------------------------------------------------------

VsgGrid::VsgGrid(GridDims dims, LogProjection mapping) : dims_(dims), mapping_(mapping) {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
    throw ValidationError("grid dimensions must be positive");
  mapping_.validate();
  voxels_.assign(dims.count(), VsgVoxel{});
}

void VsgGrid::set_voxel(std::size_t i, const VsgVoxel& v) { set_voxel_unchecked(i, project_voxel(v)); }

void VsgGrid::set_voxel_unchecked(std::size_t i, const VsgVoxel& v) {
  const bool was = voxels_[i].alpha != 0.0;
  const bool now = v.alpha != 0.0;
  voxels_[i] = v;
  if (was && !now) --opaque_count_;
  if (!was && now) ++opaque_count_;
}

VoxelIndex VsgGrid::unravel(std::size_t i) const {
  const auto nx = static_cast<std::size_t>(dims_.x), ny = static_cast<std::size_t>(dims_.y);
  return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny), static_cast<int>(i / (nx * ny))};
}

Vec3 VsgGrid::voxel_center_norm(const VoxelIndex& v) const {
  return {-1.0 + (2.0 * v.x + 1.0) / dims_.x, -1.0 + (2.0 * v.y + 1.0) / dims_.y,
          -1.0 + (2.0 * v.z + 1.0) / dims_.z};
}

std::optional<VoxelIndex> VsgGrid::world_to_voxel(const Vec3& x) const {
  const Vec3 t = mapping_.world_to_norm(x);
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    if (!(t[a] >= -1.0 && t[a] <= 1.0)) return std::nullopt;
    const int n = dims_[a];
    idx[a] = std::min(static_cast<int>(std::floor((t[a] + 1.0) * 0.5 * n)), n - 1);
  }
  return VoxelIndex{idx[0], idx[1], idx[2]};
}

bool VsgGrid::stencil(const Vec3& x, VoxelInterpolation mode, VoxelStencil& out) const {
  if (mode == VoxelInterpolation::Nearest) {
    const auto v = world_to_voxel(x);
    if (!v) return false;
    out.count = 1;
    out.index[0] = linear_index(*v);
    out.weight[0] = 1.0;
    return true;
  }
  const Vec3 t = mapping_.world_to_norm(x);
  int lo[3], hi[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (!(t[a] >= -1.0 && t[a] <= 1.0)) return false;
    const int n = dims_[a];
    // Continuous index relative to voxel centers.
    const double f = (t[a] + 1.0) * 0.5 * n - 0.5;
    const double f0 = std::floor(f);
    frac[a] = f - f0;
    lo[a] = std::clamp(static_cast<int>(f0), 0, n - 1);
    hi[a] = std::clamp(static_cast<int>(f0) + 1, 0, n - 1);
  }
  out.count = 8;
  for (int c = 0; c < 8; ++c) {
    const VoxelIndex v{(c & 1) ? hi[0] : lo[0], (c & 2) ? hi[1] : lo[1], (c & 4) ? hi[2] : lo[2]};
    out.index[c] = linear_index(v);
    out.weight[c] = ((c & 1) ? frac[0] : 1 - frac[0]) * ((c & 2) ? frac[1] : 1 - frac[1]) *
                    ((c & 4) ? frac[2] : 1 - frac[2]);
  }
  return true;
}

VsgVoxel VsgGrid::fetch(const VoxelStencil& st) const {
  if (st.count == 1) return voxels_[st.index[0]];
  VsgVoxel out{Rgb{}, Vec3{}, 0.0, 0.0};
  for (int i = 0; i < st.count; ++i) {
    const VsgVoxel& v = voxels_[st.index[i]];
    const double w = st.weight[i];
    out.c += v.c * w;
    out.mu += v.mu * w;
    out.sigma += v.sigma * w;
    out.alpha += v.alpha * w;
  }
  return out;
}

void VsgGrid::validate() const {
  for (const auto& v : voxels_) {
    if (!is_finite(v.c) || v.c.r < 0 || v.c.g < 0 || v.c.b < 0)
      throw ValidationError("voxel amplitude must be finite and non-negative");
    if (std::abs(length(v.mu) - 1.0) > 1e-6) throw ValidationError("voxel lobe axis must be unit length");
    if (!(v.sigma >= kMinSigma) || !std::isfinite(v.sigma))
      throw ValidationError("voxel sharpness must be >= 1e-3");
    if (!(v.alpha >= 0 && v.alpha <= 1)) throw ValidationError("voxel alpha must lie in [0,1]");
  }
}

// --- marching -----------------------------------------------------------------------

std::optional<RaySpan> grid_ray_span(const VsgGrid& grid, const Vec3& origin, const Vec3& dir) {
  const Aabb box = grid.world_box();
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) return std::nullopt;
      continue;
    }
    double n = (box.lo[a] - origin[a]) / dir[a];
    double f = (box.hi[a] - origin[a]) / dir[a];
    if (n > f) std::swap(n, f);
    t0 = std::max(t0, n);
    t1 = std::min(t1, f);
  }
  if (!(t1 > t0)) return std::nullopt;
  return RaySpan{t0, t1};
}

void march_samples(const VsgGrid& grid, const Vec3& origin, const Vec3& dir, int samples,
                   VoxelInterpolation mode, std::vector<MarchSample>& out, RaySpan* span_out) {
  out.clear();
  const auto span = grid_ray_span(grid, origin, dir);
  if (span_out) *span_out = span.value_or(RaySpan{});
  if (!span) return;
  out.resize(static_cast<std::size_t>(samples));
  const double step = (span->t_exit - span->t_enter) / samples;
  for (int k = 0; k < samples; ++k) {
    MarchSample& s = out[static_cast<std::size_t>(k)];
    s.t = span->t_enter + (k + 0.5) * step;
    s.inside = grid.stencil(origin + dir * s.t, mode, s.stencil);
  }
}

// --- unprojection -------------------------------------------------------------------

VsgGrid unproject_image(const PinholeCamera& cam, const RgbImage& image, const DepthMap& depth,
                        GridDims dims, const LogProjection& mapping, std::size_t* deposited) {
  cam.validate();
  if (!image.same_size(cam.width, cam.height))
    throw ValidationError("unproject_image: image size does not match the camera");
  if (!depth.same_size(cam.width, cam.height))
    throw ValidationError("unproject_image: depth size does not match the camera");
  VsgGrid grid(dims, mapping);
  std::vector<Rgb> color_sum(grid.size());
  std::vector<Vec3> facing_sum(grid.size());
  std::vector<std::size_t> hits(grid.size(), 0);
  std::size_t count = 0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double d = depth.at(x, y);
      if (!valid_depth(d)) continue;
      const Vec3 p = unproject(cam, pixel_center(x, y), d);
      const auto v = grid.world_to_voxel(p);
      if (!v) continue;
      const std::size_t i = grid.linear_index(*v);
      color_sum[i] += image.at(x, y);
      facing_sum[i] += normalize(cam.origin() - p);
      ++hits[i];
      ++count;
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (hits[i] == 0) continue;
    const double n = static_cast<double>(hits[i]);
    const double len = length(facing_sum[i]);
    grid.set_voxel(i, VsgVoxel{color_sum[i] / n, len > 0 ? facing_sum[i] / len : Vec3{0, 0, 1},
                               1.0, 1.0});
  }
  if (deposited) *deposited = count;
  return grid;
}

// --- depth rendering ----------------------------------------------------------------

namespace {

double render_depth_ray(const VsgGrid& grid, const Ray& ray, int samples, VoxelInterpolation mode,
                        std::vector<MarchSample>& buf) {
  RaySpan span;
  march_samples(grid, ray.origin, ray.direction, samples, mode, buf, &span);
  if (buf.empty()) return 0.0;
  double acc = 0.0, trans = 1.0;
  for (const auto& s : buf) {
    if (!s.inside) continue;
    const double a = grid.fetch(s.stencil).alpha;
    acc += trans * a * s.t;
    trans *= 1.0 - a;
  }
  return acc + trans * span.t_exit;
}

}  // namespace

DepthMap render_depth(const VsgGrid& grid, const PinholeCamera& cam, int samples,
                      VoxelInterpolation mode) {
  cam.validate();
  if (samples < 1) throw ValidationError("render_depth: samples must be >= 1");
  DepthMap out(cam.width, cam.height);
  std::vector<MarchSample> buf;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      out.at(x, y) = render_depth_ray(grid, pixel_ray(cam, pixel_center(x, y)), samples, mode, buf);
  return out;
}

void render_depth_backward(const VsgGrid& grid, const PinholeCamera& cam, const DepthMap& d_depth,
                           VolumeAdjoint& adj, int samples, VoxelInterpolation mode) {
  if (!d_depth.same_size(cam.width, cam.height))
    throw ValidationError("render_depth_backward: gradient size does not match the camera");
  if (adj.d_voxels.size() != grid.size()) throw ValidationError("volume adjoint shape mismatch");
  std::vector<MarchSample> buf;
  std::vector<double> alphas, trans_before;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double g = d_depth.at(x, y);
      if (g == 0.0) continue;
      RaySpan span;
      march_samples(grid, cam.origin(), pixel_ray(cam, pixel_center(x, y)).direction, samples,
                    mode, buf, &span);
      if (buf.empty()) continue;
      alphas.assign(buf.size(), 0.0);
      trans_before.assign(buf.size(), 0.0);
      double trans = 1.0;
      for (std::size_t k = 0; k < buf.size(); ++k) {
        trans_before[k] = trans;
        if (!buf[k].inside) continue;
        alphas[k] = grid.fetch(buf[k].stencil).alpha;
        trans *= 1.0 - alphas[k];
      }
      // rest = depth contributed by everything behind sample k, seen through k.
      double rest = span.t_exit;
      for (std::size_t k = buf.size(); k-- > 0;) {
        if (!buf[k].inside) continue;
        const double d_alpha = g * trans_before[k] * (buf[k].t - rest);
        for (int i = 0; i < buf[k].stencil.count; ++i)
          adj.d_voxels[buf[k].stencil.index[i]].d_alpha += d_alpha * buf[k].stencil.weight[i];
        rest = alphas[k] * buf[k].t + (1.0 - alphas[k]) * rest;
      }
    }
  }
}

DepthMap z_depth_to_ray_distance(const PinholeCamera& cam, const DepthMap& z_depth) {
  if (!z_depth.same_size(cam.width, cam.height))
    throw ValidationError("depth map size does not match the camera");
  DepthMap out(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const double z = z_depth.at(x, y);
      if (!valid_depth(z)) {
        out.at(x, y) = z;
        continue;
      }
      const Vec2 px = pixel_center(x, y);
      const Vec3 local{(px.x - cam.cx) / cam.fx, (px.y - cam.cy) / cam.fy, 1.0};
      out.at(x, y) = z * length(local);
    }
  }
  return out;
}

}  // namespace hlf
