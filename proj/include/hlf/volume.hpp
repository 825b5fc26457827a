// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hlf/geometry.hpp"
#include "hlf/image.hpp"
#include "hlf/math.hpp"

namespace hlf {

inline constexpr double kMinSigma = 1e-3;
inline constexpr int kDefaultSamplesPerRay = 128;

// One spherical-Gaussian lobe G(l) = c e^(-(1 - l . mu) / sigma^2) plus opacity.
struct VsgVoxel {
  Rgb c;
  Vec3 mu{0, 0, 1};
  double sigma = 1.0;
  double alpha = 0.0;

  friend bool operator==(const VsgVoxel&, const VsgVoxel&) = default;
};

// Clamps alpha to [0,1], sigma to >= kMinSigma and c to >= 0; renormalizes mu.
VsgVoxel project_voxel(VsgVoxel v);

struct GridDims {
  int x = 256, y = 256, z = 64;

  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

struct VoxelIndex {
  int x = 0, y = 0, z = 0;
  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

// Exponential warp between the normalized cube [-1,1]^3 and world meters. Voxels are
// uniform in normalized space, so resolution is highest around the warp center.
struct LogProjection {
  double half_extent_x = 150.0;
  double half_extent_y = 150.0;
  double z_min = -10.0;
  double z_max = 70.0;
  double curvature = 3.0;

  void validate() const;

  // Throws ValidationError when t leaves [-1,1]^3.
  Vec3 norm_to_world(const Vec3& t) const;
  // Unbounded inverse; points outside the volume map outside the cube.
  Vec3 world_to_norm(const Vec3& x) const;
  // d(world)/d(t) per axis.
  Vec3 jacobian_diag(const Vec3& t) const;
  Aabb world_box() const;

  friend bool operator==(const LogProjection&, const LogProjection&) = default;
};

enum class VoxelInterpolation { Nearest, Trilinear };

// Voxels and weights contributing to one lookup.
struct VoxelStencil {
  int count = 0;
  std::array<std::size_t, 8> index{};
  std::array<double, 8> weight{};
};

struct VoxelGrad {
  Rgb d_c;
  Vec3 d_mu;
  double d_sigma = 0;
  double d_alpha = 0;
};

// Gradient accumulator shaped like a VsgGrid.
struct VolumeAdjoint {
  std::vector<VoxelGrad> d_voxels;

  VolumeAdjoint() = default;
  explicit VolumeAdjoint(std::size_t voxels) : d_voxels(voxels) {}
  VolumeAdjoint& operator+=(const VolumeAdjoint& o);
};

// Dense X x Y x Z grid of VSG voxels (x fastest).
class VsgGrid {
 public:
  explicit VsgGrid(GridDims dims = {}, LogProjection mapping = {});

  const GridDims& dims() const { return dims_; }
  const LogProjection& mapping() const { return mapping_; }
  std::size_t size() const { return voxels_.size(); }
  std::span<const VsgVoxel> voxels() const { return voxels_; }
  const VsgVoxel& voxel(std::size_t i) const { return voxels_[i]; }
  const VsgVoxel& voxel(const VoxelIndex& v) const { return voxels_[linear_index(v)]; }

  // Stores the projection of `v` onto the voxel invariants.
  void set_voxel(std::size_t i, const VsgVoxel& v);
  void set_voxel(const VoxelIndex& idx, const VsgVoxel& v) { set_voxel(linear_index(idx), v); }
  // Stores `v` verbatim; caller guarantees the invariants (used by loaders and optimizers).
  void set_voxel_unchecked(std::size_t i, const VsgVoxel& v);

  // True when every voxel has alpha == 0, in which case every ray sees only the sky.
  bool transparent() const { return opaque_count_ == 0; }

  std::size_t linear_index(const VoxelIndex& v) const {
    return (static_cast<std::size_t>(v.z) * static_cast<std::size_t>(dims_.y) +
            static_cast<std::size_t>(v.y)) * static_cast<std::size_t>(dims_.x) +
           static_cast<std::size_t>(v.x);
  }
  VoxelIndex unravel(std::size_t i) const;

  Vec3 voxel_center_norm(const VoxelIndex& v) const;
  Vec3 voxel_center_world(const VoxelIndex& v) const { return mapping_.norm_to_world(voxel_center_norm(v)); }
  Aabb world_box() const { return mapping_.world_box(); }

  // Nearest voxel (the one containing x); nullopt outside the grid.
  std::optional<VoxelIndex> world_to_voxel(const Vec3& x) const;
  // Fills `out` and returns true when x lies inside the grid.
  bool stencil(const Vec3& x, VoxelInterpolation mode, VoxelStencil& out) const;
  // Weighted voxel for a stencil. With a single tap the voxel is returned bit-exactly.
  VsgVoxel fetch(const VoxelStencil& st) const;

  void validate() const;

  friend bool operator==(const VsgGrid& a, const VsgGrid& b) {
    return a.dims_ == b.dims_ && a.mapping_ == b.mapping_ && a.voxels_ == b.voxels_;
  }

 private:
  GridDims dims_;
  LogProjection mapping_;
  std::vector<VsgVoxel> voxels_;
  std::size_t opaque_count_ = 0;
};

// Portion [t_enter, t_exit] of the ray (t >= 0) inside the grid's world box.
struct RaySpan {
  double t_enter = 0;
  double t_exit = 0;
};

std::optional<RaySpan> grid_ray_span(const VsgGrid& grid, const Vec3& origin, const Vec3& dir);

// One march sample: its distance along the ray and, when inside the grid, its stencil.
struct MarchSample {
  double t = 0;
  bool inside = false;
  VoxelStencil stencil;
};

// K samples at the midpoints of K equal segments of the span. Empty when the ray misses
// the grid.
void march_samples(const VsgGrid& grid, const Vec3& origin, const Vec3& dir, int samples,
                   VoxelInterpolation mode, std::vector<MarchSample>& out, RaySpan* span = nullptr);

// Seed volume from a posed RGB image and its z-depth: every valid in-grid pixel deposits an
// opaque, view-facing lobe; pixels sharing a voxel are averaged.
VsgGrid unproject_image(const PinholeCamera& cam, const RgbImage& image, const DepthMap& depth,
                        GridDims dims, const LogProjection& mapping,
                        std::size_t* deposited = nullptr);

// Expected ray distance under the alpha channel: sum tau_{k-1} alpha_k d_k + tau_K d_far.
// Pixels whose ray misses the grid get 0.
DepthMap render_depth(const VsgGrid& grid, const PinholeCamera& cam,
                      int samples = kDefaultSamplesPerRay,
                      VoxelInterpolation mode = VoxelInterpolation::Nearest);

// Accumulates d(sum_p d_depth[p] * D[p]) / d(alpha) into adj.
void render_depth_backward(const VsgGrid& grid, const PinholeCamera& cam, const DepthMap& d_depth,
                           VolumeAdjoint& adj, int samples = kDefaultSamplesPerRay,
                           VoxelInterpolation mode = VoxelInterpolation::Nearest);

// Converts a z-depth map to distances along each pixel ray (invalid pixels stay invalid).
DepthMap z_depth_to_ray_distance(const PinholeCamera& cam, const DepthMap& z_depth);

}  // namespace hlf
