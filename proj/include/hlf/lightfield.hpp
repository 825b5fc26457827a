// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "hlf/sky.hpp"
#include "hlf/volume.hpp"

namespace hlf {

class HybridLightField;

// Gradients of a scalar objective with respect to every lighting parameter.
struct AdjointBuffer {
  SkyAdjoint sky;
  VolumeAdjoint volume;

  AdjointBuffer() = default;
  // Without `with_volume` the volume adjoint stays empty and only sky gradients are tracked.
  explicit AdjointBuffer(const HybridLightField& lf, bool with_volume = true);
  bool tracks_volume() const { return !volume.d_voxels.empty(); }

  AdjointBuffer& operator+=(const AdjointBuffer& o);
  bool all_finite() const;
  // Removes the radial component of d_peak_dir (the direction lives on the unit sphere).
  void project_peak_dir(const Vec3& peak_dir);
};

// Sky at infinity plus a finite VSG volume. Answers radiance queries L(x, l) by
// alpha-compositing K equi-spaced volume samples in front of the sky.
class HybridLightField {
 public:
  SkyDome sky;
  VsgGrid grid;
  int samples_per_ray = kDefaultSamplesPerRay;
  VoxelInterpolation interpolation = VoxelInterpolation::Nearest;

  HybridLightField() = default;
  HybridLightField(SkyDome s, VsgGrid g, int samples = kDefaultSamplesPerRay)
      : sky(std::move(s)), grid(std::move(g)), samples_per_ray(samples) {}

  void validate() const;

  Rgb radiance(const Vec3& x, const Vec3& l) const;
  double transmittance(const Vec3& x, const Vec3& l) const;

  // Accumulate d(d_radiance . L(x, l)) into adj.
  void radiance_backward(const Vec3& x, const Vec3& l, const Rgb& d_radiance,
                         AdjointBuffer& adj) const;
  void transmittance_backward(const Vec3& x, const Vec3& l, double d_trans,
                              AdjointBuffer& adj) const;

  // Equirect environment map of radiance(x, dir(pixel center)).
  RgbImage bake_envmap(const Vec3& x, int width = kDefaultSkyWidth,
                       int height = kDefaultSkyHeight) const;
};

// Multiplies every radiance parameter (voxel amplitudes, peak intensity, background) by `k`.
void scale_radiance(HybridLightField& lf, double k);

}  // namespace hlf
