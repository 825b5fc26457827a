// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/lightfield.hpp"

#include <cmath>

namespace hlf {

AdjointBuffer::AdjointBuffer(const HybridLightField& lf, bool with_volume)
    : sky(lf.sky.background.size()), volume(with_volume ? lf.grid.size() : 0) {}

AdjointBuffer& AdjointBuffer::operator+=(const AdjointBuffer& o) {
  sky += o.sky;
  volume += o.volume;
  return *this;
}

bool AdjointBuffer::all_finite() const {
  if (!is_finite(sky.d_peak_intensity) || !is_finite(sky.d_peak_dir)) return false;
  for (const auto& g : sky.d_background)
    if (!is_finite(g)) return false;
  for (const auto& g : volume.d_voxels)
    if (!is_finite(g.d_c) || !is_finite(g.d_mu) || !std::isfinite(g.d_sigma) ||
        !std::isfinite(g.d_alpha))
      return false;
  return true;
}

void AdjointBuffer::project_peak_dir(const Vec3& peak_dir) {
  sky.d_peak_dir -= peak_dir * dot(sky.d_peak_dir, peak_dir);
}

void HybridLightField::validate() const {
  if (samples_per_ray < 1) throw ValidationError("samples_per_ray must be >= 1");
  sky.validate();
  grid.validate();
}

namespace {

thread_local std::vector<MarchSample> t_samples;

struct LobeEval {
  Rgb value;     // G(-l)
  double lobe;   // e^(-(1 + l . mu) / sigma^2)
  double q;      // 1 + l . mu
};

LobeEval eval_lobe(const VsgVoxel& v, const Vec3& l) {
  const double q = 1.0 + dot(l, v.mu);
  const double lobe = std::exp(-q / (v.sigma * v.sigma));
  return {v.c * lobe, lobe, q};
}

}  // namespace

Rgb HybridLightField::radiance(const Vec3& x, const Vec3& l) const {
  if (grid.transparent()) return sky.radiance(l);
  march_samples(grid, x, l, samples_per_ray, interpolation, t_samples);
  Rgb acc;
  double trans = 1.0;
  for (const auto& s : t_samples) {
    if (!s.inside) continue;
    const VsgVoxel v = grid.fetch(s.stencil);
    if (v.alpha == 0.0) continue;
    acc += eval_lobe(v, l).value * (trans * v.alpha);
    trans *= 1.0 - v.alpha;
  }
  return acc + sky.radiance(l) * trans;
}

double HybridLightField::transmittance(const Vec3& x, const Vec3& l) const {
  if (grid.transparent()) return 1.0;
  march_samples(grid, x, l, samples_per_ray, interpolation, t_samples);
  double trans = 1.0;
  for (const auto& s : t_samples)
    if (s.inside) trans *= 1.0 - grid.fetch(s.stencil).alpha;
  return trans;
}

void HybridLightField::radiance_backward(const Vec3& x, const Vec3& l, const Rgb& d_radiance,
                                         AdjointBuffer& adj) const {
  // Without a volume adjoint only sky parameters are tracked. A transparent grid still has
  // non-zero alpha gradients, so it cannot take the sky-only shortcut otherwise.
  if (adj.volume.d_voxels.empty()) {
    sky.radiance_backward(l, d_radiance * transmittance(x, l), adj.sky);
    return;
  }
  march_samples(grid, x, l, samples_per_ray, interpolation, t_samples);
  const std::size_t n = t_samples.size();
  thread_local std::vector<VsgVoxel> voxels;
  thread_local std::vector<double> trans_before;
  voxels.resize(n);
  trans_before.resize(n);
  double trans = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    trans_before[k] = trans;
    if (!t_samples[k].inside) continue;
    voxels[k] = grid.fetch(t_samples[k].stencil);
    trans *= 1.0 - voxels[k].alpha;
  }
  const Rgb sky_value = sky.radiance(l);
  sky.radiance_backward(l, d_radiance * trans, adj.sky);

  // rest = radiance arriving from behind sample k.
  Rgb rest = sky_value;
  for (std::size_t k = n; k-- > 0;) {
    const MarchSample& s = t_samples[k];
    if (!s.inside) continue;
    const VsgVoxel& v = voxels[k];
    const LobeEval g = eval_lobe(v, l);
    const double w = trans_before[k] * v.alpha;
    VoxelGrad local;
    if (w != 0.0) {
      const Rgb d_g = d_radiance * w;
      local.d_c = d_g * g.lobe;
      const double d_lobe = dot(d_g, v.c);
      const double inv_s2 = 1.0 / (v.sigma * v.sigma);
      local.d_mu = l * (-d_lobe * g.lobe * inv_s2);
      local.d_sigma = d_lobe * g.lobe * 2.0 * g.q * inv_s2 / v.sigma;
    }
    local.d_alpha = trans_before[k] * dot(d_radiance, g.value - rest);
    for (int i = 0; i < s.stencil.count; ++i) {
      VoxelGrad& dst = adj.volume.d_voxels[s.stencil.index[i]];
      const double wi = s.stencil.weight[i];
      dst.d_c += local.d_c * wi;
      dst.d_mu += local.d_mu * wi;
      dst.d_sigma += local.d_sigma * wi;
      dst.d_alpha += local.d_alpha * wi;
    }
    rest = g.value * v.alpha + rest * (1.0 - v.alpha);
  }
}

void HybridLightField::transmittance_backward(const Vec3& x, const Vec3& l, double d_trans,
                                              AdjointBuffer& adj) const {
  if (d_trans == 0.0 || adj.volume.d_voxels.empty()) return;
  march_samples(grid, x, l, samples_per_ray, interpolation, t_samples);
  const std::size_t n = t_samples.size();
  thread_local std::vector<double> one_minus;
  one_minus.assign(n, 1.0);
  for (std::size_t k = 0; k < n; ++k)
    if (t_samples[k].inside) one_minus[k] = 1.0 - grid.fetch(t_samples[k].stencil).alpha;
  // Prefix/suffix products avoid dividing by (1 - alpha), which may be zero.
  thread_local std::vector<double> suffix;
  suffix.assign(n + 1, 1.0);
  for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] * one_minus[k];
  double prefix = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const MarchSample& s = t_samples[k];
    if (s.inside) {
      const double d_alpha = -d_trans * prefix * suffix[k + 1];
      for (int i = 0; i < s.stencil.count; ++i)
        adj.volume.d_voxels[s.stencil.index[i]].d_alpha += d_alpha * s.stencil.weight[i];
    }
    prefix *= one_minus[k];
  }
}

RgbImage HybridLightField::bake_envmap(const Vec3& x, int width, int height) const {
  if (width <= 0 || height <= 0) throw ValidationError("bake_envmap: resolution must be positive");
  RgbImage out(width, height);
  for (int py = 0; py < height; ++py)
    for (int px = 0; px < width; ++px)
      out.at(px, py) = radiance(x, equirect_px_to_dir(Vec2{px + 0.5, py + 0.5}, width, height));
  return out;
}

void scale_radiance(HybridLightField& lf, double k) {
  lf.sky.peak_intensity *= k;
  for (auto& c : lf.sky.background.pixels()) c *= k;
  for (std::size_t i = 0; i < lf.grid.size(); ++i) {
    VsgVoxel v = lf.grid.voxel(i);
    v.c *= k;
    lf.grid.set_voxel_unchecked(i, v);
  }
}

}  // namespace hlf
