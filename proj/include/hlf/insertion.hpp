// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

// Object insertion: G-buffer rasterization, Monte-Carlo foreground shading under a hybrid
// light field, ratio shadow maps on the (Lambertian, upward-facing) scene, and compositing.
// Every stage has a matching backward pass that reuses the forward ray set.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hlf/brdf.hpp"
#include "hlf/geometry.hpp"
#include "hlf/lightfield.hpp"
#include "hlf/sky.hpp"

namespace hlf {

inline constexpr double kDefaultAmbient = 0.1;
inline constexpr int kDefaultShadowRays = 450;
// Shadow rays start this far above the scene point.
inline constexpr double kShadowOriginOffset = 1e-3;

// Deterministic Fibonacci lattice on the hemisphere around `up`:
// z_i = 1 - (i + 0.5) / n, azimuth_i = 2 pi frac(i / golden ratio).
std::vector<Vec3> fibonacci_hemisphere(int n, const Vec3& up);

// Jittered Fibonacci lattice: each point is uniform within its z band and the whole set is
// randomly rotated about the pole. Every point marginally follows the uniform density, so
// sums over the set are unbiased and stratified.
std::vector<Vec3> stratified_hemisphere(int n, const Vec3& up, Rng& rng);
std::vector<Vec3> stratified_sphere(int n, Rng& rng);

enum class ForegroundSampling {
  CenterUniform,    // one shared set of uniform sphere directions queried at the object center
  PixelUniform,     // per-pixel stratified uniform hemisphere
  PixelImportance,  // per-pixel cosine (diffuse) + GGX (specular) with separate budgets
};

enum class Quality { Draft, Paper, Final };

struct InsertionConfig {
  ForegroundSampling fg_sampling = ForegroundSampling::CenterUniform;
  int center_rays = 5000;
  int uniform_rays = 1024;
  int diffuse_rays = 1024;
  int specular_rays = 256;
  bool diffuse_lobe = true;
  bool specular_lobe = true;
  int shadow_rays = kDefaultShadowRays;
  int shadow_width = 160;  // 0 selects the image resolution
  int shadow_height = 90;
  double ambient = kDefaultAmbient;
  bool self_occlusion = true;
  bool shadow_rgb = false;
  ToneMapParams tone;
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
  static InsertionConfig preset(Quality q);
};

Quality parse_quality(const std::string& name);
ForegroundSampling parse_fg_sampling(const std::string& name);

struct GBufferTexel {
  bool hit = false;
  Vec3 position;
  Vec3 normal;
  Vec3 view;  // unit vector from the surface towards the camera
  MaterialParams material;
  double depth = 0;  // z-depth of the object surface
};

using GBuffer = Image<GBufferTexel>;

// Nearest object hit per pixel, dropped where the scene depth is in front of the object.
GBuffer rasterize_gbuffer(const PinholeCamera& cam, const PlacedMesh& object,
                          const DepthMap& scene_depth);

ScalarImage gbuffer_mask(const GBuffer& gbuf);

// Everything a forward/backward insertion pass needs besides lighting and config.
struct InsertionScene {
  PinholeCamera camera;
  RgbImage background;  // gamma-encoded LDR photograph
  DepthMap depth;       // z-depth in meters
  PlacedMesh object;    // world-space mesh

  void validate() const;
};

// HDR foreground radiance, zero where the mask is 0.
RgbImage shade_foreground(const GBuffer& gbuf, const HybridLightField& lf,
                          const PlacedMesh& object, const InsertionConfig& cfg);
void shade_foreground_backward(const GBuffer& gbuf, const HybridLightField& lf,
                               const PlacedMesh& object, const InsertionConfig& cfg,
                               const RgbImage& d_foreground, AdjointBuffer& adj);

// Ratio shadow map at the configured shadow resolution. In scalar mode all three channels
// hold the luminance ratio.
RgbImage shadow_ratio(const DepthMap& scene_depth, const PinholeCamera& cam,
                      const PlacedMesh& object, const HybridLightField& lf,
                      const InsertionConfig& cfg);
void shadow_ratio_backward(const DepthMap& scene_depth, const PinholeCamera& cam,
                           const PlacedMesh& object, const HybridLightField& lf,
                           const InsertionConfig& cfg, const RgbImage& d_shadow,
                           AdjointBuffer& adj);

// Bilinear resampling with clamped edges, and its transpose.
RgbImage upsample_bilinear(const RgbImage& src, int width, int height);
RgbImage upsample_bilinear_transpose(const RgbImage& d_dst, int src_width, int src_height);

// M * tonemap(foreground) + (1 - M) * background * S^(1/gamma), i.e. the background is
// darkened by S in linear space. `shadow` must already be at image resolution.
RgbImage composite(const RgbImage& background, const RgbImage& foreground_hdr,
                   const ScalarImage& mask, const RgbImage& shadow, const ToneMapParams& tone);
void composite_backward(const RgbImage& background, const RgbImage& foreground_hdr,
                        const ScalarImage& mask, const RgbImage& shadow,
                        const ToneMapParams& tone, const RgbImage& d_out,
                        RgbImage& d_foreground, RgbImage& d_shadow);

// Forward record of one insertion; the ray set is regenerated from cfg.seed on backward.
struct InsertionResult {
  GBuffer gbuffer;
  ScalarImage mask;
  RgbImage foreground;    // HDR
  RgbImage shadow;        // shadow resolution
  RgbImage shadow_full;   // image resolution
  RgbImage composite;     // LDR
};

InsertionResult render_insertion(const HybridLightField& lf, const InsertionScene& scene,
                                 const InsertionConfig& cfg);

// Gradient of sum(d_composite . composite) with respect to the lighting.
AdjointBuffer backward_insertion(const HybridLightField& lf, const InsertionScene& scene,
                                 const InsertionConfig& cfg, const InsertionResult& record,
                                 const RgbImage& d_composite, bool with_volume = true);

}  // namespace hlf
