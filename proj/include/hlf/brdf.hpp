// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

// Metallic/roughness microfacet BRDF (GGX distribution, Schlick-GGX geometry term with
// k = (r + 1)^2 / 8, spherical-Gaussian Schlick Fresnel) and its sampling routines.

#pragma once

#include <cstdint>
#include <random>

#include "hlf/material.hpp"
#include "hlf/math.hpp"

namespace hlf {

inline constexpr double kMinRoughness = 0.02;
inline constexpr double kBrdfDenominatorFloor = 1e-4;

// Per-worker random stream. Streams derived from (seed, stream id) are independent of
// scheduling, which keeps renders reproducible across thread counts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

struct BrdfTerms {
  Rgb diffuse;
  Rgb specular;
  Rgb total() const { return diffuse + specular; }
};

double clamped_roughness(double r);
// GGX normal distribution with alpha = r^2.
double ggx_d(double n_dot_h, double roughness);
double smith_g(double n_dot_l, double n_dot_v, double roughness);
Rgb fresnel_schlick(const Rgb& f0, double v_dot_h);
Rgb specular_color(const MaterialParams& m);
Rgb diffuse_color(const MaterialParams& m);

// Zero outside the upper hemisphere of n (for either l or v) and when l = -v.
BrdfTerms eval_brdf_terms(const MaterialParams& mat, const Vec3& n, const Vec3& l, const Vec3& v);
inline Rgb eval_brdf(const MaterialParams& mat, const Vec3& n, const Vec3& l, const Vec3& v) {
  return eval_brdf_terms(mat, n, l, v).total();
}

struct DirectionSample {
  Vec3 dir;
  double pdf = 0;  // solid-angle density; 0 marks a rejected (zero-weight) sample
};

DirectionSample sample_uniform_hemisphere(const Vec3& n, Rng& rng);
DirectionSample sample_diffuse(const Vec3& n, Rng& rng);
double diffuse_pdf(const Vec3& n, const Vec3& l);

// Samples h from D(h)(n.h) and reflects v. Retries a few times when the reflection goes
// below the horizon, then returns a zero-pdf sample.
DirectionSample sample_ggx(const Vec3& n, const Vec3& v, double roughness, Rng& rng);
double ggx_pdf(const Vec3& n, const Vec3& v, const Vec3& l, double roughness);

}  // namespace hlf
