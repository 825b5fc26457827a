// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/brdf.hpp"

#include <algorithm>
#include <cmath>

namespace hlf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr int kGgxRetries = 8;

}  // namespace

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ull)));
}

double clamped_roughness(double r) { return std::max(r, kMinRoughness); }

double ggx_d(double n_dot_h, double roughness) {
  const double r = clamped_roughness(roughness);
  const double a2 = r * r * r * r;
  const double denom = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
  return a2 / (kPi * denom * denom);
}

double smith_g(double n_dot_l, double n_dot_v, double roughness) {
  const double r = clamped_roughness(roughness);
  const double k = (r + 1.0) * (r + 1.0) / 8.0;
  return n_dot_l * n_dot_v / ((n_dot_l * (1.0 - k) + k) * (n_dot_v * (1.0 - k) + k));
}

Rgb fresnel_schlick(const Rgb& f0, double v_dot_h) {
  const double w = std::exp2((-5.55473 * v_dot_h - 6.98316) * v_dot_h);
  return f0 + (Rgb(1.0) - f0) * w;
}

Rgb specular_color(const MaterialParams& m) {
  return Rgb(0.08 * m.specular * (1.0 - m.metallic)) + m.base_color * m.metallic;
}

Rgb diffuse_color(const MaterialParams& m) { return m.base_color * (1.0 - m.metallic); }

BrdfTerms eval_brdf_terms(const MaterialParams& mat, const Vec3& n, const Vec3& l, const Vec3& v) {
  const double nl = dot(n, l), nv = dot(n, v);
  if (!(nl > 0.0) || !(nv > 0.0)) return {};
  const Vec3 hv = l + v;
  const double hl = length(hv);
  if (!(hl > 0.0)) return {};
  const Vec3 h = hv / hl;
  const double d = ggx_d(dot(n, h), mat.roughness);
  const double g = smith_g(nl, nv, mat.roughness);
  const Rgb f = fresnel_schlick(specular_color(mat), dot(v, h));
  const double denom =
      4.0 * std::max(nl, kBrdfDenominatorFloor) * std::max(nv, kBrdfDenominatorFloor);
  return {diffuse_color(mat) * kInvPi, f * (d * g / denom)};
}

DirectionSample sample_uniform_hemisphere(const Vec3& n, Rng& rng) {
  const double z = rng.uniform();
  const double phi = kTwoPi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {Frame::from_normal(n).to_world({r * std::cos(phi), r * std::sin(phi), z}), 1.0 / kTwoPi};
}

DirectionSample sample_diffuse(const Vec3& n, Rng& rng) {
  // Malley's method: uniform disk lifted to the hemisphere.
  const double u = rng.uniform();
  const double phi = kTwoPi * rng.uniform();
  const double r = std::sqrt(u);
  const double z = std::sqrt(std::max(0.0, 1.0 - u));
  const Vec3 l = Frame::from_normal(n).to_world({r * std::cos(phi), r * std::sin(phi), z});
  const double pdf = z * kInvPi;
  if (!(pdf > 0.0)) return {n, 0.0};
  return {l, pdf};
}

double diffuse_pdf(const Vec3& n, const Vec3& l) { return std::max(dot(n, l), 0.0) * kInvPi; }

DirectionSample sample_ggx(const Vec3& n, const Vec3& v, double roughness, Rng& rng) {
  const double r = clamped_roughness(roughness);
  const double a2 = r * r * r * r;
  const Frame frame = Frame::from_normal(n);
  for (int attempt = 0; attempt < kGgxRetries; ++attempt) {
    const double u = rng.uniform();
    const double phi = kTwoPi * rng.uniform();
    const double cos_t = std::sqrt((1.0 - u) / (1.0 + (a2 - 1.0) * u));
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const Vec3 h = frame.to_world({sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t});
    const double vh = dot(v, h);
    if (!(vh > 0.0)) continue;
    const Vec3 l = h * (2.0 * vh) - v;
    if (!(dot(n, l) > 0.0)) continue;
    const double pdf = ggx_d(cos_t, r) * cos_t / (4.0 * vh);
    if (pdf > 0.0 && std::isfinite(pdf)) return {l, pdf};
  }
  return {n, 0.0};
}

double ggx_pdf(const Vec3& n, const Vec3& v, const Vec3& l, double roughness) {
  const Vec3 hv = l + v;
  const double hl = length(hv);
  if (!(hl > 0.0)) return 0.0;
  const Vec3 h = hv / hl;
  const double vh = dot(v, h), nh = dot(n, h);
  if (!(vh > 0.0) || !(nh > 0.0)) return 0.0;
  return ggx_d(nh, roughness) * nh / (4.0 * vh);
}

}  // namespace hlf
