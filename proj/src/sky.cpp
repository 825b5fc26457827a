// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/sky.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hlf/geometry.hpp"

namespace hlf {

BilinearTaps equirect_bilinear_taps(const Vec3& dir, int w, int h) {
  const Vec2 px = equirect_dir_to_px(dir, w, h);
  // Texel centers sit at half-integer coordinates.
  const double fx = px.x - 0.5, fy = px.y - 0.5;
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double ax = fx - x0f, ay = fy - y0f;
  auto wrap = [w](int x) { return ((x % w) + w) % w; };
  auto clampy = [h](int y) { return std::clamp(y, 0, h - 1); };
  const int x0 = wrap(static_cast<int>(x0f)), x1 = wrap(static_cast<int>(x0f) + 1);
  const int y0 = clampy(static_cast<int>(y0f)), y1 = clampy(static_cast<int>(y0f) + 1);
  auto at = [w](int x, int y) {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
  };
  BilinearTaps taps;
  taps.index = {at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1)};
  taps.weight = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
  return taps;
}

SkyAdjoint& SkyAdjoint::operator+=(const SkyAdjoint& o) {
  d_peak_intensity += o.d_peak_intensity;
  d_peak_dir += o.d_peak_dir;
  if (d_background.size() != o.d_background.size())
    throw ValidationError("sky adjoint shape mismatch");
  for (std::size_t i = 0; i < d_background.size(); ++i) d_background[i] += o.d_background[i];
  return *this;
}

SkyDome SkyDome::uniform(const Rgb& radiance, int height, int width) {
  SkyDome s;
  s.background = RgbImage(width, height, radiance);
  return s;
}

void SkyDome::validate() const {
  if (std::abs(length(peak_dir) - 1.0) > 1e-6) throw ValidationError("sky peak_dir must be unit length");
  if (!(sharpness > 0) || !std::isfinite(sharpness)) throw ValidationError("sky sharpness must be positive");
  auto ok = [](const Rgb& c) { return is_finite(c) && c.r >= 0 && c.g >= 0 && c.b >= 0; };
  if (!ok(peak_intensity)) throw ValidationError("sky peak_intensity must be finite and non-negative");
  if (background.empty()) throw ValidationError("sky background must be non-empty");
  for (const auto& c : background.pixels())
    if (!ok(c)) throw ValidationError("sky background must be finite and non-negative");
}

double SkyDome::peak_lobe(const Vec3& l) const {
  return std::exp(sharpness * (dot(l, peak_dir) - 1.0));
}

Rgb SkyDome::background_radiance(const Vec3& l) const {
  const BilinearTaps taps = equirect_bilinear_taps(l, background.width(), background.height());
  Rgb out;
  for (int i = 0; i < 4; ++i) out += background[taps.index[i]] * taps.weight[i];
  return out;
}

Rgb SkyDome::radiance(const Vec3& l) const {
  return background_radiance(l) + peak_intensity * peak_lobe(l);
}

void SkyDome::radiance_backward(const Vec3& l, const Rgb& d_radiance, SkyAdjoint& adj) const {
  const BilinearTaps taps = equirect_bilinear_taps(l, background.width(), background.height());
  for (int i = 0; i < 4; ++i) adj.d_background[taps.index[i]] += d_radiance * taps.weight[i];
  const double lobe = peak_lobe(l);
  adj.d_peak_intensity += d_radiance * lobe;
  adj.d_peak_dir += l * (dot(d_radiance, peak_intensity) * lobe * sharpness);
}

Image<Vec3> equirect_directions(int w, int h) {
  Image<Vec3> dirs(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) dirs.at(x, y) = equirect_px_to_dir(pixel_center(x, y), w, h);
  return dirs;
}

ScalarImage peak_dir_encoding(const Image<Vec3>& dirs, const Vec3& f_dir) {
  ScalarImage enc(dirs.width(), dirs.height());
  for (std::size_t i = 0; i < dirs.size(); ++i)
    enc[i] = std::exp(kDefaultSunSharpness * (dot(dirs[i], f_dir) - 1.0));
  return enc;
}

RgbImage peak_intensity_encoding(const ScalarImage& encoding, const Rgb& f_intensity) {
  RgbImage out(encoding.width(), encoding.height());
  for (std::size_t i = 0; i < encoding.size(); ++i)
    if (encoding[i] >= kPeakEncodingThreshold) out[i] = f_intensity;
  return out;
}

void ToneMapParams::validate() const {
  if (!(gamma > 0)) throw ValidationError("tonemap gamma must be positive");
  if (!(tau > 0 && tau < 1)) throw ValidationError("tonemap tau must lie in (0,1)");
}

double soft_clip(double x, double tau) {
  if (x <= tau) return x;
  // The exponential underflows for large x; keep the range open at 1.
  constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::min(1.0 - (1.0 - tau) * std::exp(-(x - tau) / (1.0 - tau)), kBelowOne);
}

double soft_clip_derivative(double x, double tau) {
  if (x <= tau) return 1.0;
  return std::exp(-(x - tau) / (1.0 - tau));
}

double tonemap(double linear, const ToneMapParams& p) {
  return soft_clip(std::pow(std::max(linear, 0.0), 1.0 / p.gamma), p.tau);
}

double tonemap_derivative(double linear, const ToneMapParams& p) {
  // The gamma curve has an infinite slope at 0; black pixels get a zero subgradient.
  if (!(linear > 0.0)) return 0.0;
  const double encoded = std::pow(linear, 1.0 / p.gamma);
  return soft_clip_derivative(encoded, p.tau) * encoded / (p.gamma * linear);
}

RgbImage hdr_to_ldr(const RgbImage& hdr, const ToneMapParams& p) {
  p.validate();
  RgbImage out(hdr.width(), hdr.height());
  for (std::size_t i = 0; i < hdr.size(); ++i)
    for (int c = 0; c < 3; ++c) out[i][c] = tonemap(hdr[i][c], p);
  return out;
}

double angular_loss(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(dot(a, b), -1.0, 1.0));
}

double log_encoded_l2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("log_encoded_l2: size mismatch");
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::log1p(a[i]) - std::log1p(b[i]);
    total += d * d;
  }
  return total;
}

}  // namespace hlf
