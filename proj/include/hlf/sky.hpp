// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "hlf/image.hpp"
#include "hlf/math.hpp"

namespace hlf {

inline constexpr int kDefaultSkyHeight = 64;
inline constexpr int kDefaultSkyWidth = 256;
inline constexpr double kDefaultSunSharpness = 100.0;
// Peak-intensity encoding marks pixels whose direction encoding reaches this value.
inline constexpr double kPeakEncodingThreshold = 0.98;

// Four texels and weights of a bilinear lookup into an equirect image (wraps in azimuth,
// clamps at the poles).
struct BilinearTaps {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
};

BilinearTaps equirect_bilinear_taps(const Vec3& dir, int w, int h);

// Gradient accumulator shaped like a SkyDome.
struct SkyAdjoint {
  Rgb d_peak_intensity;
  Vec3 d_peak_dir;
  std::vector<Rgb> d_background;

  SkyAdjoint() = default;
  explicit SkyAdjoint(std::size_t texels) : d_background(texels) {}
  SkyAdjoint& operator+=(const SkyAdjoint& o);
};

// HDR sky at infinity: a spherical-Gaussian sun added on top of an equirect background.
struct SkyDome {
  Vec3 peak_dir{0, 0, 1};
  Rgb peak_intensity;
  double sharpness = kDefaultSunSharpness;
  RgbImage background{kDefaultSkyWidth, kDefaultSkyHeight};

  static SkyDome uniform(const Rgb& radiance, int height = kDefaultSkyHeight,
                         int width = kDefaultSkyWidth);

  void validate() const;

  // e^(s (l . peak_dir - 1))
  double peak_lobe(const Vec3& l) const;
  Rgb background_radiance(const Vec3& l) const;
  Rgb radiance(const Vec3& l) const;

  void radiance_backward(const Vec3& l, const Rgb& d_radiance, SkyAdjoint& adj) const;
};

inline Rgb sky_radiance(const SkyDome& sky, const Vec3& l) { return sky.radiance(l); }

// Unit direction of every pixel center of a w x h equirect panorama.
Image<Vec3> equirect_directions(int w, int h);

// Per-pixel e^(100 (u . f_dir - 1)).
ScalarImage peak_dir_encoding(const Image<Vec3>& dirs, const Vec3& f_dir);

// f_intensity where the direction encoding is at least 0.98, else black.
RgbImage peak_intensity_encoding(const ScalarImage& encoding, const Rgb& f_intensity);

struct ToneMapParams {
  double gamma = 2.2;
  double tau = 0.95;

  void validate() const;
};

// Soft clip: identity up to tau, then exponential saturation towards 1. C1 at tau.
double soft_clip(double x, double tau);
double soft_clip_derivative(double x, double tau);

// Gamma encode then soft clip. Output lies in [0, 1).
double tonemap(double linear, const ToneMapParams& p);
double tonemap_derivative(double linear, const ToneMapParams& p);
RgbImage hdr_to_ldr(const RgbImage& hdr, const ToneMapParams& p = {});

// Angle between two unit vectors in radians.
double angular_loss(const Vec3& a, const Vec3& b);
// sum (log(1 + a) - log(1 + b))^2
double log_encoded_l2(std::span<const double> a, std::span<const double> b);

}  // namespace hlf
