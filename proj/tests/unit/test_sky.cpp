// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "hlf/sky.hpp"

using namespace hlf;

TEST_CASE("sky radiance") {
  SkyDome sky = SkyDome::uniform(Rgb(0.0), 16, 32);
  sky.peak_dir = {0, 0, 1};
  sky.peak_intensity = Rgb(1.0);
  CHECK(sky.radiance(sky.peak_dir) == Rgb(1.0));
  sky.peak_dir = normalize(Vec3{0.3, 0.4, 0.8});

  // A direction with l . peak = 0.98.
  const Frame f = Frame::from_normal(sky.peak_dir);
  const Vec3 l = f.to_world({std::sqrt(1 - 0.98 * 0.98), 0, 0.98});
  CHECK(sky.radiance(l).r == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));

  SkyDome flat = SkyDome::uniform(Rgb(0.0), 16, 32);
  for (std::size_t i = 0; i < flat.background.size(); ++i)
    flat.background[i] = Rgb(static_cast<double>(i), 1.0, 0.5);
  const Vec3 d = normalize(Vec3{-0.2, 0.7, 0.1});
  CHECK(flat.radiance(d) == flat.background_radiance(d));
}

TEST_CASE("bilinear taps reproduce the background lookup") {
  SkyDome sky = SkyDome::uniform(Rgb(0.0), 8, 16);
  for (std::size_t i = 0; i < sky.background.size(); ++i)
    sky.background[i] = Rgb(std::sin(static_cast<double>(i)) + 1.5);
  const Vec3 d = normalize(Vec3{0.4, -0.5, 0.3});
  const BilinearTaps taps = equirect_bilinear_taps(d, 16, 8);
  double sum_w = 0, value = 0;
  for (int k = 0; k < 4; ++k) {
    sum_w += taps.weight[k];
    value += taps.weight[k] * sky.background[taps.index[k]].r;
  }
  CHECK(sum_w == doctest::Approx(1.0));
  CHECK(value == doctest::Approx(sky.background_radiance(d).r));

  // The adjoint of a sky-only lookup lands on the same four texels.
  SkyAdjoint adj(sky.background.size());
  sky.radiance_backward(d, Rgb(2.0), adj);
  for (int k = 0; k < 4; ++k)
    CHECK(adj.d_background[taps.index[k]].r >= 2.0 * taps.weight[k] - 1e-12);
}

TEST_CASE("peak encodings") {
  const Vec3 f{0, 0, 1};
  Image<Vec3> dirs(3, 1);
  dirs[0] = f;
  dirs[1] = {1, 0, 0};
  dirs[2] = -f;
  const ScalarImage enc = peak_dir_encoding(dirs, f);
  CHECK(enc[0] == 1.0);
  CHECK(enc[1] == doctest::Approx(std::exp(-100.0)));
  CHECK(enc[2] == doctest::Approx(std::exp(-200.0)));

  ScalarImage e(2, 1);
  e[0] = 1.0;
  e[1] = 0.97;
  const RgbImage inten = peak_intensity_encoding(e, Rgb(3, 4, 5));
  CHECK(inten[0] == Rgb(3, 4, 5));
  CHECK(inten[1] == Rgb(0.0));
}

TEST_CASE("tonemap") {
  const ToneMapParams p;
  CHECK(tonemap(std::pow(0.5, 2.2), p) == doctest::Approx(0.5));
  CHECK(soft_clip(0.95, 0.95) == 0.95);
  CHECK(soft_clip_derivative(0.95, 0.95) == 1.0);
  CHECK(soft_clip(1.95, 0.95) == doctest::Approx(1 - 0.05 * std::exp(-20.0)).epsilon(1e-12));
  double prev = -1;
  for (double x = 0; x < 20; x += 0.01) {
    const double y = tonemap(x, p);
    CHECK(y >= prev);
    CHECK(y < 1.0);
    prev = y;
  }
}

TEST_CASE("angular and log losses") {
  CHECK(angular_loss({0, 0, 1}, {0, 0, 1}) == 0.0);
  CHECK(angular_loss({1, 0, 0}, {0, 1, 0}) == doctest::Approx(kPi / 2));
  const std::vector<double> a{std::exp(1.0) - 1}, b{0.0};
  CHECK(log_encoded_l2(a, b) == doctest::Approx(1.0));
  CHECK(log_encoded_l2(a, a) == 0.0);
}
