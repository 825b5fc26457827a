// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/insertion.hpp"

#include <algorithm>
#include <cmath>

#include "hlf/parallel.hpp"

namespace hlf {

namespace {

constexpr double kGoldenRatioConjugate = 0.61803398874989484820;
constexpr Vec3 kUp{0, 0, 1};
// Stream id of the shared object-center direction set (pixel streams use the pixel index).
constexpr std::uint64_t kCenterStream = 0xffffffffffffffffull;

double frac(double x) { return x - std::floor(x); }

Vec3 lattice_point(double z, double azimuth) {
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(azimuth), r * std::sin(azimuth), z};
}

}  // namespace

std::vector<Vec3> fibonacci_hemisphere(int n, const Vec3& up) {
  if (n < 1) throw ValidationError("fibonacci_hemisphere: n must be >= 1");
  const Frame frame = Frame::from_normal(normalize(up));
  std::vector<Vec3> dirs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (i + 0.5) / n;
    const double azimuth = kTwoPi * frac(i * kGoldenRatioConjugate);
    dirs[static_cast<std::size_t>(i)] = frame.to_world(lattice_point(z, azimuth));
  }
  return dirs;
}

std::vector<Vec3> stratified_hemisphere(int n, const Vec3& up, Rng& rng) {
  if (n < 1) throw ValidationError("stratified_hemisphere: n must be >= 1");
  const Frame frame = Frame::from_normal(up);
  const double rotation = rng.uniform();
  std::vector<Vec3> dirs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (i + rng.uniform()) / n;
    const double azimuth = kTwoPi * frac(i * kGoldenRatioConjugate + rotation);
    dirs[static_cast<std::size_t>(i)] = frame.to_world(lattice_point(z, azimuth));
  }
  return dirs;
}

std::vector<Vec3> stratified_sphere(int n, Rng& rng) {
  if (n < 1) throw ValidationError("stratified_sphere: n must be >= 1");
  const double rotation = rng.uniform();
  std::vector<Vec3> dirs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + rng.uniform()) / n;
    const double azimuth = kTwoPi * frac(i * kGoldenRatioConjugate + rotation);
    dirs[static_cast<std::size_t>(i)] = lattice_point(z, azimuth);
  }
  return dirs;
}

// --- configuration ---------------------------------------------------------------------

void InsertionConfig::validate() const {
  if (center_rays < 1 || uniform_rays < 1 || shadow_rays < 1)
    throw ValidationError("ray counts must be >= 1");
  if (diffuse_rays < 0 || specular_rays < 0 || diffuse_rays + specular_rays < 1)
    throw ValidationError("importance sampling needs at least one diffuse or specular ray");
  if (shadow_width < 0 || shadow_height < 0 || (shadow_width == 0) != (shadow_height == 0))
    throw ValidationError("shadow resolution must be both positive or both 0");
  if (!(ambient >= 0) || !std::isfinite(ambient)) throw ValidationError("ambient must be >= 0");
  tone.validate();
}

InsertionConfig InsertionConfig::preset(Quality q) {
  InsertionConfig c;
  switch (q) {
    case Quality::Draft:
      c.fg_sampling = ForegroundSampling::CenterUniform;
      c.center_rays = 5000;
      c.shadow_width = 160;
      c.shadow_height = 90;
      break;
    case Quality::Paper:
      c.fg_sampling = ForegroundSampling::PixelImportance;
      c.shadow_width = 160;
      c.shadow_height = 90;
      break;
    case Quality::Final:
      c.fg_sampling = ForegroundSampling::PixelImportance;
      c.shadow_width = 0;
      c.shadow_height = 0;
      break;
  }
  return c;
}

Quality parse_quality(const std::string& name) {
  if (name == "draft") return Quality::Draft;
  if (name == "paper") return Quality::Paper;
  if (name == "final") return Quality::Final;
  throw ValidationError("unknown quality preset '" + name + "' (expected draft|paper|final)");
}

ForegroundSampling parse_fg_sampling(const std::string& name) {
  if (name == "center_uniform") return ForegroundSampling::CenterUniform;
  if (name == "pixel_uniform") return ForegroundSampling::PixelUniform;
  if (name == "pixel_importance") return ForegroundSampling::PixelImportance;
  throw ValidationError("unknown foreground sampling '" + name +
                        "' (expected center_uniform|pixel_uniform|pixel_importance)");
}

void InsertionScene::validate() const {
  camera.validate();
  if (!background.same_size(camera.width, camera.height))
    throw ValidationError("background image size does not match the camera");
  if (!depth.same_size(camera.width, camera.height))
    throw ValidationError("depth map size does not match the camera");
}

// --- G-buffer --------------------------------------------------------------------------

GBuffer rasterize_gbuffer(const PinholeCamera& cam, const PlacedMesh& object,
                          const DepthMap& scene_depth) {
  cam.validate();
  if (!scene_depth.same_size(cam.width, cam.height))
    throw ValidationError("rasterize_gbuffer: depth size does not match the camera");
  GBuffer gbuf(cam.width, cam.height);
  const Vec3 forward = cam.forward();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = pixel_ray(cam, pixel_center(x, y));
      const auto hit = object.intersect(ray);
      if (!hit) continue;
      const double z = hit->t * dot(ray.direction, forward);
      const double scene = scene_depth.at(x, y);
      if (valid_depth(scene) && scene < z) continue;
      gbuf.at(x, y) = GBufferTexel{true, hit->position, hit->normal, -ray.direction, hit->material, z};
    }
  }
  return gbuf;
}

ScalarImage gbuffer_mask(const GBuffer& gbuf) {
  ScalarImage m(gbuf.width(), gbuf.height());
  for (std::size_t i = 0; i < gbuf.size(); ++i) m[i] = gbuf[i].hit ? 1.0 : 0.0;
  return m;
}

// --- foreground ------------------------------------------------------------------------

namespace {

Rgb lobe_sum(const BrdfTerms& f, const InsertionConfig& cfg) {
  Rgb out;
  if (cfg.diffuse_lobe) out += f.diffuse;
  if (cfg.specular_lobe) out += f.specular;
  return out;
}

bool self_occluded(const PlacedMesh& object, const Vec3& x, const Vec3& l,
                   const InsertionConfig& cfg) {
  return cfg.self_occlusion && object.occluded(Ray{x, l});
}

struct CenterDirections {
  Vec3 origin;
  std::vector<Vec3> dirs;
};

CenterDirections center_directions(const PlacedMesh& object, const InsertionConfig& cfg) {
  Rng rng = Rng::for_stream(cfg.seed, kCenterStream);
  return {object.mesh.bounds().center(), stratified_sphere(cfg.center_rays, rng)};
}

// Calls fn(origin, dir, weight, occluded, center_index) for every Monte-Carlo sample of
// one G-buffer texel. The pixel value is sum(weight * L'), where L' is the ambient value
// for occluded samples and L(origin, dir) otherwise.
template <class Fn>
void visit_samples(const GBufferTexel& t, std::size_t pixel, const PlacedMesh& object,
                   const InsertionConfig& cfg, const CenterDirections& center, Fn&& fn) {
  const Vec3& n = t.normal;
  const Vec3& v = t.view;
  switch (cfg.fg_sampling) {
    case ForegroundSampling::CenterUniform: {
      const double scale = 4.0 * kPi / static_cast<double>(center.dirs.size());
      for (std::size_t k = 0; k < center.dirs.size(); ++k) {
        const Vec3& l = center.dirs[k];
        const double cos_l = dot(n, l);
        if (!(cos_l > 0.0)) continue;
        const Rgb f = lobe_sum(eval_brdf_terms(t.material, n, l, v), cfg);
        if (f == Rgb{}) continue;
        fn(center.origin, l, f * (cos_l * scale), self_occluded(object, t.position, l, cfg),
           static_cast<std::ptrdiff_t>(k));
      }
      break;
    }
    case ForegroundSampling::PixelUniform: {
      Rng rng = Rng::for_stream(cfg.seed, pixel);
      const double scale = kTwoPi / cfg.uniform_rays;
      for (const Vec3& l : stratified_hemisphere(cfg.uniform_rays, n, rng)) {
        const double cos_l = dot(n, l);
        if (!(cos_l > 0.0)) continue;
        const Rgb f = lobe_sum(eval_brdf_terms(t.material, n, l, v), cfg);
        if (f == Rgb{}) continue;
        fn(t.position, l, f * (cos_l * scale), self_occluded(object, t.position, l, cfg), -1);
      }
      break;
    }
    case ForegroundSampling::PixelImportance: {
      Rng rng = Rng::for_stream(cfg.seed, pixel);
      if (cfg.diffuse_lobe && cfg.diffuse_rays > 0) {
        for (int i = 0; i < cfg.diffuse_rays; ++i) {
          const DirectionSample s = sample_diffuse(n, rng);
          if (!(s.pdf > 0.0)) continue;
          const Rgb f = eval_brdf_terms(t.material, n, s.dir, v).diffuse;
          if (f == Rgb{}) continue;
          fn(t.position, s.dir, f * (dot(n, s.dir) / (s.pdf * cfg.diffuse_rays)),
             self_occluded(object, t.position, s.dir, cfg), -1);
        }
      }
      if (cfg.specular_lobe && cfg.specular_rays > 0) {
        for (int i = 0; i < cfg.specular_rays; ++i) {
          const DirectionSample s = sample_ggx(n, v, t.material.roughness, rng);
          if (!(s.pdf > 0.0)) continue;
          const Rgb f = eval_brdf_terms(t.material, n, s.dir, v).specular;
          if (f == Rgb{}) continue;
          fn(t.position, s.dir, f * (dot(n, s.dir) / (s.pdf * cfg.specular_rays)),
             self_occluded(object, t.position, s.dir, cfg), -1);
        }
      }
      break;
    }
  }
}

std::vector<Rgb> center_radiance(const HybridLightField& lf, const CenterDirections& center) {
  std::vector<Rgb> out(center.dirs.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = lf.radiance(center.origin, center.dirs[k]);
  return out;
}

}  // namespace

RgbImage shade_foreground(const GBuffer& gbuf, const HybridLightField& lf,
                          const PlacedMesh& object, const InsertionConfig& cfg) {
  cfg.validate();
  RgbImage out(gbuf.width(), gbuf.height());
  CenterDirections center;
  std::vector<Rgb> center_l;
  if (cfg.fg_sampling == ForegroundSampling::CenterUniform) {
    center = center_directions(object, cfg);
    center_l = center_radiance(lf, center);
  }
  const Rgb ambient(cfg.ambient);
  parallel_for(gbuf.size(), resolve_threads(cfg.threads), [&](std::size_t b, std::size_t e, int) {
    for (std::size_t p = b; p < e; ++p) {
      const GBufferTexel& t = gbuf[p];
      if (!t.hit) continue;
      Rgb acc;
      visit_samples(t, p, object, cfg, center,
                    [&](const Vec3& o, const Vec3& l, const Rgb& w, bool occluded, std::ptrdiff_t k) {
                      if (occluded) acc += w * ambient;
                      else if (k >= 0) acc += w * center_l[static_cast<std::size_t>(k)];
                      else acc += w * lf.radiance(o, l);
                    });
      out[p] = acc;
    }
  });
  return out;
}

void shade_foreground_backward(const GBuffer& gbuf, const HybridLightField& lf,
                               const PlacedMesh& object, const InsertionConfig& cfg,
                               const RgbImage& d_foreground, AdjointBuffer& adj) {
  require_same_size(gbuf, d_foreground, "shade_foreground_backward");
  const bool center_mode = cfg.fg_sampling == ForegroundSampling::CenterUniform;
  CenterDirections center;
  if (center_mode) center = center_directions(object, cfg);

  const int workers = effective_workers(gbuf.size(), resolve_threads(cfg.threads));
  std::vector<AdjointBuffer> partial;
  std::vector<std::vector<Rgb>> partial_center(static_cast<std::size_t>(workers));
  for (int w = 1; w < workers; ++w) partial.emplace_back(lf, adj.tracks_volume());
  parallel_for(gbuf.size(), workers, [&](std::size_t b, std::size_t e, int w) {
    AdjointBuffer& dst = w == 0 ? adj : partial[static_cast<std::size_t>(w - 1)];
    auto& d_center = partial_center[static_cast<std::size_t>(w)];
    if (center_mode) d_center.assign(center.dirs.size(), Rgb{});
    for (std::size_t p = b; p < e; ++p) {
      const GBufferTexel& t = gbuf[p];
      const Rgb& d = d_foreground[p];
      if (!t.hit || d == Rgb{}) continue;
      visit_samples(t, p, object, cfg, center,
                    [&](const Vec3& o, const Vec3& l, const Rgb& wgt, bool occluded, std::ptrdiff_t k) {
                      if (occluded) return;
                      if (k >= 0) d_center[static_cast<std::size_t>(k)] += wgt * d;
                      else lf.radiance_backward(o, l, wgt * d, dst);
                    });
    }
  });
  for (auto& p : partial) adj += p;
  if (center_mode) {
    for (std::size_t k = 0; k < center.dirs.size(); ++k) {
      Rgb d;
      for (const auto& pc : partial_center) d += pc[k];
      if (d != Rgb{}) lf.radiance_backward(center.origin, center.dirs[k], d, adj);
    }
  }
}

// --- shadows ---------------------------------------------------------------------------

namespace {

struct ShadowGrid {
  int width, height;

  static ShadowGrid from(const InsertionConfig& cfg, const PinholeCamera& cam) {
    if (cfg.shadow_width == 0) return {cam.width, cam.height};
    return {cfg.shadow_width, cfg.shadow_height};
  }
};

// World point (lifted by the shadow offset) seen by shadow pixel (x, y), if its depth is valid.
std::optional<Vec3> shadow_point(const PinholeCamera& cam, const DepthMap& depth,
                                 const ShadowGrid& g, int x, int y) {
  const Vec2 px{(x + 0.5) * cam.width / g.width, (y + 0.5) * cam.height / g.height};
  const int ix = std::min(static_cast<int>(px.x), cam.width - 1);
  const int iy = std::min(static_cast<int>(px.y), cam.height - 1);
  const double d = depth.at(ix, iy);
  if (!valid_depth(d)) return std::nullopt;
  return unproject(cam, px, d) + kUp * kShadowOriginOffset;
}

// Radiance-dependent part of one shadow pixel.
struct ShadowSums {
  Rgb numerator, denominator;
};

double ratio_scalar(const ShadowSums& s) {
  const double den = luminance(s.denominator);
  return den > 0.0 ? luminance(s.numerator) / den : 1.0;
}

Rgb ratio_rgb(const ShadowSums& s) {
  Rgb out;
  for (int c = 0; c < 3; ++c)
    out[c] = s.denominator[c] > 0.0 ? s.numerator[c] / s.denominator[c] : 1.0;
  return out;
}

}  // namespace

RgbImage shadow_ratio(const DepthMap& scene_depth, const PinholeCamera& cam,
                      const PlacedMesh& object, const HybridLightField& lf,
                      const InsertionConfig& cfg) {
  cfg.validate();
  cam.validate();
  if (!scene_depth.same_size(cam.width, cam.height))
    throw ValidationError("shadow_ratio: depth size does not match the camera");
  const ShadowGrid g = ShadowGrid::from(cfg, cam);
  RgbImage out(g.width, g.height, Rgb(1.0));
  if (object.empty()) return out;
  const std::vector<Vec3> dirs = fibonacci_hemisphere(cfg.shadow_rays, kUp);
  const Rgb ambient(cfg.ambient);
  parallel_for(out.size(), resolve_threads(cfg.threads), [&](std::size_t b, std::size_t e, int) {
    std::vector<char> occluded(dirs.size());
    for (std::size_t p = b; p < e; ++p) {
      const int x = static_cast<int>(p % static_cast<std::size_t>(g.width));
      const int y = static_cast<int>(p / static_cast<std::size_t>(g.width));
      const auto point = shadow_point(cam, scene_depth, g, x, y);
      if (!point) continue;
      bool any = false;
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        occluded[k] = object.occluded(Ray{*point, dirs[k]});
        any = any || occluded[k];
      }
      // Unoccluded pixels have identical numerator and denominator.
      if (!any) continue;
      ShadowSums s;
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        const double w = dirs[k].z;
        const Rgb l = lf.radiance(*point, dirs[k]);
        s.denominator += l * w;
        s.numerator += (occluded[k] ? ambient : l) * w;
      }
      out[p] = cfg.shadow_rgb ? ratio_rgb(s) : Rgb(ratio_scalar(s));
    }
  });
  return out;
}

void shadow_ratio_backward(const DepthMap& scene_depth, const PinholeCamera& cam,
                           const PlacedMesh& object, const HybridLightField& lf,
                           const InsertionConfig& cfg, const RgbImage& d_shadow,
                           AdjointBuffer& adj) {
  const ShadowGrid g = ShadowGrid::from(cfg, cam);
  if (!d_shadow.same_size(g.width, g.height))
    throw ValidationError("shadow_ratio_backward: gradient size does not match the shadow map");
  if (object.empty()) return;
  const std::vector<Vec3> dirs = fibonacci_hemisphere(cfg.shadow_rays, kUp);
  const Rgb ambient(cfg.ambient);
  const int workers = effective_workers(d_shadow.size(), resolve_threads(cfg.threads));
  std::vector<AdjointBuffer> partial;
  for (int w = 1; w < workers; ++w) partial.emplace_back(lf, adj.tracks_volume());
  parallel_for(d_shadow.size(), workers, [&](std::size_t b, std::size_t e, int w) {
    AdjointBuffer& dst = w == 0 ? adj : partial[static_cast<std::size_t>(w - 1)];
    std::vector<char> occluded(dirs.size());
    std::vector<Rgb> radiance(dirs.size());
    for (std::size_t p = b; p < e; ++p) {
      const Rgb& d = d_shadow[p];
      if (d == Rgb{}) continue;
      const int x = static_cast<int>(p % static_cast<std::size_t>(g.width));
      const int y = static_cast<int>(p / static_cast<std::size_t>(g.width));
      const auto point = shadow_point(cam, scene_depth, g, x, y);
      if (!point) continue;
      bool any = false;
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        occluded[k] = object.occluded(Ray{*point, dirs[k]});
        any = any || occluded[k];
      }
      if (!any) continue;
      ShadowSums s;
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        const double wk = dirs[k].z;
        radiance[k] = lf.radiance(*point, dirs[k]);
        s.denominator += radiance[k] * wk;
        s.numerator += (occluded[k] ? ambient : radiance[k]) * wk;
      }
      Rgb d_num, d_den;
      if (cfg.shadow_rgb) {
        for (int c = 0; c < 3; ++c) {
          if (!(s.denominator[c] > 0.0)) continue;
          d_num[c] = d[c] / s.denominator[c];
          d_den[c] = -d[c] * s.numerator[c] / (s.denominator[c] * s.denominator[c]);
        }
      } else {
        const double den = luminance(s.denominator);
        if (!(den > 0.0)) continue;
        const double d_s = sum(d);  // all channels carry the same scalar ratio
        d_num = kLuminanceWeights * (d_s / den);
        d_den = kLuminanceWeights * (-d_s * luminance(s.numerator) / (den * den));
      }
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        const Rgb d_l = (occluded[k] ? d_den : d_den + d_num) * dirs[k].z;
        lf.radiance_backward(*point, dirs[k], d_l, dst);
      }
    }
  });
  for (auto& p : partial) adj += p;
}

// --- compositing -----------------------------------------------------------------------

namespace {

struct AxisTaps {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

AxisTaps axis_taps(int dst_index, int dst_size, int src_size) {
  const double s = (dst_index + 0.5) * src_size / dst_size - 0.5;
  const double f = std::floor(s);
  const int i = static_cast<int>(f);
  return {std::clamp(i, 0, src_size - 1), std::clamp(i + 1, 0, src_size - 1), s - f};
}

}  // namespace

RgbImage upsample_bilinear(const RgbImage& src, int width, int height) {
  RgbImage out(width, height);
  for (int y = 0; y < height; ++y) {
    const AxisTaps ty = axis_taps(y, height, src.height());
    for (int x = 0; x < width; ++x) {
      const AxisTaps tx = axis_taps(x, width, src.width());
      out.at(x, y) = src.at(tx.i0, ty.i0) * ((1 - tx.w1) * (1 - ty.w1)) +
                     src.at(tx.i1, ty.i0) * (tx.w1 * (1 - ty.w1)) +
                     src.at(tx.i0, ty.i1) * ((1 - tx.w1) * ty.w1) +
                     src.at(tx.i1, ty.i1) * (tx.w1 * ty.w1);
    }
  }
  return out;
}

RgbImage upsample_bilinear_transpose(const RgbImage& d_dst, int src_width, int src_height) {
  RgbImage out(src_width, src_height);
  for (int y = 0; y < d_dst.height(); ++y) {
    const AxisTaps ty = axis_taps(y, d_dst.height(), src_height);
    for (int x = 0; x < d_dst.width(); ++x) {
      const AxisTaps tx = axis_taps(x, d_dst.width(), src_width);
      const Rgb& d = d_dst.at(x, y);
      out.at(tx.i0, ty.i0) += d * ((1 - tx.w1) * (1 - ty.w1));
      out.at(tx.i1, ty.i0) += d * (tx.w1 * (1 - ty.w1));
      out.at(tx.i0, ty.i1) += d * ((1 - tx.w1) * ty.w1);
      out.at(tx.i1, ty.i1) += d * (tx.w1 * ty.w1);
    }
  }
  return out;
}

RgbImage composite(const RgbImage& background, const RgbImage& foreground_hdr,
                   const ScalarImage& mask, const RgbImage& shadow, const ToneMapParams& tone) {
  require_same_size(background, foreground_hdr, "composite foreground");
  require_same_size(background, mask, "composite mask");
  require_same_size(background, shadow, "composite shadow");
  tone.validate();
  const double inv_gamma = 1.0 / tone.gamma;
  RgbImage out(background.width(), background.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = mask[i];
    for (int c = 0; c < 3; ++c) {
      const double fg = m != 0.0 ? m * tonemap(foreground_hdr[i][c], tone) : 0.0;
      const double bg =
          m != 1.0 ? (1.0 - m) * background[i][c] * std::pow(std::max(shadow[i][c], 0.0), inv_gamma)
                   : 0.0;
      out[i][c] = fg + bg;
    }
  }
  return out;
}

void composite_backward(const RgbImage& background, const RgbImage& foreground_hdr,
                        const ScalarImage& mask, const RgbImage& shadow,
                        const ToneMapParams& tone, const RgbImage& d_out,
                        RgbImage& d_foreground, RgbImage& d_shadow) {
  require_same_size(background, d_out, "composite_backward");
  const double inv_gamma = 1.0 / tone.gamma;
  d_foreground = RgbImage(background.width(), background.height());
  d_shadow = RgbImage(background.width(), background.height());
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    const double m = mask[i];
    for (int c = 0; c < 3; ++c) {
      const double d = d_out[i][c];
      if (m != 0.0) d_foreground[i][c] = d * m * tonemap_derivative(foreground_hdr[i][c], tone);
      const double s = shadow[i][c];
      if (m != 1.0 && s > 0.0)
        d_shadow[i][c] = d * (1.0 - m) * background[i][c] * inv_gamma * std::pow(s, inv_gamma - 1.0);
    }
  }
}

// --- full pass -------------------------------------------------------------------------

InsertionResult render_insertion(const HybridLightField& lf, const InsertionScene& scene,
                                 const InsertionConfig& cfg) {
  scene.validate();
  cfg.validate();
  InsertionResult r;
  r.gbuffer = rasterize_gbuffer(scene.camera, scene.object, scene.depth);
  r.mask = gbuffer_mask(r.gbuffer);
  r.foreground = shade_foreground(r.gbuffer, lf, scene.object, cfg);
  r.shadow = shadow_ratio(scene.depth, scene.camera, scene.object, lf, cfg);
  r.shadow_full = upsample_bilinear(r.shadow, scene.camera.width, scene.camera.height);
  r.composite = composite(scene.background, r.foreground, r.mask, r.shadow_full, cfg.tone);
  return r;
}

AdjointBuffer backward_insertion(const HybridLightField& lf, const InsertionScene& scene,
                                 const InsertionConfig& cfg, const InsertionResult& record,
                                 const RgbImage& d_composite, bool with_volume) {
  if (!d_composite.same_size(record.composite))
    throw ValidationError("backward_insertion: gradient size does not match the forward record");
  RgbImage d_fg, d_shadow_full;
  composite_backward(scene.background, record.foreground, record.mask, record.shadow_full,
                     cfg.tone, d_composite, d_fg, d_shadow_full);
  const RgbImage d_shadow =
      upsample_bilinear_transpose(d_shadow_full, record.shadow.width(), record.shadow.height());
  AdjointBuffer adj(lf, with_volume);
  shade_foreground_backward(record.gbuffer, lf, scene.object, cfg, d_fg, adj);
  shadow_ratio_backward(scene.depth, scene.camera, scene.object, lf, cfg, d_shadow, adj);
  adj.project_peak_dir(lf.sky.peak_dir);
  return adj;
}

}  // namespace hlf
