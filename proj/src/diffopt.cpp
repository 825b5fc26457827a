// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/diffopt.hpp"

#include <algorithm>
#include <cmath>

#include "hlf/parallel.hpp"

namespace hlf {

// --- parameter addressing --------------------------------------------------------------

namespace {

const char* kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::VoxelColor: return "c";
    case ParamKind::VoxelMu: return "mu";
    case ParamKind::VoxelSigma: return "sigma";
    case ParamKind::VoxelAlpha: return "alpha";
    case ParamKind::PeakIntensity: return "peak_intensity";
    case ParamKind::PeakDir: return "peak_dir";
    case ParamKind::Background: return "background";
  }
  return "?";
}

bool is_voxel_param(ParamKind k) {
  return k == ParamKind::VoxelColor || k == ParamKind::VoxelMu || k == ParamKind::VoxelSigma ||
         k == ParamKind::VoxelAlpha;
}

// Radiance-valued parameters, updated multiplicatively by the optimizer.
bool is_radiance_param(ParamKind k) {
  return k == ParamKind::VoxelColor || k == ParamKind::PeakIntensity || k == ParamKind::Background;
}

double& vec_component(Vec3& v, int c) { return c == 0 ? v.x : (c == 1 ? v.y : v.z); }

}  // namespace

std::string param_name(const ParamRef& p) {
  static const char* kChannels[] = {"r", "g", "b"};
  static const char* kAxes[] = {"x", "y", "z"};
  std::string out;
  if (is_voxel_param(p.kind)) out = "voxel[" + std::to_string(p.index) + "].";
  out += kind_name(p.kind);
  if (p.kind == ParamKind::Background) out += "[" + std::to_string(p.index) + "]";
  switch (p.kind) {
    case ParamKind::VoxelColor:
    case ParamKind::PeakIntensity:
    case ParamKind::Background: out += std::string(".") + kChannels[p.component]; break;
    case ParamKind::VoxelMu:
    case ParamKind::PeakDir: out += std::string(".") + kAxes[p.component]; break;
    default: break;
  }
  return out;
}

double read_param(const HybridLightField& lf, const ParamRef& p) {
  switch (p.kind) {
    case ParamKind::VoxelColor: return lf.grid.voxel(p.index).c[p.component];
    case ParamKind::VoxelMu: return lf.grid.voxel(p.index).mu[p.component];
    case ParamKind::VoxelSigma: return lf.grid.voxel(p.index).sigma;
    case ParamKind::VoxelAlpha: return lf.grid.voxel(p.index).alpha;
    case ParamKind::PeakIntensity: return lf.sky.peak_intensity[p.component];
    case ParamKind::PeakDir: return lf.sky.peak_dir[p.component];
    case ParamKind::Background: return lf.sky.background[p.index][p.component];
  }
  return 0;
}

void write_param(HybridLightField& lf, const ParamRef& p, double value) {
  if (is_voxel_param(p.kind)) {
    VsgVoxel v = lf.grid.voxel(p.index);
    switch (p.kind) {
      case ParamKind::VoxelColor: v.c[p.component] = value; break;
      case ParamKind::VoxelMu: vec_component(v.mu, p.component) = value; break;
      case ParamKind::VoxelSigma: v.sigma = value; break;
      default: v.alpha = value; break;
    }
    lf.grid.set_voxel_unchecked(p.index, v);
    return;
  }
  switch (p.kind) {
    case ParamKind::PeakIntensity: lf.sky.peak_intensity[p.component] = value; break;
    case ParamKind::PeakDir: vec_component(lf.sky.peak_dir, p.component) = value; break;
    default: lf.sky.background[p.index][p.component] = value; break;
  }
}

double read_adjoint(const AdjointBuffer& adj, const ParamRef& p) {
  if (is_voxel_param(p.kind) && adj.volume.d_voxels.empty()) return 0.0;
  switch (p.kind) {
    case ParamKind::VoxelColor: return adj.volume.d_voxels[p.index].d_c[p.component];
    case ParamKind::VoxelMu: return adj.volume.d_voxels[p.index].d_mu[p.component];
    case ParamKind::VoxelSigma: return adj.volume.d_voxels[p.index].d_sigma;
    case ParamKind::VoxelAlpha: return adj.volume.d_voxels[p.index].d_alpha;
    case ParamKind::PeakIntensity: return adj.sky.d_peak_intensity[p.component];
    case ParamKind::PeakDir: return adj.sky.d_peak_dir[p.component];
    case ParamKind::Background: return adj.sky.d_background[p.index][p.component];
  }
  return 0;
}

std::vector<ParamRef> lighting_params(const HybridLightField& lf, bool with_volume) {
  std::vector<ParamRef> out;
  if (with_volume) {
    out.reserve(lf.grid.size() * 8);
    for (std::size_t i = 0; i < lf.grid.size(); ++i) {
      for (int c = 0; c < 3; ++c) out.push_back({ParamKind::VoxelColor, i, c});
      for (int c = 0; c < 3; ++c) out.push_back({ParamKind::VoxelMu, i, c});
      out.push_back({ParamKind::VoxelSigma, i, 0});
      out.push_back({ParamKind::VoxelAlpha, i, 0});
    }
  }
  for (int c = 0; c < 3; ++c) out.push_back({ParamKind::PeakIntensity, 0, c});
  for (int c = 0; c < 3; ++c) out.push_back({ParamKind::PeakDir, 0, c});
  for (std::size_t i = 0; i < lf.sky.background.size(); ++i)
    for (int c = 0; c < 3; ++c) out.push_back({ParamKind::Background, i, c});
  return out;
}

// --- losses ----------------------------------------------------------------------------

namespace {

// dst += w * src
void axpy(AdjointBuffer& dst, const AdjointBuffer& src, double w) {
  dst.sky.d_peak_intensity += src.sky.d_peak_intensity * w;
  dst.sky.d_peak_dir += src.sky.d_peak_dir * w;
  for (std::size_t i = 0; i < src.sky.d_background.size(); ++i)
    dst.sky.d_background[i] += src.sky.d_background[i] * w;
  if (dst.volume.d_voxels.empty()) return;
  for (std::size_t i = 0; i < src.volume.d_voxels.size(); ++i) {
    VoxelGrad& d = dst.volume.d_voxels[i];
    const VoxelGrad& s = src.volume.d_voxels[i];
    d.d_c += s.d_c * w;
    d.d_mu += s.d_mu * w;
    d.d_sigma += s.d_sigma * w;
    d.d_alpha += s.d_alpha * w;
  }
}

void axpy(VolumeAdjoint& dst, const VolumeAdjoint& src, double w) {
  for (std::size_t i = 0; i < src.d_voxels.size(); ++i) dst.d_voxels[i].d_alpha += src.d_voxels[i].d_alpha * w;
}

// Sums fn(pixel, adj) over all camera pixels with per-worker partials reduced in worker order.
template <class Fn>
LossValue pixel_loss(const HybridLightField& lf, const PinholeCamera& cam, int threads,
                     bool with_volume, Fn&& fn) {
  const std::size_t n = static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
  const int workers = effective_workers(n, resolve_threads(threads));
  std::vector<AdjointBuffer> partial;
  for (int w = 0; w < workers; ++w) partial.emplace_back(lf, with_volume);
  std::vector<double> sums(static_cast<std::size_t>(workers), 0.0);
  parallel_for(n, workers, [&](std::size_t b, std::size_t e, int w) {
    double s = 0;
    for (std::size_t p = b; p < e; ++p) s += fn(p, partial[static_cast<std::size_t>(w)]);
    sums[static_cast<std::size_t>(w)] = s;
  });
  LossValue out{0.0, std::move(partial[0])};
  for (int w = 0; w < workers; ++w) {
    out.value += sums[static_cast<std::size_t>(w)];
    if (w > 0) out.grad += partial[static_cast<std::size_t>(w)];
  }
  return out;
}

Ray camera_ray(const PinholeCamera& cam, std::size_t p) {
  const int x = static_cast<int>(p % static_cast<std::size_t>(cam.width));
  const int y = static_cast<int>(p / static_cast<std::size_t>(cam.width));
  return pixel_ray(cam, pixel_center(x, y));
}

constexpr double kBceClamp = 1e-6;

}  // namespace

LossValue loss_radiance_recon(const HybridLightField& lf, const PinholeCamera& cam,
                              const RgbImage& target, int threads) {
  cam.validate();
  if (!target.same_size(cam.width, cam.height))
    throw ValidationError("loss_radiance_recon: target size does not match the camera");
  const double inv_n = 1.0 / (3.0 * static_cast<double>(target.size()));
  return pixel_loss(lf, cam, threads, true, [&](std::size_t p, AdjointBuffer& adj) {
    const Ray ray = camera_ray(cam, p);
    const Rgb r = lf.radiance(ray.origin, ray.direction) - target[p];
    if (r != Rgb{}) lf.radiance_backward(ray.origin, ray.direction, r * (2.0 * inv_n), adj);
    return dot(r, r) * inv_n;
  });
}

LossValue loss_sky_separation(const HybridLightField& lf, const PinholeCamera& cam,
                              const ScalarImage& sky_mask, int threads) {
  cam.validate();
  if (!sky_mask.same_size(cam.width, cam.height))
    throw ValidationError("loss_sky_separation: mask size does not match the camera");
  const double inv_n = 1.0 / static_cast<double>(sky_mask.size());
  return pixel_loss(lf, cam, threads, true, [&](std::size_t p, AdjointBuffer& adj) {
    const Ray ray = camera_ray(cam, p);
    const double m = sky_mask[p];
    const double raw = lf.transmittance(ray.origin, ray.direction);
    const double tau = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    if (raw == tau) {
      const double d_tau = (-m / tau + (1.0 - m) / (1.0 - tau)) * inv_n;
      lf.transmittance_backward(ray.origin, ray.direction, d_tau, adj);
    }
    return -(m * std::log(tau) + (1.0 - m) * std::log(1.0 - tau)) * inv_n;
  });
}

double loss_alpha_reg(const VsgGrid& grid, VolumeAdjoint* grad) {
  if (grad && grad->d_voxels.size() != grid.size())
    throw ValidationError("loss_alpha_reg: adjoint shape mismatch");
  const double inv_v = 1.0 / static_cast<double>(grid.size());
  double sum = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double a = grid.voxel(i).alpha;
    sum += a * (1.0 - a);
    if (grad) grad->d_voxels[i].d_alpha += (1.0 - 2.0 * a) * inv_v;
  }
  return sum * inv_v;
}

double loss_depth_recon(const VsgGrid& grid, const PinholeCamera& cam, const DepthMap& target_z,
                        int samples, VoxelInterpolation mode, VolumeAdjoint* grad) {
  cam.validate();
  if (!target_z.same_size(cam.width, cam.height))
    throw ValidationError("loss_depth_recon: target size does not match the camera");
  const DepthMap target = z_depth_to_ray_distance(cam, target_z);
  const DepthMap rendered = render_depth(grid, cam, samples, mode);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < target.size(); ++i) valid += valid_depth(target[i]) ? 1 : 0;
  if (valid == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(valid);
  DepthMap d(cam.width, cam.height);
  double sum = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!valid_depth(target[i])) continue;
    const double r = rendered[i] - target[i];
    sum += std::abs(r);
    d[i] = r > 0 ? inv_n : (r < 0 ? -inv_n : 0.0);
  }
  if (grad) render_depth_backward(grid, cam, d, *grad, samples, mode);
  return sum * inv_n;
}

LossValue loss_insertion(const HybridLightField& lf, const InsertionScene& scene,
                         const InsertionConfig& cfg, const RgbImage& target, bool with_volume) {
  const InsertionResult rec = render_insertion(lf, scene, cfg);
  require_same_size(rec.composite, target, "loss_insertion target");
  const double inv_n = 1.0 / (3.0 * static_cast<double>(target.size()));
  RgbImage d(target.width(), target.height());
  double sum = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Rgb r = rec.composite[i] - target[i];
    sum += dot(r, r);
    d[i] = r * (2.0 * inv_n);
  }
  return {sum * inv_n, backward_insertion(lf, scene, cfg, rec, d, with_volume)};
}

// --- gradient verification -------------------------------------------------------------

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Vec3 random_unit(Rng& rng) {
  const double z = uniform(rng, -1, 1);
  const double phi = kTwoPi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Vec3 random_upper(Rng& rng, double z_min) {
  const double z = uniform(rng, z_min, 1.0);
  const double phi = kTwoPi * rng.uniform();
  const double r = std::sqrt(std::max(0.0, 1 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

GradCheckScene make_tiny_scene(std::uint64_t seed) {
  Rng rng = Rng::for_stream(seed, 0x7469'6e79ull);
  constexpr double kCameraHeight = 1.5;

  LogProjection mapping;
  mapping.half_extent_x = 4.0;
  mapping.half_extent_y = 6.0;
  mapping.z_min = -2.0;
  mapping.z_max = 3.0;
  mapping.curvature = 1.0;
  VsgGrid grid({2, 2, 2}, mapping);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    VsgVoxel v;
    v.c = Rgb(uniform(rng, 0.05, 0.5), uniform(rng, 0.05, 0.5), uniform(rng, 0.05, 0.5));
    v.mu = random_unit(rng);
    v.sigma = uniform(rng, 0.5, 1.5);
    v.alpha = uniform(rng, 0.1, 0.6);
    grid.set_voxel(i, v);
  }
  SkyDome sky;
  sky.background = RgbImage(8, 4);
  for (auto& t : sky.background.pixels())
    t = Rgb(uniform(rng, 0.1, 0.6), uniform(rng, 0.1, 0.6), uniform(rng, 0.1, 0.6));
  sky.peak_dir = random_upper(rng, 0.2);
  sky.peak_intensity = Rgb(uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0));
  sky.sharpness = 8.0;

  GradCheckScene s;
  s.lf = HybridLightField(std::move(sky), std::move(grid), 8);
  s.lf.interpolation = seed % 2 == 0 ? VoxelInterpolation::Nearest : VoxelInterpolation::Trilinear;

  PinholeCamera cam;
  cam.width = cam.height = 8;
  cam.fx = cam.fy = 8.0;
  cam.cx = cam.cy = 4.0;
  cam.pose = Pose::street_view(20.0);
  s.scene.camera = cam;
  s.scene.depth = plane_depth(cam, -kCameraHeight);
  s.scene.background = RgbImage(8, 8);
  for (auto& p : s.scene.background.pixels())
    p = Rgb(uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8));
  const double radius = 0.5;
  TriMesh sphere = make_uv_sphere({uniform(rng, -0.3, 0.3), 3.0, -kCameraHeight + radius}, radius, 6, 8);
  sphere.material.base_color = Rgb(uniform(rng, 0.3, 0.9), uniform(rng, 0.3, 0.9), uniform(rng, 0.3, 0.9));
  sphere.material.metallic = uniform(rng, 0.0, 1.0);
  sphere.material.roughness = uniform(rng, 0.3, 0.9);
  s.scene.object = PlacedMesh(std::move(sphere));

  InsertionConfig& cfg = s.cfg;
  cfg.fg_sampling = static_cast<ForegroundSampling>(seed % 3);
  cfg.center_rays = 16;
  cfg.uniform_rays = 16;
  cfg.diffuse_rays = 12;
  cfg.specular_rays = 4;
  cfg.shadow_rays = 16;
  cfg.shadow_width = 4;
  cfg.shadow_height = 4;
  cfg.seed = seed;
  cfg.threads = 1;

  s.weights = RgbImage(8, 8);
  for (auto& w : s.weights.pixels()) w = Rgb(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return s;
}

double grad_check_objective(const GradCheckScene& s) {
  const RgbImage img = render_insertion(s.lf, s.scene, s.cfg).composite;
  double f = 0;
  for (std::size_t i = 0; i < img.size(); ++i) f += dot(s.weights[i], img[i]);
  return f;
}

AdjointBuffer grad_check_gradient(const GradCheckScene& s) {
  const InsertionResult rec = render_insertion(s.lf, s.scene, s.cfg);
  return backward_insertion(s.lf, s.scene, s.cfg, rec, s.weights, true);
}

namespace {

bool at_boundary(const ParamRef& p, double v, double h) {
  switch (p.kind) {
    case ParamKind::VoxelColor:
    case ParamKind::PeakIntensity:
    case ParamKind::Background: return v - h < 0.0;
    case ParamKind::VoxelSigma: return v - h < kMinSigma;
    case ParamKind::VoxelAlpha: return v - h < 0.0 || v + h > 1.0;
    default: return false;
  }
}

struct Comparison {
  double abs_err, rel_err;
};

Comparison compare(double analytic, double fd) {
  const double err = std::abs(analytic - fd);
  const double scale = std::max(std::abs(analytic), std::abs(fd));
  return {err, scale > 0 ? err / scale : 0.0};
}

}  // namespace

GradCheckReport grad_check(const GradCheckScene& s, const GradCheckOptions& opt) {
  if (!(opt.h > 0)) throw ValidationError("grad_check: h must be positive");
  const AdjointBuffer adj = grad_check_gradient(s);
  if (!adj.all_finite()) throw NumericalError("grad_check: non-finite adjoint");
  GradCheckScene work = s;
  GradCheckReport rep;

  auto record = [&](const std::string& name, double analytic, double fd) {
    ++rep.checked;
    const Comparison c = compare(analytic, fd);
    rep.max_abs_err = std::max(rep.max_abs_err, c.abs_err);
    if (c.abs_err <= opt.abs_floor) return;
    if (c.rel_err > rep.max_rel_err || rep.worst_param.empty()) {
      rep.max_rel_err = c.rel_err;
      rep.worst_param = name;
    }
    if (c.rel_err > opt.rel_tol) rep.pass = false;
  };

  // Coordinate checks; the peak direction is checked along two tangent directions instead.
  std::vector<ParamRef> free_params;
  for (const ParamRef& p : lighting_params(s.lf, true)) {
    if (p.kind == ParamKind::PeakDir) continue;
    const double v = read_param(s.lf, p);
    if (at_boundary(p, v, opt.h)) {
      rep.skipped.push_back(param_name(p));
      continue;
    }
    write_param(work.lf, p, v + opt.h);
    const double fp = grad_check_objective(work);
    write_param(work.lf, p, v - opt.h);
    const double fm = grad_check_objective(work);
    write_param(work.lf, p, v);
    const double fd = (fp - fm) / (2 * opt.h);
    if (!std::isfinite(fd)) {
      rep.skipped.push_back(param_name(p));
      continue;
    }
    free_params.push_back(p);
    record(param_name(p), read_adjoint(adj, p), fd);
  }

  const Vec3 dir = s.lf.sky.peak_dir;
  const Frame frame = Frame::from_normal(dir);
  const Vec3 tangents[2] = {frame.to_world({1, 0, 0}), frame.to_world({0, 1, 0})};
  for (int k = 0; k < 2; ++k) {
    work.lf.sky.peak_dir = dir + tangents[k] * opt.h;
    const double fp = grad_check_objective(work);
    work.lf.sky.peak_dir = dir - tangents[k] * opt.h;
    const double fm = grad_check_objective(work);
    work.lf.sky.peak_dir = dir;
    record("peak_dir.tangent" + std::to_string(k), dot(adj.sky.d_peak_dir, tangents[k]),
           (fp - fm) / (2 * opt.h));
  }

  // Directional checks along random unit vectors over all free parameters.
  Rng rng = Rng::for_stream(opt.seed, 0x6469'72ull);
  for (int d = 0; d < opt.random_directions; ++d) {
    std::vector<double> delta(free_params.size());
    double norm2 = 0;
    for (double& x : delta) {
      x = uniform(rng, -1, 1);
      norm2 += x * x;
    }
    Vec3 d_dir = tangents[0] * uniform(rng, -1, 1) + tangents[1] * uniform(rng, -1, 1);
    norm2 += dot(d_dir, d_dir);
    const double inv = 1.0 / std::sqrt(norm2);
    double analytic = dot(adj.sky.d_peak_dir, d_dir) * inv;
    for (std::size_t i = 0; i < free_params.size(); ++i) {
      delta[i] *= inv;
      analytic += delta[i] * read_adjoint(adj, free_params[i]);
    }
    d_dir = d_dir * inv;
    auto shift = [&](double sign) {
      work.lf = s.lf;
      for (std::size_t i = 0; i < free_params.size(); ++i)
        write_param(work.lf, free_params[i], read_param(s.lf, free_params[i]) + sign * opt.h * delta[i]);
      work.lf.sky.peak_dir = dir + d_dir * (sign * opt.h);
      return grad_check_objective(work);
    };
    const double fp = shift(1.0);
    const double fm = shift(-1.0);
    record("direction[" + std::to_string(d) + "]", analytic, (fp - fm) / (2 * opt.h));
  }
  return rep;
}

// --- fitting ---------------------------------------------------------------------------

void FitConfig::validate() const {
  if (!(step > 0)) throw ValidationError("fit: step must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw ValidationError("fit: moment decays must lie in [0, 1)");
  if (iterations < 0) throw ValidationError("fit: iterations must be >= 0");
  for (double w : {weights.recon, weights.transmit, weights.reg, weights.depth, weights.insert})
    if (!(w >= 0) || !std::isfinite(w)) throw ValidationError("fit: loss weights must be >= 0");
  insertion.validate();
}

namespace {

void require_finite(double v, const char* term, std::size_t obs) {
  if (!std::isfinite(v))
    throw NumericalError(std::string("fit: loss term '") + term + "' is not finite (observation " +
                         std::to_string(obs) + ")");
}

bool fits_volume(const HybridLightField& lf, const FitConfig& cfg) {
  return cfg.trainable.volume && lf.grid.size() > 0;
}

}  // namespace

FitTraceRow evaluate_objective(const HybridLightField& lf, const std::vector<Observation>& obs,
                               const FitConfig& cfg, AdjointBuffer* grad) {
  const bool with_volume = fits_volume(lf, cfg);
  const LossWeights& w = cfg.weights;
  FitTraceRow row;
  InsertionConfig icfg = cfg.insertion;
  icfg.threads = cfg.threads;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Observation& o = obs[i];
    if (o.radiance && w.recon > 0) {
      const LossValue l = loss_radiance_recon(lf, o.camera, *o.radiance, cfg.threads);
      require_finite(l.value, "recon", i);
      row.recon += l.value;
      if (grad) axpy(*grad, l.grad, w.recon);
    }
    if (o.sky_mask && w.transmit > 0) {
      const LossValue l = loss_sky_separation(lf, o.camera, *o.sky_mask, cfg.threads);
      require_finite(l.value, "transmit", i);
      row.transmit += l.value;
      if (grad) axpy(*grad, l.grad, w.transmit);
    }
    if (o.depth && w.depth > 0) {
      VolumeAdjoint g(lf.grid.size());
      const double v = loss_depth_recon(lf.grid, o.camera, *o.depth, lf.samples_per_ray,
                                        lf.interpolation, with_volume ? &g : nullptr);
      require_finite(v, "depth", i);
      row.depth += v;
      if (grad && with_volume) axpy(grad->volume, g, w.depth);
    }
    if (o.insertion && w.insert > 0) {
      const LossValue l = loss_insertion(lf, o.insertion->scene, icfg, o.insertion->target, with_volume);
      require_finite(l.value, "insert", i);
      row.insert += l.value;
      if (grad) axpy(*grad, l.grad, w.insert);
    }
  }
  if (w.reg > 0 && with_volume) {
    VolumeAdjoint g(lf.grid.size());
    row.reg = loss_alpha_reg(lf.grid, &g);
    require_finite(row.reg, "reg", 0);
    if (grad) axpy(grad->volume, g, w.reg);
  }
  row.total = w.recon * row.recon + w.transmit * row.transmit + w.depth * row.depth +
              w.insert * row.insert + w.reg * row.reg;
  if (grad) {
    grad->project_peak_dir(lf.sky.peak_dir);
    if (!grad->all_finite()) throw NumericalError("fit: non-finite gradient");
  }
  return row;
}

namespace {

// Smallest radiance representable in the log-domain parameterization.
constexpr double kLogFloor = 1e-12;

struct AdamSlot {
  ParamRef ref;
  double theta = 0;  // log(value) for radiance parameters, the value otherwise
  double m = 0, v = 0;
};

double to_internal(const ParamRef& p, double value) {
  return is_radiance_param(p.kind) ? std::log(std::max(value, kLogFloor)) : value;
}

std::vector<ParamRef> trainable_params(const HybridLightField& lf, const FitConfig& cfg) {
  std::vector<ParamRef> out;
  for (const ParamRef& p : lighting_params(lf, fits_volume(lf, cfg))) {
    if (p.kind == ParamKind::PeakDir && !cfg.trainable.peak_dir) continue;
    if (p.kind == ParamKind::PeakIntensity && !cfg.trainable.peak_intensity) continue;
    if (p.kind == ParamKind::Background && !cfg.trainable.background) continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace

FitResult fit(HybridLightField init, const std::vector<Observation>& obs, const FitConfig& cfg,
              const std::function<bool(const FitTraceRow&)>& on_step) {
  cfg.validate();
  if (obs.empty()) throw ValidationError("fit: at least one observation is required");
  FitResult res{std::move(init), {}};
  HybridLightField& lf = res.lf;
  lf.validate();
  const bool with_volume = fits_volume(lf, cfg);

  std::vector<AdamSlot> slots;
  for (const ParamRef& p : trainable_params(lf, cfg)) slots.push_back({p, to_internal(p, read_param(lf, p))});
  std::vector<char> voxel_touched(with_volume ? lf.grid.size() : 0);

  double b1t = 1.0, b2t = 1.0;
  for (int it = 0; it <= cfg.iterations; ++it) {
    const bool last = it == cfg.iterations;
    AdjointBuffer grad(lf, with_volume);
    FitTraceRow row = evaluate_objective(lf, obs, cfg, last ? nullptr : &grad);
    row.iteration = it;
    res.trace.push_back(row);
    if (on_step && !on_step(row)) break;
    if (last || row.total <= cfg.target_loss) break;

    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    bool dir_touched = false;
    std::fill(voxel_touched.begin(), voxel_touched.end(), 0);
    for (AdamSlot& s : slots) {
      double g = read_adjoint(grad, s.ref);
      if (is_radiance_param(s.ref.kind)) g *= std::exp(s.theta);
      s.m = cfg.beta1 * s.m + (1 - cfg.beta1) * g;
      s.v = cfg.beta2 * s.v + (1 - cfg.beta2) * g * g;
      const double update = cfg.step * (s.m / (1 - b1t)) / (std::sqrt(s.v / (1 - b2t)) + cfg.adam_eps);
      if (update == 0.0) continue;
      s.theta -= update;
      write_param(lf, s.ref, is_radiance_param(s.ref.kind) ? std::exp(s.theta) : s.theta);
      if (s.ref.kind == ParamKind::PeakDir) dir_touched = true;
      if (is_voxel_param(s.ref.kind)) voxel_touched[s.ref.index] = 1;
    }

    // Project back onto the parameter invariants and resync the internal coordinates.
    if (dir_touched) {
      const double len = length(lf.sky.peak_dir);
      lf.sky.peak_dir = len > 0 ? lf.sky.peak_dir / len : Vec3{0, 0, 1};
    }
    for (std::size_t i = 0; i < voxel_touched.size(); ++i) {
      if (!voxel_touched[i]) continue;
      VsgVoxel v = lf.grid.voxel(i);
      if (!(length(v.mu) > 0)) v.mu = Vec3{0, 0, 1};
      lf.grid.set_voxel_unchecked(i, project_voxel(v));
    }
    for (AdamSlot& s : slots) {
      if ((s.ref.kind == ParamKind::PeakDir && dir_touched) ||
          (is_voxel_param(s.ref.kind) && voxel_touched[s.ref.index] && !is_radiance_param(s.ref.kind)))
        s.theta = read_param(lf, s.ref);
    }
    lf.validate();
  }
  return res;
}

HybridLightField random_lighting(const HybridLightField& like, std::uint64_t seed,
                                 bool randomize_volume) {
  Rng rng = Rng::for_stream(seed, 0x696e'6974ull);
  HybridLightField lf = like;
  lf.sky.peak_dir = random_upper(rng, 0.05);
  const double sun = std::exp(uniform(rng, std::log(1.0), std::log(20.0)));
  lf.sky.peak_intensity = Rgb(sun * uniform(rng, 0.8, 1.2), sun * uniform(rng, 0.8, 1.2),
                              sun * uniform(rng, 0.8, 1.2));
  const double level = uniform(rng, 0.05, 1.0);
  for (auto& t : lf.sky.background.pixels())
    t = Rgb(level * uniform(rng, 0.9, 1.1), level * uniform(rng, 0.9, 1.1), level * uniform(rng, 0.9, 1.1));
  if (randomize_volume) {
    for (std::size_t i = 0; i < lf.grid.size(); ++i) {
      VsgVoxel v;
      v.c = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
      v.mu = random_unit(rng);
      v.sigma = uniform(rng, 0.3, 1.5);
      v.alpha = uniform(rng, 0.0, 0.2);
      lf.grid.set_voxel(i, v);
    }
  }
  return lf;
}

}  // namespace hlf
