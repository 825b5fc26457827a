// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero when any fails.
// Usage: acceptance [criterion...]   (default: all)

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hlf/brdf.hpp"
#include "hlf/diffopt.hpp"
#include "hlf/geometry.hpp"
#include "hlf/insertion.hpp"
#include "hlf/io.hpp"
#include "hlf/lightfield.hpp"
#include "hlf/sky.hpp"

#ifndef HLF_TEST_DATA
#define HLF_TEST_DATA "tests/data"
#endif
#ifndef HLF_CLI_PATH
#define HLF_CLI_PATH "hlf"
#endif

using namespace hlf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Vec3 random_unit(std::mt19937_64& g) {
  std::normal_distribution<double> n;
  return normalize(Vec3{n(g), n(g), n(g)});
}

HybridLightField uniform_sky(double u, int h = 8, int w = 16) {
  SkyDome sky = SkyDome::uniform(Rgb(u), h, w);
  sky.peak_intensity = Rgb(0.0);
  return HybridLightField(sky, VsgGrid(GridDims{1, 1, 1}));
}

PinholeCamera street_camera(int w, int h, double f, double pitch_deg) {
  PinholeCamera cam;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = f;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.pose = Pose::street_view(pitch_deg);
  return cam;
}

// --- 1 -----------------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const int scenes = 20;
  int passed = 0;
  double worst = 0;
  std::string worst_name;
  std::size_t checked = 0;
  for (int s = 0; s < scenes; ++s) {
    GradCheckOptions opt;
    opt.seed = static_cast<std::uint64_t>(s);
    const GradCheckReport r = grad_check(make_tiny_scene(static_cast<std::uint64_t>(s)), opt);
    checked += r.checked;
    if (r.pass) ++passed;
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_name = r.worst_param;
    }
  }
  const double t = seconds_since(t0);
  return {passed == scenes && t < 60.0,
          fmt("%d/%d scenes, %zu checks, max rel err %.2e (%s), %.1f s", passed, scenes, checked,
              worst, worst_name.c_str(), t)};
}

// --- 2 -----------------------------------------------------------------------------------

// Term-by-term accumulation of the emission-absorption sum with nearest-voxel lookups:
// L = sum_k T_k a_k G_k(-l) + T_K L_sky(l),  T_k = prod_{j<k} (1 - a_j).
Rgb radiance_oracle(const HybridLightField& lf, const Vec3& x, const Vec3& l) {
  const VsgGrid& grid = lf.grid;
  const Aabb box = grid.world_box();
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  bool miss = false;
  for (int a = 0; a < 3; ++a) {
    if (l[a] == 0.0) {
      if (x[a] < box.lo[a] || x[a] > box.hi[a]) miss = true;
      continue;
    }
    double n = (box.lo[a] - x[a]) / l[a];
    double f = (box.hi[a] - x[a]) / l[a];
    if (n > f) std::swap(n, f);
    t0 = std::max(t0, n);
    t1 = std::min(t1, f);
  }
  if (miss || !(t1 > t0)) return lf.sky.radiance(l);

  const int K = lf.samples_per_ray;
  const double step = (t1 - t0) / K;
  std::vector<double> alpha;
  std::vector<Rgb> lobe;
  for (int k = 0; k < K; ++k) {
    const double t = t0 + (k + 0.5) * step;
    const auto v = grid.world_to_voxel(x + l * t);
    if (!v) continue;
    const VsgVoxel& vox = grid.voxel(*v);
    if (vox.alpha == 0.0) continue;
    alpha.push_back(vox.alpha);
    lobe.push_back(vox.c * std::exp(-(1.0 + dot(l, vox.mu)) / (vox.sigma * vox.sigma)));
  }
  Rgb sum;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    double T = 1.0;
    for (std::size_t j = 0; j < k; ++j) T *= 1.0 - alpha[j];
    sum += lobe[k] * (T * alpha[k]);
  }
  double T = 1.0;
  for (double a : alpha) T *= 1.0 - a;
  return sum + lf.sky.radiance(l) * T;
}

HybridLightField random_field(std::mt19937_64& g) {
  std::uniform_int_distribution<int> dim(1, 4), spp(1, 48), bg(1, 8);
  std::uniform_real_distribution<double> u(0, 1);
  const LogProjection m{1 + 9 * u(g), 1 + 9 * u(g), -5 * u(g) - 0.5, 5 * u(g) + 0.5, 0.2 + 3 * u(g)};
  VsgGrid grid(GridDims{dim(g), dim(g), dim(g)}, m);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    VsgVoxel v;
    const double r = u(g);
    v.alpha = r < 0.3 ? 0.0 : (r < 0.4 ? 1.0 : u(g));
    v.c = Rgb(3 * u(g), 3 * u(g), 3 * u(g));
    v.mu = random_unit(g);
    v.sigma = 0.05 + 2 * u(g);
    grid.set_voxel(i, v);
  }
  SkyDome sky = SkyDome::uniform(Rgb(0.0), bg(g), 2 * bg(g));
  for (auto& t : sky.background.pixels()) t = Rgb(u(g), u(g), u(g));
  sky.peak_dir = random_unit(g);
  sky.peak_intensity = Rgb(10 * u(g), 10 * u(g), 10 * u(g));
  sky.sharpness = 1 + 200 * u(g);
  return HybridLightField(sky, grid, spp(g));
}

Outcome oracle_equivalence() {
  std::mt19937_64 g(2026);
  std::uniform_real_distribution<double> u(-1, 1);
  const int cases = 10000;
  int equal = 0, through_volume = 0;
  for (int i = 0; i < cases; ++i) {
    const HybridLightField lf = random_field(g);
    const Aabb box = lf.grid.world_box();
    // Origins spread inside and around the grid.
    const Vec3 c = box.center(), e = box.extent();
    const Vec3 x{c.x + 0.8 * e.x * u(g), c.y + 0.8 * e.y * u(g), c.z + 0.8 * e.z * u(g)};
    const Vec3 l = random_unit(g);
    const Rgb a = lf.radiance(x, l);
    const Rgb b = radiance_oracle(lf, x, l);
    if (a == b) ++equal;
    if (lf.transmittance(x, l) < 1.0) ++through_volume;
  }
  return {equal == cases,
          fmt("%d/%d bitwise equal (%d rays attenuated by the volume)", equal, cases, through_volume)};
}

// --- 3 -----------------------------------------------------------------------------------

struct SphereSetup {
  InsertionScene scene;
  GBuffer gbuf;
};

SphereSetup lambertian_sphere(double albedo) {
  SphereSetup s;
  s.scene.camera = street_camera(32, 24, 30, 10);
  s.scene.depth = plane_depth(s.scene.camera, -1.5);
  s.scene.background = RgbImage(32, 24, Rgb(0.5));
  TriMesh m = make_uv_sphere({0, 4, -1.0}, 0.5, 16, 32);
  m.material.base_color = Rgb(albedo);
  m.material.metallic = 0;
  m.material.roughness = 1;
  s.scene.object = PlacedMesh(m);
  s.gbuf = rasterize_gbuffer(s.scene.camera, s.scene.object, s.scene.depth);
  return s;
}

Outcome closed_form_shading() {
  const double rho = 0.7, u = 1.2, expect = rho * u;
  const SphereSetup s = lambertian_sphere(rho);
  const HybridLightField lf = uniform_sky(u);
  InsertionConfig cfg;
  cfg.specular_lobe = false;
  cfg.self_occlusion = false;
  cfg.threads = 1;

  cfg.fg_sampling = ForegroundSampling::PixelImportance;
  cfg.diffuse_rays = 64;
  const RgbImage cosine = shade_foreground(s.gbuf, lf, s.scene.object, cfg);
  cfg.fg_sampling = ForegroundSampling::PixelUniform;
  cfg.uniform_rays = 4096;
  const RgbImage uniform = shade_foreground(s.gbuf, lf, s.scene.object, cfg);

  double cos_dev = 0, uni_dev = 0;
  int pixels = 0;
  for (std::size_t i = 0; i < s.gbuf.size(); ++i) {
    if (!s.gbuf[i].hit) continue;
    ++pixels;
    for (int c = 0; c < 3; ++c) {
      cos_dev = std::max(cos_dev, std::abs(cosine[i][c] - expect));
      uni_dev = std::max(uni_dev, std::abs(uniform[i][c] - expect) / expect);
    }
  }
  // Every cosine-sampled term equals rho u up to round-off in f cos / pdf.
  const bool pass = pixels > 0 && cos_dev <= 1e-14 && uni_dev < 0.005;
  return {pass, fmt("%d pixels; cosine max |err| %.1e; uniform N=4096 max rel err %.3f%%", pixels,
                    cos_dev, 100 * uni_dev)};
}

// --- 4 -----------------------------------------------------------------------------------

TriMesh quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  TriMesh m;
  m.vertices = {a, b, c, d};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.compute_vertex_normals();
  return m;
}

// Cosine-weighted fraction of the up hemisphere at `p` blocked by the horizontal rectangle
// [x0,x1] x [y0,y1] at height z, by midpoint quadrature in (theta, phi).
double plate_fraction(const Vec3& p, double x0, double x1, double y0, double y1, double z) {
  const int nt = 1500, np = 3000;
  double blocked = 0, total = 0;
  for (int i = 0; i < nt; ++i) {
    const double th = (i + 0.5) * (kPi / 2) / nt;
    const double w = std::cos(th) * std::sin(th);
    for (int j = 0; j < np; ++j) {
      const double ph = (j + 0.5) * kTwoPi / np;
      const Vec3 d{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
      total += w;
      const double t = (z - p.z) / d.z;
      const double hx = p.x + t * d.x, hy = p.y + t * d.y;
      if (hx >= x0 && hx <= x1 && hy >= y0 && hy <= y1) blocked += w;
    }
  }
  return blocked / total;
}

Outcome shadow_limits() {
  const PinholeCamera cam = street_camera(16, 12, 12, 30);
  const DepthMap ground = plane_depth(cam, -1.5);
  const HybridLightField lf = uniform_sky(1.0);
  InsertionConfig cfg;
  cfg.shadow_width = cfg.shadow_height = 0;
  cfg.threads = 1;

  // Object far below the ground: nothing is occluded.
  const PlacedMesh buried(make_uv_sphere({0, 5, -50}, 1.0, 8, 16));
  const RgbImage free = shadow_ratio(ground, cam, buried, lf, cfg);
  bool unoccluded_exact = true;
  for (const auto& c : free.pixels()) unoccluded_exact = unoccluded_exact && c == Rgb(1.0);

  // A huge dome around the scene blocks every shadow ray.
  const PlacedMesh dome(make_uv_sphere({0, 0, 0}, 500.0, 16, 32));
  const RgbImage dark = shadow_ratio(ground, cam, dome, lf, cfg);
  double occ_err = 0;
  for (std::size_t i = 0; i < dark.size(); ++i)
    if (valid_depth(ground[i])) occ_err = std::max(occ_err, std::abs(dark[i].r - cfg.ambient));

  // Plate one meter above the ground covering x >= 0. The center column sees ground points
  // on x = 0, directly under the plate edge, so their hemisphere is half occluded.
  const double pz = -0.5, L = 40.0;
  PinholeCamera edge_cam = street_camera(15, 12, 12, 30);
  edge_cam.cx = 7.5;
  const DepthMap edge_ground = plane_depth(edge_cam, -1.5);
  const PlacedMesh plate(quad({0, -L, pz}, {L, -L, pz}, {L, L, pz}, {0, L, pz}));
  const RgbImage half = shadow_ratio(edge_ground, edge_cam, plate, lf, cfg);
  double plate_err = 0, grid_abs_err = 0;
  int probed = 0;
  for (int y = 0; y < edge_cam.height; ++y)
    for (int x = 0; x < edge_cam.width; ++x) {
      if (x != 7 && y % 3 != 0) continue;
      if (!valid_depth(edge_ground.at(x, y))) continue;
      const Vec3 p = unproject(edge_cam, pixel_center(x, y), edge_ground.at(x, y)) +
                     Vec3{0, 0, kShadowOriginOffset};
      const double oracle = 1.0 - (1.0 - cfg.ambient) * plate_fraction(p, 0, L, -L, L, pz);
      const double err = std::abs(half.at(x, y).r - oracle);
      grid_abs_err = std::max(grid_abs_err, err);
      if (x == 7) {
        plate_err = std::max(plate_err, err / oracle);
        ++probed;
      }
    }
  const bool pass = unoccluded_exact && occ_err <= 1e-6 && probed > 0 && plate_err <= 0.02;
  return {pass, fmt("unoccluded S==1: %s; fully occluded |S-0.1| %.1e; half-occluded plate max rel err "
                    "%.2f%% over %d pixels (max |err| %.4f over all probed pixels)",
                    unoccluded_exact ? "yes" : "no", occ_err, 100 * plate_err, probed, grid_abs_err)};
}

// --- 5 -----------------------------------------------------------------------------------

Outcome brdf_identities() {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0, 1);
  bool d_exact = true;
  for (int i = 0; i < 10000; ++i) d_exact = d_exact && ggx_d(u(g), 1.0) == kInvPi;

  bool metal_exact = true;
  const Vec3 n{0, 0, 1};
  for (int i = 0; i < 10000; ++i) {
    MaterialParams m;
    m.metallic = 1.0;
    m.base_color = Rgb(u(g), u(g), u(g));
    m.roughness = u(g);
    m.specular = u(g);
    Vec3 l = random_unit(g), v = random_unit(g);
    l.z = std::abs(l.z);
    v.z = std::abs(v.z);
    metal_exact = metal_exact && eval_brdf_terms(m, n, l, v).diffuse == Rgb(0.0);
  }

  // White furnace for m = 0, s = 0 viewed at normal incidence. Grazing views are reported but
  // not bounded: with c_spec = 0 the Schlick term still tends to 1 at grazing angles.
  auto furnace = [&](double base, double rough, double vz) {
    MaterialParams m;
    m.base_color = Rgb(base);
    m.metallic = 0;
    m.specular = 0;
    m.roughness = rough;
    const Vec3 v = normalize(Vec3{std::sqrt(1 - vz * vz), 0, vz});
    Rng rng(static_cast<std::uint64_t>(base * 1000 + rough * 100 + vz * 10));
    double acc = 0;
    const int N = 100000;
    for (int i = 0; i < N; ++i) {
      const DirectionSample s = sample_uniform_hemisphere(n, rng);
      acc += eval_brdf(m, n, s.dir, v).r * s.dir.z / s.pdf;
    }
    return acc / N - base;
  };
  double worst_excess = -1, grazing_excess = -1;
  for (double base : {0.2, 0.5, 0.9, 1.0})
    for (double rough : {0.05, 0.3, 0.7, 1.0}) {
      worst_excess = std::max(worst_excess, furnace(base, rough, 1.0));
      grazing_excess = std::max(grazing_excess, furnace(base, rough, 0.2));
    }
  const bool pass = d_exact && metal_exact && worst_excess <= 0.02;
  return {pass, fmt("D(r=1)==1/pi: %s; metal diffuse==0: %s; furnace max excess over base %.4f at "
                    "normal view (%.4f at n.v=0.2, not bounded)",
                    d_exact ? "yes" : "no", metal_exact ? "yes" : "no", worst_excess, grazing_excess)};
}

// --- 6 -----------------------------------------------------------------------------------

Outcome tonemap_contract() {
  const double tau = ToneMapParams{}.tau;
  bool identity = true;
  for (int i = 0; i <= 95000; ++i) {
    const double x = i * 1e-5;
    identity = identity && soft_clip(x, tau) == x;
  }
  bool monotone = true, in_range = true;
  double prev = -1;
  for (int i = 0; i <= 200000; ++i) {
    const double x = i * 1e-4;
    const double y = soft_clip(x, tau);
    monotone = monotone && y >= prev;
    in_range = in_range && y >= 0 && y < 1;
    prev = y;
  }
  in_range = in_range && soft_clip(1e300, tau) < 1.0;
  const double left = soft_clip_derivative(tau, tau);
  const double right = soft_clip_derivative(std::nextafter(tau, 2.0), tau);
  const bool c1 = std::abs(left - 1) <= 1e-9 && std::abs(right - 1) <= 1e-9;
  // The closed-form slope agrees with a one-sided difference away from the knee.
  const double x = 1.3, h = 1e-7;
  const double fd = (soft_clip(x + h, tau) - soft_clip(x - h, tau)) / (2 * h);
  const bool slope = std::abs(fd - soft_clip_derivative(x, tau)) < 1e-6;
  return {identity && monotone && in_range && c1 && slope,
          fmt("identity on [0,tau]: %s; monotone: %s; range [0,1): %s; slopes at tau %.12f / %.12f",
              identity ? "yes" : "no", monotone ? "yes" : "no", in_range ? "yes" : "no", left, right)};
}

// --- 7 -----------------------------------------------------------------------------------

struct SunSetup {
  HybridLightField truth;
  std::vector<Observation> obs;
  FitConfig fit;
};

SunSetup sun_setup() {
  SunSetup s;
  InsertionScene scene;
  scene.camera = street_camera(32, 24, 30, 10);
  scene.depth = plane_depth(scene.camera, -1.5);
  scene.background = RgbImage(32, 24, Rgb(0.5));
  TriMesh m = make_uv_sphere({0, 4, -1.0}, 0.5, 12, 24);
  m.material.base_color = Rgb(0.8);
  m.material.roughness = 1;
  scene.object = PlacedMesh(m);

  InsertionConfig cfg;
  cfg.fg_sampling = ForegroundSampling::CenterUniform;
  cfg.center_rays = 1024;
  cfg.specular_lobe = false;
  cfg.self_occlusion = false;  // convex object
  cfg.shadow_width = 16;
  cfg.shadow_height = 12;
  cfg.shadow_rays = 256;
  cfg.threads = 1;

  SkyDome sky = SkyDome::uniform(Rgb(0.3), 16, 64);
  sky.peak_intensity = Rgb(30.0);
  sky.peak_dir = normalize(Vec3{0.5, 0.6, 0.7});
  s.truth = HybridLightField(sky, VsgGrid(GridDims{1, 1, 1}));

  s.obs.resize(1);
  s.obs[0].camera = scene.camera;
  s.obs[0].insertion = InsertionObservation{scene, render_insertion(s.truth, scene, cfg).composite};

  s.fit.insertion = cfg;
  s.fit.iterations = 2000;
  s.fit.step = 0.02;
  s.fit.target_loss = 1e-9;
  s.fit.weights = LossWeights{0, 0, 0, 0, 1};
  s.fit.trainable.volume = false;
  s.fit.threads = 1;
  return s;
}

Outcome sun_recovery() {
  const auto t0 = Clock::now();
  const SunSetup s = sun_setup();
  std::vector<double> errs;
  int max_iter = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const HybridLightField init = random_lighting(s.truth, 100 + static_cast<std::uint64_t>(seed), false);
    const FitResult r = fit(init, s.obs, s.fit);
    errs.push_back(angular_loss(r.lf.sky.peak_dir, s.truth.sky.peak_dir) * 180 / kPi);
    max_iter = std::max(max_iter, r.trace.back().iteration);
  }
  const double t = seconds_since(t0);
  std::vector<double> sorted = errs;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[4] + sorted[5]);
  std::string list;
  for (double e : errs) list += fmt(" %.2f", e);
  return {median < 5.0 && max_iter <= 2000 && t < 600,
          fmt("median %.2f deg over 10 seeds (per seed:%s), <= %d iterations, %.0f s", median,
              list.c_str(), max_iter, t)};
}

// --- 8 -----------------------------------------------------------------------------------

Outcome ratio_invariance() {
  const GradCheckScene base = make_tiny_scene(7);
  InsertionScene scene = base.scene;
  HybridLightField lf = random_lighting(base.lf, 99);
  InsertionConfig cfg = base.cfg;
  cfg.shadow_rays = 64;
  double max_s_diff = 0;
  bool doubled = true;
  int modes = 0;
  for (auto mode : {ForegroundSampling::CenterUniform, ForegroundSampling::PixelUniform,
                    ForegroundSampling::PixelImportance}) {
    cfg.fg_sampling = mode;
    for (bool rgb : {false, true}) {
      cfg.shadow_rgb = rgb;
      const InsertionResult a = render_insertion(lf, scene, cfg);
      HybridLightField lf2 = lf;
      scale_radiance(lf2, 2.0);
      InsertionConfig cfg2 = cfg;
      cfg2.ambient *= 2.0;
      const InsertionResult b = render_insertion(lf2, scene, cfg2);
      for (std::size_t i = 0; i < a.shadow.size(); ++i)
        for (int c = 0; c < 3; ++c)
          max_s_diff = std::max(max_s_diff, std::abs(a.shadow[i][c] - b.shadow[i][c]));
      for (std::size_t i = 0; i < a.foreground.size(); ++i)
        doubled = doubled && b.foreground[i] == a.foreground[i] * 2.0;
      ++modes;
    }
  }
  return {max_s_diff <= 1e-9 && doubled,
          fmt("%d configurations; max |dS| %.1e; foreground exactly doubled: %s", modes, max_s_diff,
              doubled ? "yes" : "no")};
}

// --- 9 -----------------------------------------------------------------------------------

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("hlf_determinism_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string scene = std::string(HLF_TEST_DATA) + "/scene_sphere.json";
  std::vector<std::set<std::string>> listings;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = root / ("run" + std::to_string(run));
    const std::string cmd = std::string("\"") + HLF_CLI_PATH + "\" --seed 11 insert --scene \"" +
                            scene + "\" --out \"" + out.string() + "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "insert exited with an error"};
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(out)) names.insert(e.path().filename().string());
    listings.push_back(names);
  }
  if (listings[0] != listings[1] || listings[0].empty()) return {false, "output file sets differ"};
  int identical = 0;
  for (const auto& name : listings[0])
    if (read_file_bytes(root / "run0" / name) == read_file_bytes(root / "run1" / name)) ++identical;
  fs::remove_all(root);
  const int files = static_cast<int>(listings[0].size());
  return {identical == files, fmt("%d/%d output files byte-identical", identical, files)};
}

// --- 10 ----------------------------------------------------------------------------------

Outcome bvh_oracle() {
  std::vector<std::pair<std::string, TriMesh>> meshes;
  meshes.emplace_back("uv sphere", make_uv_sphere({0.1, -0.2, 0.3}, 1.0, 24, 48));
  meshes.emplace_back("cube.obj", read_obj(fs::path(HLF_TEST_DATA) / "cube.obj"));
  meshes.emplace_back("torus.obj", read_obj(fs::path(HLF_TEST_DATA) / "torus.obj"));
  std::mt19937_64 g(10);
  std::uniform_real_distribution<double> u(-1, 1);
  int agree = 0, total = 0, hits = 0;
  for (const auto& [name, mesh] : meshes) {
    const PlacedMesh placed(mesh);
    const Aabb b = mesh.bounds();
    const Vec3 c = b.center(), e = b.extent();
    for (int i = 0; i < 10000; ++i) {
      // Half the rays start outside the box aiming inside it, half start anywhere nearby.
      const Vec3 o{c.x + 1.5 * e.x * u(g), c.y + 1.5 * e.y * u(g), c.z + 1.5 * e.z * u(g)};
      const Vec3 target{c.x + 0.5 * e.x * u(g), c.y + 0.5 * e.y * u(g), c.z + 0.5 * e.z * u(g)};
      const Vec3 d = (i % 2 == 0) ? normalize(target - o) : random_unit(g);
      const Ray r = Ray::make(o, d);
      const auto a = placed.intersect(r);
      const auto bf = ray_mesh_hit_brute_force(placed.mesh, r);
      bool same = a.has_value() == bf.has_value();
      if (same && a) {
        same = a->t == bf->t && a->triangle == bf->triangle;
        ++hits;
      }
      same = same && placed.occluded(r) == bf.has_value();
      agree += same;
      ++total;
    }
  }
  return {agree == total, fmt("%d/%d rays identical over 3 meshes (%d hits)", agree, total, hits)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_correctness},
      {2, "radiance oracle equivalence", oracle_equivalence},
      {3, "closed-form shading", closed_form_shading},
      {4, "shadow ratio limits", shadow_limits},
      {5, "BRDF identities", brdf_identities},
      {6, "tonemap contract", tonemap_contract},
      {7, "synthetic sun recovery", sun_recovery},
      {8, "ratio invariance", ratio_invariance},
      {9, "insert determinism", determinism},
      {10, "BVH oracle", bvh_oracle},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
