// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

// Losses on the hybrid light field, finite-difference gradient verification and the
// inverse-lighting fitting driver.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hlf/insertion.hpp"
#include "hlf/lightfield.hpp"

namespace hlf {

// --- parameter addressing --------------------------------------------------------------

enum class ParamKind { VoxelColor, VoxelMu, VoxelSigma, VoxelAlpha, PeakIntensity, PeakDir, Background };

// One scalar lighting parameter: `index` selects the voxel or background texel,
// `component` the channel or vector coordinate.
struct ParamRef {
  ParamKind kind = ParamKind::PeakIntensity;
  std::size_t index = 0;
  int component = 0;
};

std::string param_name(const ParamRef& p);
double read_param(const HybridLightField& lf, const ParamRef& p);
// Writes verbatim; no projection onto the parameter invariants.
void write_param(HybridLightField& lf, const ParamRef& p, double value);
double read_adjoint(const AdjointBuffer& adj, const ParamRef& p);
// Every scalar parameter, in a fixed order (volume first when requested, then the sky).
std::vector<ParamRef> lighting_params(const HybridLightField& lf, bool with_volume = true);

// --- losses ----------------------------------------------------------------------------

struct LossValue {
  double value = 0;
  AdjointBuffer grad;
};

// Mean squared error between camera-ray radiance and an HDR target, over pixels and channels.
LossValue loss_radiance_recon(const HybridLightField& lf, const PinholeCamera& cam,
                              const RgbImage& target, int threads = 0);

// Mean binary cross entropy between camera-ray sky transmittance and a {0,1} sky mask.
// The transmittance is clamped to [1e-6, 1 - 1e-6] inside the logarithms.
LossValue loss_sky_separation(const HybridLightField& lf, const PinholeCamera& cam,
                              const ScalarImage& sky_mask, int threads = 0);

// Mean of alpha (1 - alpha) over all voxels.
double loss_alpha_reg(const VsgGrid& grid, VolumeAdjoint* grad = nullptr);

// Mean absolute error between rendered ray distance and the target (z-depth, converted to
// ray distance) over pixels where the target is valid.
double loss_depth_recon(const VsgGrid& grid, const PinholeCamera& cam, const DepthMap& target_z,
                        int samples, VoxelInterpolation mode, VolumeAdjoint* grad = nullptr);

// Mean squared error between the composite of an insertion render and a target LDR image.
LossValue loss_insertion(const HybridLightField& lf, const InsertionScene& scene,
                         const InsertionConfig& cfg, const RgbImage& target,
                         bool with_volume = true);

// --- gradient verification -------------------------------------------------------------

// Everything needed to evaluate the scalar objective sum(weights . composite).
struct GradCheckScene {
  HybridLightField lf;
  InsertionScene scene;
  InsertionConfig cfg;
  RgbImage weights;
};

// 2x2x2 grid, 8x8 image, 16 foreground rays per pixel, a small sphere on a ground plane.
// The foreground sampling mode cycles with the seed.
GradCheckScene make_tiny_scene(std::uint64_t seed);

struct GradCheckOptions {
  double h = 1e-4;
  double rel_tol = 1e-4;
  double abs_floor = 1e-10;
  int random_directions = 4;  // extra directional checks along random unit vectors
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::vector<std::string> skipped;  // parameters at a constraint boundary or with non-finite FD
  double max_rel_err = 0;
  double max_abs_err = 0;
  std::string worst_param;
  bool pass = true;
};

double grad_check_objective(const GradCheckScene& s);
AdjointBuffer grad_check_gradient(const GradCheckScene& s);
GradCheckReport grad_check(const GradCheckScene& s, const GradCheckOptions& opt = {});

// --- fitting ---------------------------------------------------------------------------

struct InsertionObservation {
  InsertionScene scene;
  RgbImage target;  // LDR composite
};

// One posed view. Every target is optional; a loss term is evaluated only when its target
// is present and its weight is positive.
struct Observation {
  PinholeCamera camera;
  std::optional<RgbImage> radiance;      // HDR camera-ray radiance
  std::optional<ScalarImage> sky_mask;   // 1 on sky pixels
  std::optional<DepthMap> depth;         // z-depth in meters
  std::optional<InsertionObservation> insertion;
};

struct LossWeights {
  double recon = 1.0;
  double transmit = 1.0;
  double reg = 1e-4;
  double depth = 1.0;
  double insert = 1.0;
};

// Parameter groups updated by fit.
struct Trainable {
  bool volume = true;
  bool peak_dir = true;
  bool peak_intensity = true;
  bool background = true;
};

struct FitConfig {
  double step = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int iterations = 200;
  // Stop once the total loss falls to this value or below.
  double target_loss = 0.0;
  LossWeights weights;
  Trainable trainable;
  InsertionConfig insertion;  // used for insertion observations
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
};

struct FitTraceRow {
  int iteration = 0;
  double recon = 0, transmit = 0, reg = 0, depth = 0, insert = 0, total = 0;
};

struct FitResult {
  HybridLightField lf;
  std::vector<FitTraceRow> trace;
};

// Total weighted loss and its gradient at `lf`. Throws NumericalError naming the first
// non-finite term.
FitTraceRow evaluate_objective(const HybridLightField& lf, const std::vector<Observation>& obs,
                               const FitConfig& cfg, AdjointBuffer* grad);

// Projected Adam. Radiance parameters (voxel amplitudes, peak intensity, background) are
// updated in the log domain; mu and peak_dir are renormalized, sigma and alpha clamped.
// The callback, when set, sees every trace row and may return false to stop early.
FitResult fit(HybridLightField init, const std::vector<Observation>& obs, const FitConfig& cfg,
              const std::function<bool(const FitTraceRow&)>& on_step = {});

// Light field with the same shapes as `like`, randomized from `seed`: sun direction on the
// upper hemisphere, sun and background radiance, and optionally voxel lobes with small
// opacity. Without `randomize_volume` the grid is copied unchanged.
HybridLightField random_lighting(const HybridLightField& like, std::uint64_t seed,
                                 bool randomize_volume = true);

}  // namespace hlf
