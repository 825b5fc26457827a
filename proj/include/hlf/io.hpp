// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

// File formats (Radiance .hdr, PNG, PFM, OBJ, the HLF1 light-field container), JSON
// scene/observation/fit configuration, and loss-trace CSV output.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hlf/diffopt.hpp"
#include "hlf/geometry.hpp"
#include "hlf/image.hpp"
#include "hlf/insertion.hpp"
#include "hlf/lightfield.hpp"

namespace hlf {

namespace fs = std::filesystem;

std::string read_file_bytes(const fs::path& path);
void write_file_bytes(const fs::path& path, const std::string& bytes);

// --- Radiance RGBE ---------------------------------------------------------------------

// Reads flat, old-style and new-style run-length encoded scanlines ("-Y H +X W" only).
RgbImage read_hdr(const fs::path& path);
RgbImage decode_hdr(const std::string& bytes, const std::string& name = "<memory>");
// Writes new-style run-length encoded scanlines when 8 <= width < 32768, flat otherwise.
void write_hdr(const fs::path& path, const RgbImage& img);
std::string encode_hdr(const RgbImage& img);

std::array<std::uint8_t, 4> rgbe_from_rgb(const Rgb& c);
Rgb rgb_from_rgbe(const std::array<std::uint8_t, 4>& e);

// --- PNG -------------------------------------------------------------------------------

// 8-bit samples in [0, 1] as stored (no gamma conversion). Gray and alpha are expanded/dropped.
RgbImage read_png(const fs::path& path);
ScalarImage read_png_gray(const fs::path& path);
// Values are clamped to [0, 1] and rounded to 8 bits.
void write_png(const fs::path& path, const RgbImage& img);
void write_png(const fs::path& path, const ScalarImage& img);

// --- PFM -------------------------------------------------------------------------------

ScalarImage read_pfm(const fs::path& path);
RgbImage read_pfm_rgb(const fs::path& path);
ScalarImage decode_pfm(const std::string& bytes, const std::string& name = "<memory>");
RgbImage decode_pfm_rgb(const std::string& bytes, const std::string& name = "<memory>");
// Little-endian float32, rows stored bottom to top.
void write_pfm(const fs::path& path, const ScalarImage& img);
void write_pfm(const fs::path& path, const RgbImage& img);
std::string encode_pfm(const ScalarImage& img);
std::string encode_pfm(const RgbImage& img);

// --- OBJ -------------------------------------------------------------------------------

struct ObjStats {
  std::size_t faces = 0;
  std::size_t triangles = 0;
  std::size_t degenerate_dropped = 0;
  bool had_normals = false;
};

// v / vn / f (polygons are fan-triangulated, negative indices allowed) and usemtl. Vertices
// referenced with different normals are split. Zero-area triangles are dropped and counted;
// area-weighted normals are computed when the file has none.
TriMesh read_obj(const fs::path& path, ObjStats* stats = nullptr);
TriMesh parse_obj(const std::string& text, const std::string& name = "<memory>",
                  ObjStats* stats = nullptr);

// --- HLF1 container --------------------------------------------------------------------

enum class SkyEncoding : std::uint8_t { RawFloat = 0, Rgbe = 1 };

// Layout (little endian): "HLF1", u32 version; sky block; grid block. All real values are
// float32, so round trips are bit-exact for float-representable light fields.
std::string encode_hlf(const HybridLightField& lf, SkyEncoding sky = SkyEncoding::RawFloat);
HybridLightField decode_hlf(const std::string& bytes, const std::string& name = "<memory>");
void write_hlf(const fs::path& path, const HybridLightField& lf,
               SkyEncoding sky = SkyEncoding::RawFloat);
HybridLightField read_hlf(const fs::path& path);

// Rounds every parameter to the nearest float32, i.e. the values an HLF1 file stores.
HybridLightField round_to_float(const HybridLightField& lf);

// --- JSON configuration ----------------------------------------------------------------

struct CameraConfig {
  double fx = 0, fy = 0;
  std::optional<double> cx, cy;
  int width = 0, height = 0;
  double height_above_ground = 1.6;
  double pitch_deg = 0;

  PinholeCamera camera() const;
};

struct ObjectConfig {
  std::string mesh;  // OBJ path or "builtin:sphere" (radius 0.5)
  Vec3 translation;  // meters; z is measured from the ground plane
  double yaw_deg = 0;
  double scale = 1;
  std::optional<Rgb> base_color;
  std::optional<double> metallic, roughness, specular;
};

struct AnalyticLighting {
  Vec3 sun_dir{0, 0.5, 1};
  Rgb sun_intensity{20.0};
  double sharpness = kDefaultSunSharpness;
  Rgb background{0.5};
  int width = kDefaultSkyWidth;
  int height = kDefaultSkyHeight;
};

struct SceneConfig {
  fs::path base_dir;  // relative paths resolve against this
  fs::path image;
  std::optional<fs::path> depth;  // ground plane when absent
  CameraConfig camera;
  ObjectConfig object;
  std::optional<fs::path> lighting_path;
  AnalyticLighting analytic;
  std::optional<Quality> quality;
  std::string render_json = "{}";  // raw "render" block, applied over the quality preset

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

SceneConfig parse_scene_config(const std::string& text, const fs::path& base_dir,
                               const std::string& name = "<memory>");
SceneConfig load_scene_config(const fs::path& path);

struct RunOverrides {
  std::optional<Quality> quality;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct LoadedScene {
  InsertionScene scene;
  HybridLightField lf;
  InsertionConfig cfg;
};

// Reads every referenced file and builds the renderable scene. Precedence of render settings:
// quality preset < "render" block < command-line overrides.
LoadedScene load_scene(const SceneConfig& sc, const RunOverrides& ov = {});

TriMesh load_object_mesh(const SceneConfig& sc);
HybridLightField analytic_lighting(const AnalyticLighting& a);

// Observation set for fitting plus the light-field shape used for initialization.
struct ObservationSet {
  HybridLightField lighting_template;
  bool template_from_file = false;
  std::vector<Observation> observations;
};

ObservationSet load_observations(const fs::path& path, const RunOverrides& ov = {});
FitConfig load_fit_config(const fs::path& path, const RunOverrides& ov = {});
FitConfig parse_fit_config(const std::string& text, const std::string& name = "<memory>",
                           const RunOverrides& ov = {});

// "seeded" initialization: volume unprojected from the first observation with radiance and
// depth; sky set to the mean observed sky radiance.
HybridLightField seeded_lighting(const ObservationSet& obs);

void write_trace_csv(const fs::path& path, const std::vector<FitTraceRow>& trace);

}  // namespace hlf
