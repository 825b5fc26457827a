// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#include "hlf/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace hlf {

using nlohmann::json;

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(path.string() + ": cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError(path.string() + ": write failed");
}

namespace {

// Little-endian primitives shared by the binary formats.
void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string name) : b_(bytes), name_(std::move(name)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }
  bool at_end() const { return pos_ >= b_.size(); }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(name_, pos_, what); }
  [[noreturn]] void fail_at(std::size_t pos, const std::string& what) const {
    throw FormatError(name_, pos, what);
  }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(std::string("unexpected end of file in ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(b_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  // Text line without the trailing '\n'.
  std::string line(const char* what) {
    const std::size_t end = b_.find('\n', pos_);
    if (end == std::string::npos) fail(std::string("unterminated line in ") + what);
    std::string s = b_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return s;
  }
  // Whitespace-delimited token.
  std::string token(const char* what) {
    while (pos_ < b_.size() && std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < b_.size() && !std::isspace(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_) fail(std::string("missing ") + what);
    return b_.substr(start, pos_ - start);
  }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::string& b_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

// --- Radiance RGBE ---------------------------------------------------------------------

std::array<std::uint8_t, 4> rgbe_from_rgb(const Rgb& c) {
  const double v = std::max({c.r, c.g, c.b});
  if (!(v >= 1e-32)) return {0, 0, 0, 0};
  int e = 0;
  const double m = std::frexp(v, &e);
  if (e > 127) return {255, 255, 255, 255};
  const double scale = m * 256.0 / v;
  auto q = [&](double x) { return static_cast<std::uint8_t>(std::clamp(x * scale, 0.0, 255.0)); };
  return {q(c.r), q(c.g), q(c.b), static_cast<std::uint8_t>(e + 128)};
}

Rgb rgb_from_rgbe(const std::array<std::uint8_t, 4>& e) {
  if (e[3] == 0) return {};
  const double f = std::ldexp(1.0, static_cast<int>(e[3]) - (128 + 8));
  return {(e[0] + 0.5) * f, (e[1] + 0.5) * f, (e[2] + 0.5) * f};
}

namespace {

void read_rgbe_scanline(ByteReader& in, int width, std::vector<std::array<std::uint8_t, 4>>& row) {
  row.assign(static_cast<std::size_t>(width), {0, 0, 0, 0});
  if (width >= 8 && width < 0x8000 && in.remaining() >= 4) {
    const std::size_t start = in.pos();
    const std::uint8_t b0 = in.u8("scanline"), b1 = in.u8("scanline"), b2 = in.u8("scanline"),
                       b3 = in.u8("scanline");
    if (b0 == 2 && b1 == 2 && !(b2 & 0x80)) {
      if (((b2 << 8) | b3) != width) in.fail_at(start, "run-length scanline width mismatch");
      for (int c = 0; c < 4; ++c) {
        int x = 0;
        while (x < width) {
          const std::size_t at = in.pos();
          int count = in.u8("run-length data");
          if (count > 128) {
            count -= 128;
            if (x + count > width) in.fail_at(at, "run overflows scanline");
            const std::uint8_t v = in.u8("run-length data");
            for (int i = 0; i < count; ++i) row[static_cast<std::size_t>(x++)][c] = v;
          } else {
            if (count == 0 || x + count > width) in.fail_at(at, "bad literal run length");
            for (int i = 0; i < count; ++i) row[static_cast<std::size_t>(x++)][c] = in.u8("run-length data");
          }
        }
      }
      return;
    }
    // Not new-style RLE: the four bytes are the first flat pixel.
    row[0] = {b0, b1, b2, b3};
    int x = 1;
    int shift = 0;
    if (b0 == 1 && b1 == 1 && b2 == 1) in.fail_at(start, "old-style run at scanline start");
    while (x < width) {
      std::array<std::uint8_t, 4> p;
      for (int c = 0; c < 4; ++c) p[c] = in.u8("pixel data");
      if (p[0] == 1 && p[1] == 1 && p[2] == 1) {
        const int count = p[3] << shift;
        if (x + count > width) in.fail("old-style run overflows scanline");
        for (int i = 0; i < count; ++i, ++x) row[static_cast<std::size_t>(x)] = row[static_cast<std::size_t>(x - 1)];
        shift += 8;
      } else {
        row[static_cast<std::size_t>(x++)] = p;
        shift = 0;
      }
    }
    return;
  }
  for (int x = 0; x < width; ++x)
    for (int c = 0; c < 4; ++c) row[static_cast<std::size_t>(x)][c] = in.u8("pixel data");
}

void write_rle_channel(std::string& out, const std::vector<std::uint8_t>& d) {
  const std::size_t w = d.size();
  std::size_t i = 0;
  while (i < w) {
    std::size_t j = i, run = 0;
    while (j < w) {
      run = 1;
      while (j + run < w && run < 127 && d[j + run] == d[j]) ++run;
      if (run >= 4) break;
      j += run;
    }
    if (j >= w) {
      j = w;
      run = 0;
    }
    while (i < j) {
      const std::size_t n = std::min<std::size_t>(128, j - i);
      put_u8(out, static_cast<std::uint8_t>(n));
      out.append(reinterpret_cast<const char*>(d.data() + i), n);
      i += n;
    }
    if (run >= 4) {
      put_u8(out, static_cast<std::uint8_t>(128 + run));
      put_u8(out, d[j]);
      i = j + run;
    }
  }
}

}  // namespace

RgbImage decode_hdr(const std::string& bytes, const std::string& name) {
  ByteReader in(bytes, name);
  const std::string magic = in.line("header");
  if (magic.rfind("#?", 0) != 0) in.fail_at(0, "missing #? signature");
  for (;;) {
    const std::size_t at = in.pos();
    const std::string l = in.line("header");
    if (l.empty()) break;
    if (l.rfind("FORMAT=", 0) == 0 && l != "FORMAT=32-bit_rle_rgbe")
      in.fail_at(at, "unsupported pixel format '" + l.substr(7) + "'");
  }
  const std::size_t res_at = in.pos();
  const std::string res = in.line("resolution line");
  int h = 0, w = 0;
  char tail = 0;
  if (std::sscanf(res.c_str(), "-Y %d +X %d%c", &h, &w, &tail) != 2 || h <= 0 || w <= 0)
    in.fail_at(res_at, "unsupported resolution line '" + res + "' (expected -Y H +X W)");
  RgbImage img(w, h);
  std::vector<std::array<std::uint8_t, 4>> row;
  for (int y = 0; y < h; ++y) {
    read_rgbe_scanline(in, w, row);
    for (int x = 0; x < w; ++x) img.at(x, y) = rgb_from_rgbe(row[static_cast<std::size_t>(x)]);
  }
  return img;
}

RgbImage read_hdr(const fs::path& path) { return decode_hdr(read_file_bytes(path), path.string()); }

std::string encode_hdr(const RgbImage& img) {
  std::string out = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(img.height()) +
                    " +X " + std::to_string(img.width()) + "\n";
  const int w = img.width();
  const bool rle = w >= 8 && w < 0x8000;
  std::vector<std::uint8_t> channel(static_cast<std::size_t>(w));
  std::vector<std::array<std::uint8_t, 4>> row(static_cast<std::size_t>(w));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) row[static_cast<std::size_t>(x)] = rgbe_from_rgb(img.at(x, y));
    if (!rle) {
      for (const auto& p : row) out.append(reinterpret_cast<const char*>(p.data()), 4);
      continue;
    }
    put_u8(out, 2);
    put_u8(out, 2);
    put_u8(out, static_cast<std::uint8_t>(w >> 8));
    put_u8(out, static_cast<std::uint8_t>(w & 0xff));
    for (int c = 0; c < 4; ++c) {
      for (int x = 0; x < w; ++x) channel[static_cast<std::size_t>(x)] = row[static_cast<std::size_t>(x)][c];
      write_rle_channel(out, channel);
    }
  }
  return out;
}

void write_hdr(const fs::path& path, const RgbImage& img) { write_file_bytes(path, encode_hdr(img)); }

// --- PNG -------------------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> png_decode(const fs::path& path, std::uint32_t format, int& w, int& h) {
  const std::string bytes = read_file_bytes(path);
  static const unsigned char kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSig, 8) != 0)
    throw FormatError(path.string(), 0, "not a PNG file");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw ValidationError(path.string() + ": " + image.message);
  image.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ValidationError(path.string() + ": " + msg);
  }
  w = static_cast<int>(image.width);
  h = static_cast<int>(image.height);
  return buf;
}

std::uint8_t quantize8(double v) {
  if (!(v > 0)) return 0;
  return static_cast<std::uint8_t>(std::lround(std::min(v, 1.0) * 255.0));
}

void png_encode(const fs::path& path, std::uint32_t format, int w, int h, const std::vector<std::uint8_t>& buf) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr))
    throw ValidationError(path.string() + ": " + image.message);
}

}  // namespace

RgbImage read_png(const fs::path& path) {
  int w = 0, h = 0;
  const auto buf = png_decode(path, PNG_FORMAT_RGB, w, h);
  RgbImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = Rgb(buf[3 * i] / 255.0, buf[3 * i + 1] / 255.0, buf[3 * i + 2] / 255.0);
  return img;
}

ScalarImage read_png_gray(const fs::path& path) {
  int w = 0, h = 0;
  const auto buf = png_decode(path, PNG_FORMAT_GRAY, w, h);
  ScalarImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = buf[i] / 255.0;
  return img;
}

void write_png(const fs::path& path, const RgbImage& img) {
  std::vector<std::uint8_t> buf(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) buf[3 * i + static_cast<std::size_t>(c)] = quantize8(img[i][c]);
  png_encode(path, PNG_FORMAT_RGB, img.width(), img.height(), buf);
}

void write_png(const fs::path& path, const ScalarImage& img) {
  std::vector<std::uint8_t> buf(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) buf[i] = quantize8(img[i]);
  png_encode(path, PNG_FORMAT_GRAY, img.width(), img.height(), buf);
}

// --- PFM -------------------------------------------------------------------------------

namespace {

// Returns channel count and fills float samples in top-to-bottom row order.
int decode_pfm_raw(const std::string& bytes, const std::string& name, int& w, int& h,
                   std::vector<float>& data) {
  ByteReader in(bytes, name);
  const std::string magic = in.token("PFM signature");
  int channels = 0;
  if (magic == "Pf") channels = 1;
  else if (magic == "PF") channels = 3;
  else in.fail_at(0, "not a PFM file (expected Pf or PF)");
  auto parse_int = [&](const char* what) {
    const std::size_t at = in.pos();
    const std::string t = in.token(what);
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (*end != '\0' || v <= 0 || v > (1 << 24)) in.fail_at(at, std::string("bad ") + what);
    return static_cast<int>(v);
  };
  w = parse_int("width");
  h = parse_int("height");
  const std::size_t scale_at = in.pos();
  const std::string st = in.token("scale");
  char* end = nullptr;
  const double scale = std::strtod(st.c_str(), &end);
  if (*end != '\0' || scale == 0.0 || !std::isfinite(scale)) in.fail_at(scale_at, "bad scale");
  in.u8("header terminator");
  const bool little = scale < 0;
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(channels);
  in.need(count * 4, "pixel data");
  data.resize(count);
  for (int y = h - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * static_cast<std::size_t>(channels); ++i) {
      std::uint32_t v = in.u32("pixel data");
      if (!little) v = __builtin_bswap32(v);
      data[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) * static_cast<std::size_t>(channels) + i] =
          std::bit_cast<float>(v);
    }
  }
  if (!in.at_end()) in.fail("trailing bytes after pixel data");
  return channels;
}

std::string encode_pfm_raw(int w, int h, int channels, const std::vector<float>& data) {
  std::string out = std::string(channels == 1 ? "Pf" : "PF") + "\n" + std::to_string(w) + " " +
                    std::to_string(h) + "\n-1.0\n";
  const std::size_t row = static_cast<std::size_t>(w) * static_cast<std::size_t>(channels);
  for (int y = h - 1; y >= 0; --y)
    for (std::size_t i = 0; i < row; ++i)
      put_u32(out, std::bit_cast<std::uint32_t>(data[static_cast<std::size_t>(y) * row + i]));
  return out;
}

}  // namespace

ScalarImage decode_pfm(const std::string& bytes, const std::string& name) {
  int w = 0, h = 0;
  std::vector<float> data;
  if (decode_pfm_raw(bytes, name, w, h, data) != 1)
    throw FormatError(name, 0, "expected a single-channel (Pf) file");
  ScalarImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = data[i];
  return img;
}

RgbImage decode_pfm_rgb(const std::string& bytes, const std::string& name) {
  int w = 0, h = 0;
  std::vector<float> data;
  const int channels = decode_pfm_raw(bytes, name, w, h, data);
  RgbImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = channels == 1 ? Rgb(data[i]) : Rgb(data[3 * i], data[3 * i + 1], data[3 * i + 2]);
  return img;
}

ScalarImage read_pfm(const fs::path& path) { return decode_pfm(read_file_bytes(path), path.string()); }
RgbImage read_pfm_rgb(const fs::path& path) { return decode_pfm_rgb(read_file_bytes(path), path.string()); }

std::string encode_pfm(const ScalarImage& img) {
  std::vector<float> data(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) data[i] = static_cast<float>(img[i]);
  return encode_pfm_raw(img.width(), img.height(), 1, data);
}

std::string encode_pfm(const RgbImage& img) {
  std::vector<float> data(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) data[3 * i + static_cast<std::size_t>(c)] = static_cast<float>(img[i][c]);
  return encode_pfm_raw(img.width(), img.height(), 3, data);
}

void write_pfm(const fs::path& path, const ScalarImage& img) { write_file_bytes(path, encode_pfm(img)); }
void write_pfm(const fs::path& path, const RgbImage& img) { write_file_bytes(path, encode_pfm(img)); }

// --- OBJ -------------------------------------------------------------------------------

TriMesh parse_obj(const std::string& text, const std::string& name, ObjStats* stats) {
  std::vector<Vec3> positions, normals;
  struct Corner {
    std::size_t v;
    std::optional<std::size_t> n;
  };
  std::vector<std::vector<Corner>> faces;
  std::vector<std::size_t> face_offsets;
  std::string material;

  auto resolve = [&](long idx, std::size_t count, std::size_t at) -> std::size_t {
    long r = idx > 0 ? idx - 1 : static_cast<long>(count) + idx;
    if (idx == 0 || r < 0 || r >= static_cast<long>(count))
      throw FormatError(name, at, "index " + std::to_string(idx) + " out of range");
    return static_cast<std::size_t>(r);
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    const std::size_t at = pos;
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v" || tag == "vn") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z) || !is_finite(p))
        throw FormatError(name, at, "malformed '" + tag + "' record");
      (tag == "v" ? positions : normals).push_back(p);
    } else if (tag == "f") {
      std::vector<Corner> face;
      std::string tok;
      while (ls >> tok) {
        long vi = 0, ni = 0;
        bool has_n = false;
        const auto s1 = tok.find('/');
        try {
          vi = std::stol(tok.substr(0, s1));
          if (s1 != std::string::npos) {
            const auto s2 = tok.find('/', s1 + 1);
            if (s2 != std::string::npos && s2 + 1 < tok.size()) {
              ni = std::stol(tok.substr(s2 + 1));
              has_n = true;
            }
          }
        } catch (const std::exception&) {
          throw FormatError(name, at, "malformed face vertex '" + tok + "'");
        }
        Corner c{resolve(vi, positions.size(), at), std::nullopt};
        if (has_n) c.n = resolve(ni, normals.size(), at);
        face.push_back(c);
      }
      if (face.size() < 3) throw FormatError(name, at, "face with fewer than 3 vertices");
      faces.push_back(std::move(face));
      face_offsets.push_back(at);
    } else if (tag == "usemtl") {
      if (material.empty()) ls >> material;
    }
    // vt, o, g, s, mtllib and other records carry nothing the renderer uses.
  }

  const bool all_normals = !faces.empty() && std::all_of(faces.begin(), faces.end(), [](const auto& f) {
    return std::all_of(f.begin(), f.end(), [](const Corner& c) { return c.n.has_value(); });
  });
  TriMesh mesh;
  mesh.material_name = material;
  std::map<std::pair<std::size_t, std::size_t>, std::uint32_t> split;
  auto vertex_of = [&](const Corner& c) -> std::uint32_t {
    if (!all_normals) return static_cast<std::uint32_t>(c.v);
    const auto key = std::make_pair(c.v, *c.n);
    const auto it = split.find(key);
    if (it != split.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(positions[c.v]);
    mesh.normals.push_back(normalize(normals[*c.n]));
    split.emplace(key, id);
    return id;
  };
  if (!all_normals) mesh.vertices = positions;
  for (const auto& f : faces)
    for (std::size_t k = 1; k + 1 < f.size(); ++k)
      mesh.triangles.push_back({vertex_of(f[0]), vertex_of(f[k]), vertex_of(f[k + 1])});
  const std::size_t triangles = mesh.triangles.size();
  const std::size_t dropped = mesh.drop_degenerate();
  if (all_normals) {
    for (const Vec3& n : mesh.normals)
      if (!(length(n) > 0.5)) throw FormatError(name, 0, "zero-length vertex normal");
  } else {
    mesh.compute_vertex_normals();
  }
  if (stats) *stats = {faces.size(), triangles, dropped, all_normals};
  mesh.validate();
  return mesh;
}

TriMesh read_obj(const fs::path& path, ObjStats* stats) {
  return parse_obj(read_file_bytes(path), path.string(), stats);
}

// --- HLF1 container --------------------------------------------------------------------

namespace {

constexpr char kHlfMagic[4] = {'H', 'L', 'F', '1'};
constexpr std::uint32_t kHlfVersion = 1;

// The volatile store keeps GCC's SLP vectorizer from folding paired double->float->double
// round trips into plain copies.
double as_float(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

}  // namespace

std::string encode_hlf(const HybridLightField& lf, SkyEncoding sky_enc) {
  lf.validate();
  std::string out(kHlfMagic, 4);
  put_u32(out, kHlfVersion);

  const SkyDome& sky = lf.sky;
  for (int i = 0; i < 3; ++i) put_f32(out, sky.peak_dir[i]);
  for (int i = 0; i < 3; ++i) put_f32(out, sky.peak_intensity[i]);
  put_f32(out, sky.sharpness);
  put_u32(out, static_cast<std::uint32_t>(sky.background.height()));
  put_u32(out, static_cast<std::uint32_t>(sky.background.width()));
  put_u8(out, static_cast<std::uint8_t>(sky_enc));
  for (const Rgb& t : sky.background.pixels()) {
    if (sky_enc == SkyEncoding::Rgbe) {
      const auto e = rgbe_from_rgb(t);
      out.append(reinterpret_cast<const char*>(e.data()), 4);
    } else {
      for (int c = 0; c < 3; ++c) put_f32(out, t[c]);
    }
  }

  const VsgGrid& g = lf.grid;
  put_u32(out, static_cast<std::uint32_t>(g.dims().x));
  put_u32(out, static_cast<std::uint32_t>(g.dims().y));
  put_u32(out, static_cast<std::uint32_t>(g.dims().z));
  const LogProjection& m = g.mapping();
  for (double v : {m.half_extent_x, m.half_extent_y, m.z_min, m.z_max, m.curvature}) put_f32(out, v);
  put_u32(out, static_cast<std::uint32_t>(lf.samples_per_ray));
  put_u8(out, lf.interpolation == VoxelInterpolation::Trilinear ? 1 : 0);
  out.reserve(out.size() + g.size() * 32);
  for (int ch = 0; ch < 8; ++ch) {
    for (const VsgVoxel& v : g.voxels()) {
      double x = 0;
      if (ch < 3) x = v.c[ch];
      else if (ch < 6) x = v.mu[ch - 3];
      else if (ch == 6) x = v.sigma;
      else x = v.alpha;
      put_f32(out, x);
    }
  }
  return out;
}

HybridLightField decode_hlf(const std::string& bytes, const std::string& name) {
  ByteReader in(bytes, name);
  if (in.bytes(4, "magic") != std::string(kHlfMagic, 4)) in.fail_at(0, "bad magic (expected HLF1)");
  const std::size_t ver_at = in.pos();
  const std::uint32_t version = in.u32("version");
  if (version != kHlfVersion) in.fail_at(ver_at, "unsupported version " + std::to_string(version));

  HybridLightField lf;
  SkyDome& sky = lf.sky;
  sky.peak_dir.x = in.f32("sky block");
  sky.peak_dir.y = in.f32("sky block");
  sky.peak_dir.z = in.f32("sky block");
  for (int c = 0; c < 3; ++c) sky.peak_intensity[c] = in.f32("sky block");
  sky.sharpness = in.f32("sky block");
  const std::size_t dims_at = in.pos();
  const std::uint32_t bh = in.u32("sky block"), bw = in.u32("sky block");
  if (bh == 0 || bw == 0 || bh > (1u << 16) || bw > (1u << 16)) in.fail_at(dims_at, "bad background size");
  const std::size_t enc_at = in.pos();
  const std::uint8_t enc = in.u8("sky block");
  if (enc > 1) in.fail_at(enc_at, "unknown sky encoding " + std::to_string(enc));
  const std::size_t texels = static_cast<std::size_t>(bh) * bw;
  in.need(texels * (enc == 0 ? 12 : 4), "sky payload");
  sky.background = RgbImage(static_cast<int>(bw), static_cast<int>(bh));
  for (Rgb& t : sky.background.pixels()) {
    if (enc == 1) {
      std::array<std::uint8_t, 4> e;
      for (auto& b : e) b = in.u8("sky payload");
      t = rgb_from_rgbe(e);
    } else {
      for (int c = 0; c < 3; ++c) t[c] = in.f32("sky payload");
    }
  }

  const std::size_t grid_at = in.pos();
  GridDims dims;
  dims.x = static_cast<int>(in.u32("grid block"));
  dims.y = static_cast<int>(in.u32("grid block"));
  dims.z = static_cast<int>(in.u32("grid block"));
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0 || dims.x > 4096 || dims.y > 4096 || dims.z > 4096)
    in.fail_at(grid_at, "bad grid dimensions");
  LogProjection m;
  m.half_extent_x = in.f32("grid block");
  m.half_extent_y = in.f32("grid block");
  m.z_min = in.f32("grid block");
  m.z_max = in.f32("grid block");
  m.curvature = in.f32("grid block");
  const std::size_t spr_at = in.pos();
  lf.samples_per_ray = static_cast<int>(in.u32("grid block"));
  if (lf.samples_per_ray < 1 || lf.samples_per_ray > (1 << 20)) in.fail_at(spr_at, "bad samples_per_ray");
  const std::size_t interp_at = in.pos();
  const std::uint8_t interp = in.u8("grid block");
  if (interp > 1) in.fail_at(interp_at, "unknown interpolation mode");
  lf.interpolation = interp == 1 ? VoxelInterpolation::Trilinear : VoxelInterpolation::Nearest;
  try {
    m.validate();
  } catch (const ValidationError& e) {
    in.fail_at(grid_at, e.what());
  }
  const std::size_t n = dims.count();
  in.need(n * 32, "voxel planes");
  std::vector<VsgVoxel> voxels(n);
  for (int ch = 0; ch < 8; ++ch) {
    for (VsgVoxel& v : voxels) {
      const double x = in.f32("voxel planes");
      if (ch < 3) v.c[ch] = x;
      else if (ch == 3) v.mu.x = x;
      else if (ch == 4) v.mu.y = x;
      else if (ch == 5) v.mu.z = x;
      else if (ch == 6) v.sigma = x;
      else v.alpha = x;
    }
  }
  if (!in.at_end()) in.fail("trailing bytes after grid block");
  lf.grid = VsgGrid(dims, m);
  for (std::size_t i = 0; i < n; ++i) lf.grid.set_voxel_unchecked(i, voxels[i]);
  try {
    lf.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": invalid light field: " + e.what());
  }
  return lf;
}

void write_hlf(const fs::path& path, const HybridLightField& lf, SkyEncoding sky) {
  write_file_bytes(path, encode_hlf(lf, sky));
}

HybridLightField read_hlf(const fs::path& path) { return decode_hlf(read_file_bytes(path), path.string()); }

HybridLightField round_to_float(const HybridLightField& lf) {
  HybridLightField out = lf;
  SkyDome& s = out.sky;
  s.peak_dir = {as_float(s.peak_dir.x), as_float(s.peak_dir.y), as_float(s.peak_dir.z)};
  for (int c = 0; c < 3; ++c) s.peak_intensity[c] = as_float(s.peak_intensity[c]);
  s.sharpness = as_float(s.sharpness);
  for (Rgb& t : s.background.pixels())
    for (int c = 0; c < 3; ++c) t[c] = as_float(t[c]);
  const LogProjection& m = lf.grid.mapping();
  LogProjection fm{as_float(m.half_extent_x), as_float(m.half_extent_y), as_float(m.z_min),
                   as_float(m.z_max), as_float(m.curvature)};
  out.grid = VsgGrid(lf.grid.dims(), fm);
  for (std::size_t i = 0; i < lf.grid.size(); ++i) {
    VsgVoxel v = lf.grid.voxel(i);
    for (int c = 0; c < 3; ++c) v.c[c] = as_float(v.c[c]);
    v.mu = {as_float(v.mu.x), as_float(v.mu.y), as_float(v.mu.z)};
    v.sigma = as_float(v.sigma);
    v.alpha = as_float(v.alpha);
    out.grid.set_voxel_unchecked(i, v);
  }
  return out;
}

// --- JSON configuration ----------------------------------------------------------------

namespace {

// Typed access to one JSON object with path-qualified diagnostics.
class JsonObj {
 public:
  JsonObj(const json& j, std::string path, std::string file)
      : j_(j), path_(std::move(path)), file_(std::move(file)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ValidationError(file_ + ": " + (path.empty() ? std::string("/") : path) + ": " + what);
  }
  std::string at(const std::string& key) const { return path_ + "/" + key; }

  void allow(std::initializer_list<const char*> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
        fail(at(it.key()), "unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const char* key) const {
    if (!has(key)) fail(at(key), "required key missing");
    return j_.at(key);
  }

  double number(const char* key) const {
    const json& v = raw(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(at(key), "expected a finite number");
    return d;
  }
  double number(const char* key, double def) const { return has(key) ? number(key) : def; }

  long long integer(const char* key) const {
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<long long>();
  }
  int integer(const char* key, int def) const {
    if (!has(key)) return def;
    const long long v = integer(key);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      fail(at(key), "integer out of range");
    return static_cast<int>(v);
  }
  std::uint64_t seed(const char* key, std::uint64_t def) const {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(at(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key) const {
    const json& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key, std::size_t n) const {
    const json& v = raw(key);
    if (!v.is_array() || v.size() != n) fail(at(key), "expected an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
      if (!v[i].is_number()) fail(at(key) + "/" + std::to_string(i), "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  Vec3 vec3(const char* key) const {
    const auto v = numbers(key, 3);
    return {v[0], v[1], v[2]};
  }
  // A single number means grey.
  Rgb rgb(const char* key) const {
    if (raw(key).is_number()) return Rgb(number(key));
    const auto v = numbers(key, 3);
    return {v[0], v[1], v[2]};
  }

  JsonObj object(const char* key) const { return JsonObj(raw(key), at(key), file_); }
  const std::string& file() const { return file_; }
  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::string file_;
};

json parse_json_text(const std::string& text, const std::string& name) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(name, e.byte > 0 ? e.byte - 1 : 0, "invalid JSON");
  }
}

Quality quality_at(const JsonObj& o, const char* key) {
  try {
    return parse_quality(o.string(key));
  } catch (const ValidationError& e) {
    o.fail(o.at(key), e.what());
  }
}

// Applies a "render" block over `cfg` (and the lighting's march settings when `lf` is set).
void apply_render_block(const JsonObj& r, InsertionConfig& cfg, HybridLightField* lf) {
  r.allow({"quality", "fg_sampling", "center_rays", "uniform_rays", "diffuse_rays", "specular_rays",
           "diffuse_lobe", "specular_lobe", "shadow_rays", "shadow_resolution", "ambient",
           "self_occlusion", "shadow_rgb", "samples_per_ray", "interpolation", "seed"});
  if (r.has("fg_sampling")) {
    try {
      cfg.fg_sampling = parse_fg_sampling(r.string("fg_sampling"));
    } catch (const ValidationError& e) {
      r.fail(r.at("fg_sampling"), e.what());
    }
  }
  cfg.center_rays = r.integer("center_rays", cfg.center_rays);
  cfg.uniform_rays = r.integer("uniform_rays", cfg.uniform_rays);
  cfg.diffuse_rays = r.integer("diffuse_rays", cfg.diffuse_rays);
  cfg.specular_rays = r.integer("specular_rays", cfg.specular_rays);
  cfg.diffuse_lobe = r.boolean("diffuse_lobe", cfg.diffuse_lobe);
  cfg.specular_lobe = r.boolean("specular_lobe", cfg.specular_lobe);
  cfg.shadow_rays = r.integer("shadow_rays", cfg.shadow_rays);
  if (r.has("shadow_resolution")) {
    const json& v = r.raw("shadow_resolution");
    if (v.is_string() && v.get<std::string>() == "full") {
      cfg.shadow_width = cfg.shadow_height = 0;
    } else {
      const auto wh = r.numbers("shadow_resolution", 2);
      cfg.shadow_width = static_cast<int>(wh[0]);
      cfg.shadow_height = static_cast<int>(wh[1]);
    }
  }
  cfg.ambient = r.number("ambient", cfg.ambient);
  cfg.self_occlusion = r.boolean("self_occlusion", cfg.self_occlusion);
  cfg.shadow_rgb = r.boolean("shadow_rgb", cfg.shadow_rgb);
  cfg.seed = r.seed("seed", cfg.seed);
  if (lf) {
    lf->samples_per_ray = r.integer("samples_per_ray", lf->samples_per_ray);
    if (r.has("interpolation")) {
      const std::string m = r.string("interpolation");
      if (m == "nearest") lf->interpolation = VoxelInterpolation::Nearest;
      else if (m == "trilinear") lf->interpolation = VoxelInterpolation::Trilinear;
      else r.fail(r.at("interpolation"), "expected nearest or trilinear");
    }
  }
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    r.fail(r.path(), e.what());
  }
}

CameraConfig parse_camera(const JsonObj& c) {
  c.allow({"fx", "fy", "cx", "cy", "width", "height", "height_above_ground", "pitch_deg"});
  CameraConfig cam;
  cam.fx = c.number("fx");
  cam.fy = c.number("fy", cam.fx);
  if (c.has("cx")) cam.cx = c.number("cx");
  if (c.has("cy")) cam.cy = c.number("cy");
  cam.width = c.integer("width", 0);
  cam.height = c.integer("height", 0);
  if (!c.has("width")) c.fail(c.at("width"), "required key missing");
  if (!c.has("height")) c.fail(c.at("height"), "required key missing");
  cam.height_above_ground = c.number("height_above_ground", cam.height_above_ground);
  cam.pitch_deg = c.number("pitch_deg", cam.pitch_deg);
  try {
    cam.camera().validate();
  } catch (const ValidationError& e) {
    c.fail(c.path(), e.what());
  }
  return cam;
}

AnalyticLighting parse_analytic(const JsonObj& l) {
  l.allow({"type", "sun_dir", "sun_intensity", "sharpness", "background", "resolution"});
  if (l.string("type") != "analytic") l.fail(l.at("type"), "expected \"analytic\"");
  AnalyticLighting a;
  if (l.has("sun_dir")) a.sun_dir = l.vec3("sun_dir");
  if (!(length(a.sun_dir) > 0)) l.fail(l.at("sun_dir"), "must be non-zero");
  if (l.has("sun_intensity")) a.sun_intensity = l.rgb("sun_intensity");
  a.sharpness = l.number("sharpness", a.sharpness);
  if (l.has("background")) a.background = l.rgb("background");
  if (l.has("resolution")) {
    const auto hw = l.numbers("resolution", 2);
    a.height = static_cast<int>(hw[0]);
    a.width = static_cast<int>(hw[1]);
  }
  try {
    analytic_lighting(a).validate();
  } catch (const ValidationError& e) {
    l.fail(l.path(), e.what());
  }
  return a;
}

}  // namespace

PinholeCamera CameraConfig::camera() const {
  PinholeCamera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx.value_or(width / 2.0);
  cam.cy = cy.value_or(height / 2.0);
  cam.width = width;
  cam.height = height;
  cam.pose = Pose::street_view(pitch_deg);
  return cam;
}

HybridLightField analytic_lighting(const AnalyticLighting& a) {
  SkyDome sky = SkyDome::uniform(a.background, a.height, a.width);
  const double len = length(a.sun_dir);
  sky.peak_dir = len > 0 ? a.sun_dir / len : Vec3{0, 0, 1};
  sky.peak_intensity = a.sun_intensity;
  sky.sharpness = a.sharpness;
  return HybridLightField(std::move(sky), VsgGrid({1, 1, 1}));
}

SceneConfig parse_scene_config(const std::string& text, const fs::path& base_dir, const std::string& name) {
  const json j = parse_json_text(text, name);
  const JsonObj root(j, "", name);
  root.allow({"image", "depth", "camera", "object", "lighting", "render"});
  SceneConfig sc;
  sc.base_dir = base_dir;
  sc.image = root.string("image");
  if (root.has("depth")) sc.depth = root.string("depth");
  sc.camera = parse_camera(root.object("camera"));

  const JsonObj o = root.object("object");
  o.allow({"mesh", "translation", "yaw_deg", "scale", "material"});
  sc.object.mesh = o.string("mesh");
  if (o.has("translation")) sc.object.translation = o.vec3("translation");
  sc.object.yaw_deg = o.number("yaw_deg", 0.0);
  sc.object.scale = o.number("scale", 1.0);
  if (!(sc.object.scale > 0)) o.fail(o.at("scale"), "must be > 0");
  if (o.has("material")) {
    const JsonObj m = o.object("material");
    m.allow({"base_color", "metallic", "roughness", "specular"});
    if (m.has("base_color")) sc.object.base_color = m.rgb("base_color");
    if (m.has("metallic")) sc.object.metallic = m.number("metallic");
    if (m.has("roughness")) sc.object.roughness = m.number("roughness");
    if (m.has("specular")) sc.object.specular = m.number("specular");
  }

  if (root.has("lighting")) {
    const json& l = root.raw("lighting");
    if (l.is_string()) sc.lighting_path = l.get<std::string>();
    else sc.analytic = parse_analytic(root.object("lighting"));
  }
  if (root.has("render")) {
    const JsonObj r = root.object("render");
    if (r.has("quality")) sc.quality = quality_at(r, "quality");
    InsertionConfig probe;
    HybridLightField lf_probe;
    apply_render_block(r, probe, &lf_probe);  // schema check only
    sc.render_json = root.raw("render").dump();
  }
  if (!sc.object.mesh.empty() && sc.object.mesh.rfind("builtin:", 0) == 0 && sc.object.mesh != "builtin:sphere")
    o.fail(o.at("mesh"), "unknown builtin mesh (available: builtin:sphere)");
  return sc;
}

SceneConfig load_scene_config(const fs::path& path) {
  return parse_scene_config(read_file_bytes(path), path.parent_path(), path.string());
}

TriMesh load_object_mesh(const SceneConfig& sc) {
  const ObjectConfig& o = sc.object;
  TriMesh mesh;
  if (o.mesh == "builtin:sphere") {
    mesh = make_uv_sphere({0, 0, 0.5}, 0.5, 24, 48);
  } else {
    ObjStats stats;
    mesh = read_obj(sc.resolve(o.mesh), &stats);
  }
  if (o.scale != 1.0) {
    for (Vec3& v : mesh.vertices) v = v * o.scale;
  }
  if (o.base_color) mesh.material.base_color = *o.base_color;
  if (o.metallic) mesh.material.metallic = *o.metallic;
  if (o.roughness) mesh.material.roughness = *o.roughness;
  if (o.specular) mesh.material.specular = *o.specular;
  mesh.material.validate();
  const Vec3 t{o.translation.x, o.translation.y, o.translation.z - sc.camera.height_above_ground};
  return place_mesh(mesh, t, o.yaw_deg);
}

namespace {

InsertionScene build_insertion_scene(const SceneConfig& sc) {
  InsertionScene s;
  s.camera = sc.camera.camera();
  s.background = read_png(sc.resolve(sc.image));
  if (!s.background.same_size(s.camera.width, s.camera.height))
    throw ValidationError(sc.resolve(sc.image).string() + ": image is " + std::to_string(s.background.width()) +
                          "x" + std::to_string(s.background.height()) + ", camera expects " +
                          std::to_string(s.camera.width) + "x" + std::to_string(s.camera.height));
  if (sc.depth) {
    s.depth = read_pfm(sc.resolve(*sc.depth));
    if (!s.depth.same_size(s.camera.width, s.camera.height))
      throw ValidationError(sc.resolve(*sc.depth).string() + ": depth size does not match the camera");
  } else {
    s.depth = plane_depth(s.camera, -sc.camera.height_above_ground);
  }
  s.object = PlacedMesh(load_object_mesh(sc));
  return s;
}

}  // namespace

LoadedScene load_scene(const SceneConfig& sc, const RunOverrides& ov) {
  LoadedScene out;
  out.scene = build_insertion_scene(sc);
  out.lf = sc.lighting_path ? read_hlf(sc.resolve(*sc.lighting_path)) : analytic_lighting(sc.analytic);
  out.cfg = InsertionConfig::preset(ov.quality.value_or(sc.quality.value_or(Quality::Draft)));
  const json render = json::parse(sc.render_json);
  apply_render_block(JsonObj(render, "/render", "scene config"), out.cfg, &out.lf);
  if (ov.seed) out.cfg.seed = *ov.seed;
  if (ov.threads) out.cfg.threads = *ov.threads;

  const Vec3 anchor = out.scene.object.mesh.bounds().center();
  if (!out.lf.grid.world_box().contains(anchor))
    throw ValidationError("object translation lies outside the lighting volume");
  out.lf.validate();
  out.scene.validate();
  return out;
}

// --- observations and fit configuration ------------------------------------------------

namespace {

HybridLightField parse_lighting_template(const JsonObj& t) {
  t.allow({"sky", "grid", "samples_per_ray", "interpolation"});
  HybridLightField lf;
  int sw = kDefaultSkyWidth, sh = kDefaultSkyHeight;
  double sharpness = kDefaultSunSharpness;
  if (t.has("sky")) {
    const JsonObj s = t.object("sky");
    s.allow({"resolution", "sharpness"});
    if (s.has("resolution")) {
      const auto hw = s.numbers("resolution", 2);
      sh = static_cast<int>(hw[0]);
      sw = static_cast<int>(hw[1]);
    }
    sharpness = s.number("sharpness", sharpness);
  }
  lf.sky = SkyDome::uniform(Rgb(1.0), sh, sw);
  lf.sky.sharpness = sharpness;
  GridDims dims{1, 1, 1};
  LogProjection m;
  if (t.has("grid")) {
    const JsonObj g = t.object("grid");
    g.allow({"dims", "projection"});
    if (g.has("dims")) {
      const auto d = g.numbers("dims", 3);
      dims = {static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2])};
      if (dims.x < 1 || dims.y < 1 || dims.z < 1) g.fail(g.at("dims"), "dimensions must be >= 1");
    }
    if (g.has("projection")) {
      const JsonObj p = g.object("projection");
      p.allow({"half_extent_x", "half_extent_y", "z_min", "z_max", "curvature"});
      m.half_extent_x = p.number("half_extent_x", m.half_extent_x);
      m.half_extent_y = p.number("half_extent_y", m.half_extent_y);
      m.z_min = p.number("z_min", m.z_min);
      m.z_max = p.number("z_max", m.z_max);
      m.curvature = p.number("curvature", m.curvature);
      try {
        m.validate();
      } catch (const ValidationError& e) {
        p.fail(p.path(), e.what());
      }
    }
  }
  lf.grid = VsgGrid(dims, m);
  lf.samples_per_ray = t.integer("samples_per_ray", kDefaultSamplesPerRay);
  if (t.has("interpolation")) {
    const std::string mode = t.string("interpolation");
    if (mode == "trilinear") lf.interpolation = VoxelInterpolation::Trilinear;
    else if (mode != "nearest") t.fail(t.at("interpolation"), "expected nearest or trilinear");
  }
  try {
    lf.validate();
  } catch (const ValidationError& e) {
    t.fail(t.path(), e.what());
  }
  return lf;
}

}  // namespace

ObservationSet load_observations(const fs::path& path, const RunOverrides& ov) {
  (void)ov;
  const std::string name = path.string();
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  const json j = parse_json_text(read_file_bytes(path), name);
  const JsonObj root(j, "", name);
  root.allow({"lighting", "observations"});
  ObservationSet set;
  if (root.has("lighting") && root.raw("lighting").is_string()) {
    set.lighting_template = read_hlf(resolve(root.string("lighting")));
    set.template_from_file = true;
  } else if (root.has("lighting")) {
    set.lighting_template = parse_lighting_template(root.object("lighting"));
  } else {
    set.lighting_template = analytic_lighting({});
  }
  const json& list = root.raw("observations");
  if (!list.is_array() || list.empty()) root.fail("/observations", "expected a non-empty array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const JsonObj o(list[i], "/observations/" + std::to_string(i), name);
    o.allow({"camera", "radiance", "sky_mask", "depth", "insertion"});
    Observation obs;
    const bool needs_camera = o.has("radiance") || o.has("sky_mask") || o.has("depth");
    if (o.has("camera")) obs.camera = parse_camera(o.object("camera")).camera();
    else if (needs_camera) o.fail(o.at("camera"), "required key missing");
    auto check_size = [&](const char* key, int w, int h) {
      if (w != obs.camera.width || h != obs.camera.height) o.fail(o.at(key), "size does not match the camera");
    };
    if (o.has("radiance")) {
      const fs::path p = resolve(o.string("radiance"));
      obs.radiance = p.extension() == ".pfm" ? read_pfm_rgb(p) : read_hdr(p);
      check_size("radiance", obs.radiance->width(), obs.radiance->height());
    }
    if (o.has("sky_mask")) {
      obs.sky_mask = read_png_gray(resolve(o.string("sky_mask")));
      for (double& m : obs.sky_mask->pixels()) m = m >= 0.5 ? 1.0 : 0.0;
      check_size("sky_mask", obs.sky_mask->width(), obs.sky_mask->height());
    }
    if (o.has("depth")) {
      obs.depth = read_pfm(resolve(o.string("depth")));
      check_size("depth", obs.depth->width(), obs.depth->height());
    }
    if (o.has("insertion")) {
      const JsonObj ins = o.object("insertion");
      ins.allow({"scene", "target"});
      const fs::path scene_path = resolve(ins.string("scene"));
      const SceneConfig sc = load_scene_config(scene_path);
      InsertionObservation io{build_insertion_scene(sc), read_png(resolve(ins.string("target")))};
      if (!io.target.same_size(io.scene.background)) ins.fail(ins.at("target"), "size does not match the scene image");
      if (!o.has("camera")) obs.camera = io.scene.camera;
      obs.insertion = std::move(io);
    }
    set.observations.push_back(std::move(obs));
  }
  return set;
}

FitConfig parse_fit_config(const std::string& text, const std::string& name, const RunOverrides& ov) {
  const json j = parse_json_text(text, name);
  const JsonObj root(j, "", name);
  root.allow({"step", "beta1", "beta2", "adam_eps", "iterations", "target_loss", "weights", "trainable",
              "render", "seed"});
  FitConfig cfg;
  cfg.step = root.number("step", cfg.step);
  cfg.beta1 = root.number("beta1", cfg.beta1);
  cfg.beta2 = root.number("beta2", cfg.beta2);
  cfg.adam_eps = root.number("adam_eps", cfg.adam_eps);
  cfg.iterations = root.integer("iterations", cfg.iterations);
  cfg.target_loss = root.number("target_loss", cfg.target_loss);
  cfg.seed = root.seed("seed", cfg.seed);
  if (root.has("weights")) {
    const JsonObj w = root.object("weights");
    w.allow({"recon", "transmit", "reg", "depth", "insert"});
    cfg.weights.recon = w.number("recon", cfg.weights.recon);
    cfg.weights.transmit = w.number("transmit", cfg.weights.transmit);
    cfg.weights.reg = w.number("reg", cfg.weights.reg);
    cfg.weights.depth = w.number("depth", cfg.weights.depth);
    cfg.weights.insert = w.number("insert", cfg.weights.insert);
  }
  if (root.has("trainable")) {
    const JsonObj t = root.object("trainable");
    t.allow({"volume", "peak_dir", "peak_intensity", "background"});
    cfg.trainable.volume = t.boolean("volume", cfg.trainable.volume);
    cfg.trainable.peak_dir = t.boolean("peak_dir", cfg.trainable.peak_dir);
    cfg.trainable.peak_intensity = t.boolean("peak_intensity", cfg.trainable.peak_intensity);
    cfg.trainable.background = t.boolean("background", cfg.trainable.background);
  }
  std::optional<Quality> q = ov.quality;
  if (root.has("render")) {
    const JsonObj r = root.object("render");
    if (!q && r.has("quality")) q = quality_at(r, "quality");
    cfg.insertion = InsertionConfig::preset(q.value_or(Quality::Draft));
    apply_render_block(r, cfg.insertion, nullptr);
  } else {
    cfg.insertion = InsertionConfig::preset(q.value_or(Quality::Draft));
  }
  if (ov.seed) cfg.seed = *ov.seed;
  cfg.insertion.seed = cfg.seed;
  if (ov.threads) cfg.threads = *ov.threads;
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
  return cfg;
}

FitConfig load_fit_config(const fs::path& path, const RunOverrides& ov) {
  return parse_fit_config(read_file_bytes(path), path.string(), ov);
}

HybridLightField seeded_lighting(const ObservationSet& set) {
  HybridLightField lf = set.lighting_template;
  if (set.template_from_file) return lf;
  Rgb sky_sum;
  double sky_n = 0;
  for (const Observation& o : set.observations) {
    if (!o.radiance || !o.sky_mask) continue;
    for (std::size_t i = 0; i < o.radiance->size(); ++i) {
      if ((*o.sky_mask)[i] < 0.5) continue;
      sky_sum += (*o.radiance)[i];
      sky_n += 1;
    }
  }
  const Rgb level = sky_n > 0 ? sky_sum / sky_n : Rgb(1.0);
  const Rgb bg(std::max(level.r, 1e-3), std::max(level.g, 1e-3), std::max(level.b, 1e-3));
  const int w = lf.sky.background.width(), h = lf.sky.background.height();
  const double sharpness = lf.sky.sharpness;
  lf.sky = SkyDome::uniform(bg, h, w);
  lf.sky.sharpness = sharpness;
  lf.sky.peak_intensity = bg;
  for (const Observation& o : set.observations) {
    if (!o.radiance || !o.depth) continue;
    lf.grid = unproject_image(o.camera, *o.radiance, *o.depth, lf.grid.dims(), lf.grid.mapping());
    break;
  }
  return lf;
}

void write_trace_csv(const fs::path& path, const std::vector<FitTraceRow>& trace) {
  std::string out = "iteration,recon,transmit,reg,depth,insert,total\n";
  char buf[256];
  for (const FitTraceRow& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.recon,
                  r.transmit, r.reg, r.depth, r.insert, r.total);
    out += buf;
  }
  write_file_bytes(path, out);
}

}  // namespace hlf
