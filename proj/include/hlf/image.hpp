// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hlf/error.hpp"
#include "hlf/math.hpp"

namespace hlf {

// Dense row-major image; (0, 0) is the top-left pixel.
template <class T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw ValidationError("image dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_size(int w, int h) const { return width_ == w && height_ == h; }
  template <class U>
  bool same_size(const Image<U>& o) const { return same_size(o.width(), o.height()); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Image<Rgb>;
using ScalarImage = Image<double>;

// Z-depth in meters along the camera forward axis; values <= 0 or non-finite mark invalid pixels.
using DepthMap = Image<double>;

inline bool valid_depth(double d) { return std::isfinite(d) && d > 0.0; }

template <class A, class B>
void require_same_size(const Image<A>& a, const Image<B>& b, const std::string& what) {
  if (!a.same_size(b)) {
    throw ValidationError(what + ": size mismatch (" + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                          "x" + std::to_string(b.height()) + ")");
  }
}

}  // namespace hlf
