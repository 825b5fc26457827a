// Copyright 2026 The hybridlight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hlf/math.hpp"

namespace hlf {

// Uniform surface material of an inserted mesh (metallic/roughness workflow).
struct MaterialParams {
  Rgb base_color{0.8, 0.8, 0.8};
  double metallic = 0.0;
  double roughness = 0.5;
  double specular = 0.5;

  // Throws ValidationError when any field is outside [0, 1].
  void validate() const;
};

}  // namespace hlf
