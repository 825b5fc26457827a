# Copyright 2026 The hybridlight Authors
# SPDX-License-Identifier: Apache-2.0

"""Hybrid sky + volumetric light field for virtual object insertion."""

from ._core import (
    LightField,
    NumericalError,
    ValidationError,
    analytic_lighting,
    angular_error_deg,
    fit,
    grad_check,
    insert,
    read_hdr,
    read_hlf,
    read_pfm,
    read_png,
    scene_lighting,
    tonemap,
    write_hdr,
    write_hlf,
    write_pfm,
)

__all__ = [
    "LightField",
    "NumericalError",
    "ValidationError",
    "analytic_lighting",
    "angular_error_deg",
    "fit",
    "grad_check",
    "insert",
    "read_hdr",
    "read_hlf",
    "read_pfm",
    "read_png",
    "scene_lighting",
    "tonemap",
    "write_hdr",
    "write_hlf",
    "write_pfm",
]
