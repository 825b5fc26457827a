# Copyright 2026 The hybridlight Authors
# SPDX-License-Identifier: Apache-2.0

import math
import os
from pathlib import Path

import numpy as np
import pytest

import hybridlight as hl

DATA = Path(os.environ.get("HLF_TEST_DATA", Path(__file__).resolve().parents[1] / "data"))


def test_analytic_sky_peak():
    lf = hl.analytic_lighting([0.0, 0.0, 1.0], sun_intensity=5.0, background=0.0, height=8, width=16)
    assert lf.radiance([0, 0, 0], [0, 0, 1]) == pytest.approx([5.0, 5.0, 5.0])
    assert lf.transmittance([0, 0, 0], [1, 0, 0]) == 1.0
    env = lf.bake_envmap([0, 0, 0], height=8, width=16)
    assert env.shape == (8, 16, 3)
    assert np.all(env >= 0)


def test_hlf_round_trip(tmp_path):
    lf = hl.analytic_lighting([0.3, 0.2, 0.9], sun_intensity=12.0, height=4, width=8)
    path = tmp_path / "sky.hlf"
    hl.write_hlf(path, lf)
    back = hl.read_hlf(path)
    assert back.peak_dir == pytest.approx(lf.peak_dir, abs=1e-7)
    np.testing.assert_allclose(back.background, lf.background, rtol=1e-7)


def test_insert_scene():
    out = hl.insert(DATA / "scene_sphere.json", seed=3)
    comp = out["composite"]
    assert comp.shape == out["input"].shape
    assert comp.min() >= 0.0 and comp.max() < 1.0
    assert out["mask"].sum() > 0
    shadow = out["shadow"]
    assert shadow.max() <= 1.0 + 1e-12
    assert shadow.min() < 1.0
    again = hl.insert(DATA / "scene_sphere.json", seed=3)
    np.testing.assert_array_equal(comp, again["composite"])


def test_grad_check():
    report = hl.grad_check(seed=2, random_directions=1)
    assert report["pass"]
    assert report["max_rel_err"] < 1e-4


def test_tonemap_and_errors(tmp_path):
    ldr = hl.tonemap(np.full((2, 3, 3), 0.5 ** 2.2))
    np.testing.assert_allclose(ldr, 0.5)
    with pytest.raises(ValueError):
        hl.read_hlf(tmp_path / "missing.hlf")
    assert hl.angular_error_deg([1, 0, 0], [0, 1, 0]) == pytest.approx(90.0)


def test_pfm_round_trip(tmp_path):
    img = np.arange(12, dtype=np.float32).reshape(3, 4).astype(np.float64) / 7
    hl.write_pfm(tmp_path / "a.pfm", img)
    np.testing.assert_array_equal(hl.read_pfm(tmp_path / "a.pfm"), img.astype(np.float32))
