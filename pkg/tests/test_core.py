"""
Tests for the core value types, bicubic resampling and seeded streams
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsifusion.core import (
    BlurKernel,
    HsiCube,
    Rng,
    SrfMatrix,
    bicubic_upsample,
    check_divisible,
    cube_new,
)
from hsifusion.exceptions import ParameterError, ShapeError


def _keys(x: float, a: float = -0.5) -> float:
    x = abs(x)
    if x <= 1:
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1
    if x < 2:
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a
    return 0.0


def _direct_bicubic(band: np.ndarray, s: int) -> np.ndarray:
    h, w = band.shape
    out = np.zeros((h * s, w * s))
    for i in range(h * s):
        for j in range(w * s):
            si = (i + 0.5) / s - 0.5
            sj = (j + 0.5) / s - 0.5
            bi, bj = math.floor(si), math.floor(sj)
            value = 0.0
            for ti in range(-1, 3):
                for tj in range(-1, 3):
                    r = min(max(bi + ti, 0), h - 1)
                    c = min(max(bj + tj, 0), w - 1)
                    value += _keys(si - (bi + ti)) * _keys(sj - (bj + tj)) * band[r, c]
            out[i, j] = value
    return out


class TestHsiCube:

    def test_cube_new_zeros(self):
        cube = cube_new(1, 2, 2, 0.0)
        assert cube.shape == (1, 2, 2)
        assert np.all(cube.data == 0.0)

    def test_cube_new_ones(self):
        assert np.array_equal(cube_new(3, 1, 1, 1.0).data.ravel(), [1.0, 1.0, 1.0])

    def test_cube_new_sum(self):
        assert cube_new(2, 2, 2, 0.5).total() == 4.0

    def test_zero_dimension_rejected(self):
        with pytest.raises(ShapeError):
            cube_new(0, 2, 2)

    def test_non_finite_rejected(self):
        data = np.zeros((1, 2, 2))
        data[0, 1, 1] = np.nan
        with pytest.raises(ParameterError):
            HsiCube(data)

    def test_data_is_immutable_copy(self):
        source = np.zeros((1, 2, 2))
        cube = HsiCube(source)
        source[0, 0, 0] = 5.0
        assert cube.data[0, 0, 0] == 0.0
        with pytest.raises(ValueError):
            cube.data[0, 0, 0] = 1.0

    def test_arithmetic(self, random_cube):
        a, b = random_cube(2, 3, 3, seed=1), random_cube(2, 3, 3, seed=2)
        assert np.allclose((a + b).data, a.data + b.data)
        assert np.allclose((a - b).data, a.data - b.data)
        assert np.allclose(a.scale(2.5).data, 2.5 * a.data)
        assert a.dot(b) == b.dot(a)

    def test_shape_mismatch(self, random_cube):
        with pytest.raises(ShapeError):
            random_cube(2, 3, 3) + random_cube(2, 3, 4)


class TestOperatorsTypes:

    def test_kernel_must_be_odd_square(self):
        with pytest.raises(ShapeError):
            BlurKernel(np.full((2, 2), 0.25))

    def test_kernel_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            BlurKernel(np.full((3, 3), 0.2))

    def test_kernel_fit_support(self):
        k = BlurKernel.uniform(3)
        padded = k.fit_support(7)
        assert padded.size == 7
        assert padded.weights[3, 3] == pytest.approx(1 / 9)
        cropped = padded.fit_support(1)
        assert cropped.weights[0, 0] == pytest.approx(1.0)

    def test_srf_rows_sum_to_one(self):
        with pytest.raises(ParameterError):
            SrfMatrix(np.array([[0.5, 0.6, 0.0]]))

    def test_srf_more_outputs_than_inputs_rejected(self):
        with pytest.raises(ShapeError):
            SrfMatrix(np.full((3, 2), 0.5))

    def test_srf_identity(self):
        assert SrfMatrix.identity(4).out_bands == 4


class TestBicubic:

    def test_constant_cube(self):
        up = bicubic_upsample(cube_new(2, 3, 4, 0.3), 4)
        assert up.shape == (2, 12, 16)
        assert np.allclose(up.data, 0.3, atol=1e-12)

    def test_identity_scale(self, small_cube):
        assert np.array_equal(bicubic_upsample(small_cube, 1).data, small_cube.data)

    def test_ramp_matches_direct_evaluation(self):
        ramp = np.arange(16, dtype=np.float64).reshape(1, 4, 4)
        up = bicubic_upsample(HsiCube(ramp), 2)
        assert np.allclose(up.data[0], _direct_bicubic(ramp[0], 2), atol=1e-12)

    def test_invalid_scale(self, small_cube):
        with pytest.raises(ParameterError):
            bicubic_upsample(small_cube, 0)

    @settings(max_examples=25, deadline=None)
    @given(
        alpha=st.floats(-3, 3, allow_nan=False),
        beta=st.floats(-3, 3, allow_nan=False),
        seed=st.integers(0, 2 ** 16),
        s=st.integers(1, 4),
    )
    def test_linearity(self, alpha, beta, seed, s):
        rng = Rng(seed)
        a = HsiCube(rng.uniform(size=(2, 3, 5)))
        b = HsiCube(rng.uniform(size=(2, 3, 5)))
        left = bicubic_upsample(a.scale(alpha) + b.scale(beta), s).data
        right = alpha * bicubic_upsample(a, s).data + beta * bicubic_upsample(b, s).data
        assert np.linalg.norm(left - right) <= 1e-10 * max(1.0, np.linalg.norm(right))


def test_check_divisible():
    check_divisible(8, 12, 4)
    with pytest.raises(ShapeError):
        check_divisible(8, 10, 4)


class TestRng:

    def test_same_seed_same_stream(self):
        assert np.array_equal(Rng(42).uniform(size=10_000), Rng(42).uniform(size=10_000))

    def test_different_seed_differs(self):
        assert not np.array_equal(Rng(1).uniform(size=100), Rng(2).uniform(size=100))

    def test_derived_streams_are_reproducible_and_distinct(self):
        root = Rng(7)
        assert np.array_equal(root.derive(3).normal(size=50), Rng(7).derive(3).normal(size=50))
        assert not np.array_equal(root.derive(3).normal(size=50), root.derive(4).normal(size=50))

    def test_derive_does_not_advance_parent(self):
        a, b = Rng(5), Rng(5)
        a.derive(1).uniform(size=10)
        assert np.array_equal(a.uniform(size=10), b.uniform(size=10))
