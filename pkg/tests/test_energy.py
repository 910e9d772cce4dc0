"""Perimeter functionals, the variational objective, and P_sigma."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import ellipe

from mbolab.convolve import convolve, inner_product
from mbolab.energy import (
    adjusted_perimeter,
    anisotropic_perimeter,
    k_perimeter,
    self_interaction,
    variational_objective,
)
from mbolab.errors import PreconditionError, TopologyError
from mbolab.grid import Ball, BinarySetField, Ellipse, GridSpec, HalfSpace, make_shape
from mbolab.kernels import (
    DirectionalDistribution,
    GaussianKernel,
    gaussian_kernel,
    sample_kernel,
    surface_tension_of,
    uniform_angles,
)

SPEC = GridSpec((64, 64), (8.0, 8.0))
SPEC_SMALL = GridSpec((16, 16), (4.0, 4.0))


def _random_mask(spec, seed, fill=0.4):
    rng = np.random.default_rng(seed)
    return BinarySetField(spec, rng.random(spec.dims) < fill)


def test_perimeter_vanishes_without_interface():
    kern = gaussian_kernel(SPEC)
    empty = BinarySetField(SPEC, np.zeros(SPEC.dims, dtype=bool))
    full = BinarySetField(SPEC, np.ones(SPEC.dims, dtype=bool))
    assert k_perimeter(kern, empty) == 0.0
    assert abs(k_perimeter(kern, full)) < 1e-12


def test_self_interaction_of_full_domain_is_its_measure():
    kern = gaussian_kernel(SPEC)
    full = BinarySetField(SPEC, np.ones(SPEC.dims, dtype=bool))
    assert self_interaction(kern, full) == pytest.approx(full.measure, abs=1e-10)


def test_perimeter_equals_mass_weighted_difference_form():
    # P_K(E) = (1/2) sum_z K(z) sum_x |chi_E(x) - chi_E(x - z)| * vol^2,
    # evaluated by brute force on a small grid.
    kern = gaussian_kernel(SPEC_SMALL)
    current = _random_mask(SPEC_SMALL, seed=3, fill=0.5)
    u = current.mask.astype(np.float64)
    total = 0.0
    for i in range(SPEC_SMALL.dims[0]):
        for j in range(SPEC_SMALL.dims[1]):
            shifted = np.roll(np.roll(u, i, axis=0), j, axis=1)
            total += kern.values[i, j] * np.abs(u - shifted).sum()
    brute = 0.5 * total * SPEC_SMALL.cell_volume**2
    value = k_perimeter(kern, current)
    assert abs(value - brute) <= 1e-10 * max(abs(value), 1.0)


def test_perimeter_mass_identity_with_self_interaction():
    kern = gaussian_kernel(SPEC)
    for seed in range(5):
        current = _random_mask(SPEC, seed)
        lhs = k_perimeter(kern, current)
        rhs = kern.mass * current.measure - self_interaction(kern, current)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_reciprocity_of_impact():
    kern = gaussian_kernel(SPEC)
    a = _random_mask(SPEC, seed=11)
    b = _random_mask(SPEC, seed=12)
    ab = inner_product(a, convolve(kern, b))
    ba = inner_product(b, convolve(kern, a))
    assert abs(ab - ba) <= 1e-10 * max(abs(ab), 1.0)


def test_submodularity_on_random_pairs():
    kern = gaussian_kernel(SPEC)
    for seed in range(5):
        a = _random_mask(SPEC, seed=100 + seed)
        b = _random_mask(SPEC, seed=200 + seed)
        lhs = k_perimeter(kern, a.intersection(b)) + k_perimeter(kern, a.union(b))
        rhs = k_perimeter(kern, a) + k_perimeter(kern, b)
        assert lhs <= rhs + 1e-10


def test_interaction_balance_predicts_perimeter_gain():
    # For disjoint E, F: P_K(E u F) + S_K(F) - P_K(E) equals the excess of
    # the complement interaction over the set interaction on F.
    kern = gaussian_kernel(SPEC)
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(100):
        e_mask = rng.random(SPEC.dims) < 0.35
        f_mask = (rng.random(SPEC.dims) < 0.1) & ~e_mask
        current = BinarySetField(SPEC, e_mask)
        extra = BinarySetField(SPEC, f_mask)
        lhs = (
            k_perimeter(kern, current.union(extra))
            + self_interaction(kern, extra)
            - k_perimeter(kern, current)
        )
        conv = convolve(kern, current)
        conv_c = convolve(kern, current.complement())
        rhs = inner_product(extra, conv_c) - inner_product(extra, conv)
        assert abs(lhs - rhs) <= 1e-9
        if abs(rhs) > 1e-9:
            assert (lhs >= 0) == (rhs >= 0)
            checked += 1
    assert checked > 50


def test_adjusted_perimeter_increases_toward_tension_limit():
    spec = GridSpec((128, 128), (8.0, 8.0))
    ball = make_shape(spec, Ball((4.0, 4.0), 1.0))
    limit = 2.0 * math.pi * 1.0 / math.sqrt(math.pi)
    values = [adjusted_perimeter(GaussianKernel(), h, ball) for h in (0.25, 0.125, 0.0625)]
    assert values[0] < values[1] < values[2] < limit


def test_adjusted_perimeter_rejects_mismatched_h():
    kern = sample_kernel(GaussianKernel(), SPEC, 0.5)
    ball = make_shape(SPEC, Ball((4.0, 4.0), 1.0))
    with pytest.raises(PreconditionError):
        adjusted_perimeter(kern, 0.25, ball)


def test_variational_forms_agree_and_reduce_at_fixed_set():
    spec = GridSpec((128, 128), (0.9, 0.9))
    h = 1e-3
    kern = sample_kernel(GaussianKernel(), spec, h)
    prev = make_shape(spec, Ball((0.45, 0.45), 0.12))
    cand = make_shape(spec, Ball((0.45, 0.45), 0.10))
    value = variational_objective(kern, h, prev, cand)
    assert value.full == pytest.approx(value.reduced, abs=1e-10)
    assert value.full == pytest.approx(
        value.perimeter_term + value.movement_term, abs=1e-12
    )
    at_prev = variational_objective(kern, h, prev, prev)
    assert at_prev.movement_term == 0.0
    assert at_prev.full == pytest.approx(at_prev.perimeter_term, abs=1e-12)


def test_anisotropic_perimeter_isotropic_ball():
    sigma = surface_tension_of(GaussianKernel(), n_theta=720)
    value = anisotropic_perimeter(sigma, Ball((4.0, 4.0), 1.5))
    assert value == pytest.approx(2.0 * math.pi * 1.5 / math.sqrt(math.pi), abs=1e-6)
    constant = anisotropic_perimeter(1.0 / math.sqrt(math.pi), Ball((4.0, 4.0), 1.5))
    assert constant == pytest.approx(2.0 * math.pi * 1.5 / math.sqrt(math.pi), abs=1e-12)


def test_anisotropic_perimeter_sphere():
    value = anisotropic_perimeter(1.0 / math.sqrt(math.pi), Ball((0.0, 0.0, 0.0), 2.0))
    assert value == pytest.approx(16.0 * math.pi / math.sqrt(math.pi), abs=1e-12)


def test_anisotropic_perimeter_ellipse_isotropic():
    value = anisotropic_perimeter(1.0, Ellipse((4.0, 4.0), (2.0, 1.0)))
    exact = 4.0 * 2.0 * ellipe(1.0 - 0.25)
    assert value == pytest.approx(exact, abs=1e-8)


def test_anisotropic_perimeter_two_fold_profile_on_ball():
    # sigma = a + b cos(2 theta) integrates to 2 pi a R on a circle.
    ang = uniform_angles(720)
    sigma = DirectionalDistribution(1.1 + 0.3 * np.cos(2 * ang), angles=ang)
    value = anisotropic_perimeter(sigma, Ball((0.0, 0.0), 0.7))
    assert value == pytest.approx(2.0 * math.pi * 1.1 * 0.7, abs=1e-6)


def test_mask_perimeter_square_matches_side_count():
    mask = np.zeros(SPEC.dims, dtype=bool)
    mask[16:48, 16:48] = True
    value = anisotropic_perimeter(1.0, BinarySetField(SPEC, mask), presmooth_cells=0.0)
    assert abs(value - 16.0) <= 4.0 * SPEC.max_spacing


def test_mask_perimeter_ball_close_to_analytic():
    ball = Ball((4.0, 4.0), 1.5)
    sigma = surface_tension_of(GaussianKernel(), n_theta=720)
    analytic = anisotropic_perimeter(sigma, ball)
    mask = make_shape(SPEC, ball)
    tolerance = 2.0 * SPEC.max_spacing / 1.5 * analytic
    assert abs(anisotropic_perimeter(sigma, mask) - analytic) <= tolerance
    assert (
        abs(anisotropic_perimeter(sigma, mask, presmooth_cells=0.0) - analytic)
        <= tolerance
    )


def test_mask_perimeter_requires_closed_contours():
    band = make_shape(SPEC, HalfSpace(0, 4.0))
    with pytest.raises(TopologyError):
        anisotropic_perimeter(1.0, band)


def test_mask_perimeter_rejects_3d():
    spec = GridSpec((8, 8, 8), (2.0, 2.0, 2.0))
    mask = BinarySetField(spec, np.ones(spec.dims, dtype=bool))
    with pytest.raises(PreconditionError):
        anisotropic_perimeter(1.0, mask)


def test_mask_perimeter_of_empty_set_is_zero():
    empty = BinarySetField(SPEC, np.zeros(SPEC.dims, dtype=bool))
    assert anisotropic_perimeter(1.0, empty) == 0.0


def test_shape_perimeter_without_parametrization_rejected():
    from mbolab.grid import Dumbbell

    shape = Dumbbell((2.0, 4.0), (6.0, 4.0), 1.0, 0.4)
    with pytest.raises(PreconditionError):
        anisotropic_perimeter(1.0, shape)
