"""Experiment drivers: rate fits, the displacement instrument, and suites."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import ncx2

from mbolab.analysis import (
    _coverage,
    _instrument_field,
    _measure_crossings,
    _refined,
    arrival_time_lipschitz,
    backward_consistency_experiment,
    consistency_experiment,
    contraction_suite,
    energy_convergence_experiment,
    fattening_diagnostics,
    rate_fit,
    write_report,
)
from mbolab.errors import ConfigurationError, PreconditionError
from mbolab.grid import Ball, Dumbbell, Ellipse, GridSpec, HalfSpace, make_shape
from mbolab.kernels import (
    DirectionalDistribution,
    GaussianKernel,
    construct_kernel,
    sample_kernel,
    special_kernels,
    uniform_angles,
)
from mbolab.scheme import evolve

QUICK_SPEC = GridSpec((256, 256), (0.9, 0.9))
BALL = Ball((0.45, 0.45), 0.25)
QUICK_H = [8e-4, 4e-4, 2e-4]


# --- rate_fit ----------------------------------------------------------------


def test_rate_fit_recovers_linear_rate_exactly():
    fit = rate_fit([(h, h) for h in (0.1, 0.05, 0.025, 0.0125)])
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.dropped == 0


def test_rate_fit_recovers_three_halves_rate():
    fit = rate_fit([(h, h**1.5) for h in (0.1, 0.05, 0.025)])
    assert fit.slope == pytest.approx(1.5, abs=1e-9)


def test_rate_fit_quadratic_with_noise_lands_near_two():
    rng = np.random.default_rng(3)
    pairs = [
        (h, 3.0 * h**2 * (1.0 + 0.01 * rng.uniform(-1.0, 1.0)))
        for h in (0.2, 0.1, 0.05, 0.025, 0.0125)
    ]
    fit = rate_fit(pairs)
    assert 1.9 <= fit.slope <= 2.1


def test_rate_fit_drops_nonpositive_with_warning():
    with pytest.warns(UserWarning, match="dropped 1 nonpositive"):
        fit = rate_fit([(0.1, 0.1), (0.05, 0.05), (0.025, 0.025), (0.0125, 0.0)])
    assert fit.dropped == 1
    assert fit.slope == pytest.approx(1.0, abs=1e-12)


def test_rate_fit_needs_three_valid_pairs():
    with pytest.warns(UserWarning):
        with pytest.raises(PreconditionError, match="at least 3"):
            rate_fit([(0.1, 0.1), (0.05, 0.0), (0.025, -1.0)])


# --- exact coverage fractions ------------------------------------------------


def test_disk_coverage_total_matches_area():
    cov = _coverage(BALL, QUICK_SPEC)
    total = cov.sum() * QUICK_SPEC.cell_volume
    assert total == pytest.approx(math.pi * 0.25**2, abs=1e-12)
    assert cov.min() >= 0.0 and cov.max() <= 1.0 + 1e-12


def test_disk_coverage_matches_supersampling_on_boundary_cells():
    cov = _coverage(BALL, QUICK_SPEC)
    partial = np.argwhere((cov > 0.01) & (cov < 0.99))
    rng = np.random.default_rng(0)
    n = 801
    for i, j in partial[rng.choice(len(partial), 4, replace=False)]:
        xs = (i + (np.arange(n) + 0.5) / n) * QUICK_SPEC.spacing[0] - 0.45
        ys = (j + (np.arange(n) + 0.5) / n) * QUICK_SPEC.spacing[1] - 0.45
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        fraction = np.mean(xx**2 + yy**2 < 0.25**2)
        assert cov[i, j] == pytest.approx(fraction, abs=5e-6)


def test_ellipse_coverage_total_matches_area():
    shape = Ellipse((0.45, 0.45), (0.25, 0.15))
    cov = _coverage(shape, QUICK_SPEC)
    assert cov.sum() * QUICK_SPEC.cell_volume == pytest.approx(
        math.pi * 0.25 * 0.15, abs=1e-12
    )


def test_half_space_coverage_is_linear_ramp():
    shape = HalfSpace(axis=0, threshold=0.45)
    cov = _coverage(shape, QUICK_SPEC)
    assert cov.sum() * QUICK_SPEC.cell_volume == pytest.approx(0.45 * 0.9, abs=1e-12)
    assert np.all(cov[:, 0] == cov[:, -1])


def test_coverage_rejects_shapes_without_a_rule():
    with pytest.raises(PreconditionError, match="coverage"):
        _coverage(Dumbbell((0.3, 0.45), (0.6, 0.45), 0.1, 0.03), QUICK_SPEC)


# --- the crossing instrument against the exact Gaussian-disk field -----------


def test_instrument_matches_exact_gaussian_disk_crossing():
    # For the h-scaled Gaussian on a disk of radius R the convolution value
    # along a radial ray has an exact noncentral-chi-square form; the 1/2
    # crossing is the root in z of  P[chi2'_2((R+z)^2/2h) <= R^2/2h] = 1/2.
    h = 4e-4
    radius = 0.25
    fine = _refined(QUICK_SPEC, 2)
    coverage = _coverage(BALL, fine)
    kernel = sample_kernel(GaussianKernel(), fine, h)
    field = _instrument_field(kernel, coverage)
    probes = BALL.boundary_probes(64)
    result = _measure_crossings(
        field, fine, probes.points, probes.normals, level=0.5,
        window=4.0 * QUICK_SPEC.max_spacing,
    )
    assert not result.no_crossing.any()
    z_exact = brentq(
        lambda z: ncx2.cdf(radius**2 / (2 * h), df=2, nc=(radius + z) ** 2 / (2 * h))
        - 0.5,
        -10 * h / radius,
        2 * h / radius,
        xtol=1e-16,
    )
    assert np.abs(result.z - z_exact).max() < 1e-6


# --- consistency experiments --------------------------------------------------


def test_consistency_gaussian_ball_first_order_rate():
    report = consistency_experiment(
        GaussianKernel(), BALL, QUICK_H, spec=QUICK_SPEC, instrument_refine=2
    )
    assert report.velocity_fit.slope >= 0.8
    assert report.fit.slope == pytest.approx(report.velocity_fit.slope + 1.0, abs=1e-9)
    # mean normal velocity approaches -1/R
    assert abs(report.rows[-1].mean_z_over_h + 1.0 / 0.25) < 0.05 / 0.25
    assert all(row.no_crossing == 0 for row in report.rows)
    residuals = [row.velocity_residual for row in report.rows]
    assert residuals == sorted(residuals, reverse=True)


def test_consistency_gaussian_ellipse_rate():
    shape = Ellipse((0.45, 0.45), (0.25, 0.15))
    report = consistency_experiment(
        GaussianKernel(), shape, QUICK_H, spec=QUICK_SPEC, instrument_refine=2
    )
    assert report.velocity_fit.slope >= 0.8
    assert report.rows[-1].velocity_residual < report.rows[0].velocity_residual


def test_consistency_constructed_kernel_prediction_tracks_measurement():
    angles = uniform_angles(256)
    tension = DirectionalDistribution(1.0 + 0.3 * np.cos(2.0 * angles), angles=angles)
    mobility = DirectionalDistribution(np.ones(256), angles=angles)
    descriptor = construct_kernel(tension, mobility).normalized()
    exclusion = (
        math.sqrt(0.25 * QUICK_SPEC.max_spacing) + 2.0 * math.sqrt(2.0 * min(QUICK_H))
    ) / 0.25
    report = consistency_experiment(
        descriptor, BALL, QUICK_H, spec=QUICK_SPEC,
        instrument_refine=2, axis_exclusion=exclusion,
    )
    assert report.velocity_fit.slope >= 0.8
    # the finest-h residual must be small against the curvature scale itself
    assert report.rows[-1].velocity_residual < 0.05 * (1.0 / 0.25)


def test_consistency_rejects_increasing_h_list():
    with pytest.raises(PreconditionError, match="decreasing"):
        consistency_experiment(GaussianKernel(), BALL, [2e-4, 4e-4], spec=QUICK_SPEC)


def test_consistency_rejects_unresolvable_h():
    with pytest.raises(PreconditionError, match="resolvability floor"):
        consistency_experiment(
            GaussianKernel(), BALL, [8e-4, 4e-4, 1e-5], spec=QUICK_SPEC
        )


def test_consistency_rejects_too_few_probes():
    with pytest.raises(PreconditionError, match="64"):
        consistency_experiment(
            GaussianKernel(), BALL, QUICK_H, spec=QUICK_SPEC, n_probes=32
        )


def test_consistency_rejects_sampled_kernel():
    sampled = sample_kernel(GaussianKernel(), QUICK_SPEC, 4e-4)
    with pytest.raises(PreconditionError, match="descriptor"):
        consistency_experiment(sampled, BALL, QUICK_H, spec=QUICK_SPEC)


# --- backward kernel ----------------------------------------------------------


def test_backward_kernel_expands_ball_and_fixes_flat_interface():
    report = backward_consistency_experiment(
        QUICK_H, spec=QUICK_SPEC, instrument_refine=2
    )
    assert all(f >= 0.95 for f in report.outward_fractions)
    assert all(v <= 0.5 * QUICK_SPEC.max_spacing for v in report.flat_max_abs_z)
    assert report.non_contracting  # informational: the step grows the ball
    metrics = {m.metric for m in report.measurements}
    assert {"outward_fraction", "flat_max_abs_z", "non_contracting"} <= metrics


# --- energy convergence ---------------------------------------------------------


def test_energy_convergence_gaussian_ball_closed_form():
    report = energy_convergence_experiment(
        GaussianKernel(), BALL, [4e-4, 2e-4], spec=QUICK_SPEC
    )
    assert report.reference_kind == "closed_form"
    # I* = 2 pi R^3 / (3 mu) with mu measured from the kernel; Gaussian mu = sqrt(pi)
    assert report.reference == pytest.approx(
        2.0 * math.sqrt(math.pi) / 3.0 * 0.25**3, rel=1e-4
    )
    for row in report.rows:
        assert row.extinct and row.valid
        assert row.rel_error < 0.05
        assert row.sigma_bound_ok and row.sigma_bound_margin > 0.0
        assert row.monotone_ok
        assert row.upper_bound_ok
        assert abs(row.extinction_time - 0.25**2 / 2.0) <= 10.0 * row.h
    assert len(report.records) == 2
    assert report.records[0].masks is None  # slimmed after the P_sigma scan


def test_energy_convergence_non_ball_uses_finest_run_reference():
    shape = Ellipse((0.45, 0.45), (0.22, 0.16))
    report = energy_convergence_experiment(
        GaussianKernel(), shape, [4e-4, 2e-4], spec=QUICK_SPEC
    )
    assert report.reference_kind == "finest_run"
    assert report.reference == report.rows[-1].energy_integral
    assert report.rows[-1].rel_error == 0.0


# --- contraction suite ----------------------------------------------------------


def test_contraction_suite_gaussian_ball_all_invariants():
    spec = GridSpec((128, 128), (0.9, 0.9))
    report = contraction_suite(
        GaussianKernel(), Ball((0.45, 0.45), 0.15), 8e-4, spec=spec,
        seed=11, n_outward=40, n_pairs=4000,
    )
    assert report.passed
    assert report.contracted
    assert report.outward_checked == 40
    assert report.min_outward_margin >= -1e-9
    assert report.lipschitz_violations == 0
    assert report.predicate_disagreements == 0
    assert all(c == 1 for c in report.component_counts[:-1])
    assert report.component_counts[-1] == 0


def test_contraction_suite_dumbbell_neck_pinches():
    # Neck pinching is a 3D phenomenon: a rotationally symmetric neck has
    # positive mean curvature 1/w and collapses, while in 2D flat neck sides
    # are stationary and embedded curves shrink to round points instead.
    spec = GridSpec((64, 64, 64), (0.9, 0.9, 0.9))
    shape = Dumbbell((0.26, 0.45, 0.45), (0.64, 0.45, 0.45), 0.12, 0.06)
    report = contraction_suite(
        special_kernels("box"), shape, 3.2e-3, spec=spec,
        seed=5, n_outward=10, n_pairs=1000,
    )
    counts = report.component_counts
    assert counts[0] == 1
    assert any(c >= 2 for c in counts)  # the neck pinched into two lobes
    assert counts[-1] == 0  # and both lobes went extinct
    assert report.contracted  # mean-convex start: every step stays nested
    pinch = [m for m in report.measurements if m.metric == "neck_pinch"]
    assert pinch and pinch[0].passed


def test_arrival_lipschitz_certifies_bound_for_sub_cell_steps():
    # A box-kernel ball moves well under one cell per step, so per-step
    # clearances saturate at the cell size and overstate the front speed
    # (s/h here).  The level-window measurement must certify the bound with
    # zero violations and report a speed below that saturated estimate.
    spec = GridSpec((128, 128), (0.9, 0.9))
    kernel = sample_kernel(special_kernels("box"), spec, 8e-4)
    shape = Ball((0.45, 0.45), 0.2)
    record = evolve(kernel, make_shape(spec, shape), shape=shape, keep_masks=True)
    check = arrival_time_lipschitz(record, n_pairs=5000, seed=3)
    assert check.checked
    assert check.violations == 0
    assert 0.0 < check.speed < 0.5 * spec.spacing[0] / record.h


def test_arrival_lipschitz_requires_masks():
    spec = GridSpec((128, 128), (0.9, 0.9))
    kernel = sample_kernel(special_kernels("box"), spec, 8e-4)
    shape = Ball((0.45, 0.45), 0.2)
    record = evolve(kernel, make_shape(spec, shape), shape=shape)
    with pytest.raises(PreconditionError, match="masks"):
        arrival_time_lipschitz(record)


def test_contraction_suite_reports_witness_for_non_contracting_start():
    # A 2D dumbbell's concave neck junctions push outward, so the first step
    # grows; the suite must report the failing outward perturbation (the
    # grown region violating the outward-minimality inequality) not raise.
    spec = GridSpec((128, 128), (0.9, 0.9))
    shape = Dumbbell((0.32, 0.45), (0.58, 0.45), 0.09, 0.025)
    report = contraction_suite(
        special_kernels("box"), shape, 8e-4, spec=spec,
        seed=5, n_outward=10, n_pairs=1000,
    )
    assert not report.contracted
    assert report.witness_found
    witness = [m for m in report.measurements if m.metric == "witness_margin"]
    assert witness and witness[0].value < -1e-9
    nested = [m for m in report.measurements if m.metric == "nested"]
    assert nested[0].passed is False  # reported, not raised


def test_contraction_suite_rejects_negative_kernels():
    spec = GridSpec((128, 128), (0.9, 0.9))
    backward = sample_kernel(special_kernels("backward_three_hat"), spec, 8e-4)
    with pytest.raises(PreconditionError, match="nonnegative"):
        contraction_suite(backward, Ball((0.45, 0.45), 0.15))


def test_contraction_suite_same_seed_is_deterministic():
    spec = GridSpec((128, 128), (0.9, 0.9))
    kwargs = dict(spec=spec, seed=3, n_outward=10, n_pairs=500)
    a = contraction_suite(GaussianKernel(), Ball((0.45, 0.45), 0.15), 8e-4, **kwargs)
    b = contraction_suite(GaussianKernel(), Ball((0.45, 0.45), 0.15), 8e-4, **kwargs)
    assert a.min_outward_margin == b.min_outward_margin
    assert a.measurements == b.measurements


# --- fattening ------------------------------------------------------------------


def test_fattening_stripes_half_level_set_fills_domain():
    report = fattening_diagnostics("stripes")
    assert report.fat_fraction == 1.0
    assert report.forward_empty and report.complement_empty
    assert report.step_matches_minimal
    assert report.passed


def test_fattening_smooth_plateau_has_fat_disc():
    report = fattening_diagnostics("smooth_plateau")
    assert report.fat_measure > 0.0
    assert report.fat_fraction >= report.required_fraction > 0.0
    assert report.maximal_measure - report.minimal_measure == pytest.approx(
        report.fat_measure, abs=1e-12
    )
    assert report.passed


def test_fattening_disc_plateau_has_fat_slab():
    report = fattening_diagnostics("disc_plateau")
    assert report.fat_measure > 0.0
    assert report.fat_fraction >= report.required_fraction > 0.0
    assert report.passed


def test_fattening_rejects_unknown_name():
    with pytest.raises(ConfigurationError, match="valid"):
        fattening_diagnostics("vortex")


# --- report files ----------------------------------------------------------------


def test_write_report_round_trips_csv_and_json(tmp_path):
    report = fattening_diagnostics("stripes")
    csv_path, json_path = write_report(report, tmp_path)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "experiment,kernel,shape,h,metric,value,pass"
    assert len(lines) == 1 + len(report.measurements)
    first = lines[1].split(",")
    assert first[0] == "stripes"
    assert float(first[5]) == report.measurements[0].value
    entries = json.loads(json_path.read_text())
    assert len(entries) == len(report.measurements)
    assert entries[0]["metric"] == report.measurements[0].metric
    assert all(set(e) == {"experiment", "kernel", "shape", "h", "metric", "value", "pass"} for e in entries)


def test_write_report_is_deterministic(tmp_path):
    report = fattening_diagnostics("disc_plateau")
    a, _ = write_report(report, tmp_path / "one")
    b, _ = write_report(report, tmp_path / "two")
    assert a.read_bytes() == b.read_bytes()
