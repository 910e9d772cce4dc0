"""Config parsing, experiment dispatch, artifacts, and exit codes."""

from __future__ import annotations

import math

import numpy as np
import pytest

from mbolab.cli import ExperimentConfig, main, parse_config, run
from mbolab.errors import ConfigurationError
from mbolab.grid import Ball, read_mbof
from mbolab.kernels import minimal_resolvable_h, surface_tension_of, uniform_angles

MINIMAL = """
# shrinking ball, defaults everywhere else
domain.dims = 256, 256
domain.extent = 0.5, 0.5
kernel.kind = gaussian
shape.kind = ball
shape.center = 0.25, 0.25
shape.radius = 0.12
time.h = 1e-4
experiment.name = evolve
"""

EVOLVE_QUICK = """
domain.dims = 128, 128
domain.extent = 0.9, 0.9
kernel.kind = box
shape.kind = ball
shape.center = 0.45, 0.45
shape.radius = 0.2
time.h = 8e-4
experiment.name = evolve
"""


# --- parsing -----------------------------------------------------------------


def test_minimal_config_parses_and_builds_objects():
    config = parse_config(MINIMAL)
    assert config.experiment == "evolve"
    assert config.spec.dims == (256, 256)
    assert config.spec.extent == (0.5, 0.5)
    assert config.kernel.kind == "gaussian"
    assert isinstance(config.shape, Ball)
    assert config.shape.radius == 0.12
    assert config.h == 1e-4
    assert config.h_list is None
    assert config.max_steps == 10_000
    assert config.seed == 0
    assert config.output_dir == "out"


def test_unknown_kernel_kind_names_line_and_valid_set():
    text = MINIMAL.replace("kernel.kind = gaussian", "kernel.kind = bogus")
    with pytest.raises(ConfigurationError) as err:
        parse_config(text)
    message = str(err.value)
    line = next(
        i for i, raw in enumerate(text.splitlines(), start=1) if "bogus" in raw
    )
    assert f"line {line}:" in message
    assert "'bogus'" in message
    for valid in ("gaussian", "box", "backward_three_hat", "constructed"):
        assert valid in message


def test_h_below_resolvability_floor_cites_formula():
    text = MINIMAL.replace("time.h = 1e-4", "time.h = 1e-6")
    with pytest.raises(ConfigurationError) as err:
        parse_config(text)
    message = str(err.value)
    assert "(4*max_spacing)^2" in message
    from mbolab.grid import GridSpec

    floor = minimal_resolvable_h(GridSpec((256, 256), (0.5, 0.5)))
    assert repr(floor) in message or str(floor) in message


def test_all_errors_reported_with_line_numbers():
    text = """
domain.dims = 128, 128
domain.extent = 0.9
kernel.kind = bogus
shape.kind = ball
shape.center = 0.45, 0.45
shape.radius = not_a_number
experiment.name = evolve
mystery.key = 3
shape.center = 0.1, 0.1
"""
    with pytest.raises(ConfigurationError) as err:
        parse_config(text)
    lines = str(err.value).splitlines()
    assert len(lines) >= 5
    assert any(l.startswith("line 3:") and "extent" in l for l in lines)
    assert any(l.startswith("line 4:") and "bogus" in l for l in lines)
    assert any(l.startswith("line 7:") and "not_a_number" in l for l in lines)
    assert any(l.startswith("line 9:") and "mystery.key" in l for l in lines)
    assert any(l.startswith("line 10:") and "duplicate" in l for l in lines)


def test_h_and_h_list_are_mutually_exclusive():
    text = MINIMAL + "time.h_list = 4e-4, 2e-4, 1e-4\n"
    with pytest.raises(ConfigurationError, match="not both"):
        parse_config(text)


def test_h_list_must_strictly_decrease():
    text = MINIMAL.replace("time.h = 1e-4", "time.h_list = 2e-4, 4e-4, 8e-4").replace(
        "experiment.name = evolve", "experiment.name = consistency"
    )
    with pytest.raises(ConfigurationError, match="strictly decreasing"):
        parse_config(text)


def test_consistency_requires_three_h_values():
    text = MINIMAL.replace("time.h = 1e-4", "time.h_list = 4e-4, 2e-4").replace(
        "experiment.name = evolve", "experiment.name = consistency"
    )
    with pytest.raises(ConfigurationError, match="at least 3"):
        parse_config(text)


def test_shape_parameter_mismatch_is_an_error():
    text = MINIMAL.replace("shape.radius = 0.12", "shape.period = 0.45")
    with pytest.raises(ConfigurationError) as err:
        parse_config(text)
    message = str(err.value)
    assert "shape.period" in message and "'ball'" in message


def test_unknown_experiment_and_fattening_names_rejected():
    with pytest.raises(ConfigurationError, match="valid"):
        parse_config("experiment.name = frobnicate\n")
    with pytest.raises(ConfigurationError, match="disc_plateau"):
        parse_config(
            "experiment.name = fattening\nfattening.name = wiggle\n"
        )


def test_constructed_kernel_builds_unit_mass_descriptor():
    text = (
        MINIMAL.replace("kernel.kind = gaussian", "kernel.kind = constructed")
        + "kernel.tension = 1.0, 1.1, 1.3, 1.1, 1.0, 0.9, 0.7, 0.9\n"
        + "kernel.mobility = 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0\n"
    )
    config = parse_config(text)
    assert config.kernel.kind == "constructed"
    sigma = surface_tension_of(config.kernel)
    assert np.all(np.asarray(sigma.values) > 0.0)


def test_tolerance_overrides_are_collected():
    config = parse_config(MINIMAL + "tolerances.min_slope = 0.9\n")
    assert config.tolerance("min_slope", 0.8) == 0.9
    assert config.tolerance("rel_error", 0.10) == 0.10


# --- running -----------------------------------------------------------------


def _write(tmp_path, text):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return path


def test_evolve_writes_steps_and_arrival_and_exits_zero(tmp_path, capsys):
    out = tmp_path / "run"
    code = run(parse_config(EVOLVE_QUICK), output_dir=str(out))
    captured = capsys.readouterr().out
    assert code == 0
    assert "PASS extinct" in captured
    assert "PASS nested" in captured
    assert "PASS energy_descent" in captured

    rows = (out / "steps.csv").read_text().splitlines()
    header, body = rows[0], rows[1:]
    assert header == "k,t,measure,P_Kh,S_diff,shrink_dist,ties,contracting"
    n_steps = int(body[-1].split(",")[0])
    assert len(body) == n_steps + 1
    assert float(body[-1].split(",")[2]) == 0.0  # terminal row has no measure

    arrival = read_mbof(out / "arrival_time.mbof")
    assert arrival.spec.dims == (128, 128)
    assert math.isclose(
        float(arrival.values.max()), float(body[-1].split(",")[1]), rel_tol=1e-12
    )


def test_run_is_byte_deterministic(tmp_path):
    text = EVOLVE_QUICK.replace(
        "experiment.name = evolve", "experiment.name = contraction_suite"
    )
    config = parse_config(text)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(config, output_dir=str(a), seed=5, quiet=True) == 0
    assert run(config, output_dir=str(b), seed=5, quiet=True) == 0
    for name in ("steps.csv", "contraction_suite.csv", "contraction_suite_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_fattening_stripes_passes_and_writes_report(tmp_path, capsys):
    config = parse_config(
        "experiment.name = fattening\nfattening.name = stripes\n"
    )
    code = run(config, output_dir=str(tmp_path / "fat"))
    captured = capsys.readouterr().out
    assert code == 0
    assert "PASS fat_fraction" in captured
    assert "PASS forward_step_empty" in captured
    report = (tmp_path / "fat" / "stripes.csv").read_text().splitlines()
    assert report[0] == "experiment,kernel,shape,h,metric,value,pass"
    assert len(report) > 1


def test_kernel_design_roundtrip_from_sigma_file(tmp_path, capsys):
    angles = uniform_angles(64)
    sigma = 1.0 + 0.3 * np.cos(2.0 * angles)
    sigma_file = tmp_path / "sigma.txt"
    sigma_file.write_text(
        "# two-fold target profile\n"
        + "\n".join(repr(float(v)) for v in sigma)
        + "\n"
    )
    config = parse_config(
        "domain.dims = 128, 128\n"
        "domain.extent = 8.0, 8.0\n"
        "experiment.name = kernel_design\n"
        f"design.sigma_file = {sigma_file}\n"
        "design.n_basis = 64\n"
    )
    out = tmp_path / "design"
    code = run(config, output_dir=str(out))
    captured = capsys.readouterr().out
    assert code == 0
    assert "PASS fit_residual" in captured
    assert "PASS sigma_roundtrip" in captured

    dump = read_mbof(out / "kernel.mbof")
    assert dump.spec.dims == (128, 128)
    assert math.isclose(
        float(dump.values.sum()) * dump.spec.cell_volume, 1.0, rel_tol=1e-12
    )
    table = (out / "design_tables.csv").read_text().splitlines()
    assert table[0] == "angle,sigma_target,sigma_recovered,inverse_mobility"
    assert len(table) == 65
    first = [float(x) for x in table[1].split(",")]
    assert math.isclose(first[1], 1.3, rel_tol=1e-12)
    assert abs(first[2] - first[1]) < 0.02


def test_exit_codes_for_each_failure_class(tmp_path, capsys):
    # configuration error -> 2
    bad = _write(tmp_path, "experiment.name = evolve\n")
    assert main(["run", str(bad)]) == 2
    assert "configuration errors" in capsys.readouterr().err

    # missing config file -> 2
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    capsys.readouterr()

    # runtime error (guard band violation) -> 3
    guard = _write(
        tmp_path,
        EVOLVE_QUICK.replace("kernel.kind = box", "kernel.kind = gaussian").replace(
            "shape.radius = 0.2", "shape.radius = 0.35"
        ),
    )
    assert main(["run", str(guard), "--output-dir", str(tmp_path / "g")]) == 3
    assert "error:" in capsys.readouterr().err

    # assertion failure -> 1 (roundtrip tolerance impossible to meet)
    two_fold = ", ".join(
        repr(float(1.0 + 0.3 * np.cos(2.0 * a))) for a in uniform_angles(8)
    )
    failing = _write(
        tmp_path,
        "domain.dims = 64, 64\n"
        "domain.extent = 8.0, 8.0\n"
        "experiment.name = kernel_design\n"
        f"design.sigma = {two_fold}\n"
        "tolerances.sigma_error = 1e-12\n",
    )
    assert main(["run", str(failing), "--output-dir", str(tmp_path / "f")]) == 1
    assert "FAIL sigma_roundtrip" in capsys.readouterr().out


def test_main_runs_evolve_end_to_end(tmp_path, capsys):
    cfg = _write(tmp_path, EVOLVE_QUICK)
    out = tmp_path / "cli_out"
    code = main(["run", str(cfg), "--output-dir", str(out), "--quiet"])
    captured = capsys.readouterr().out
    assert code == 0
    assert "INFO" not in captured
    assert "PASS extinct" in captured
    assert (out / "steps.csv").exists()
    assert (out / "arrival_time.mbof").exists()


def test_seed_flag_overrides_config_seed(tmp_path):
    text = EVOLVE_QUICK.replace(
        "experiment.name = evolve", "experiment.name = contraction_suite"
    )
    config = parse_config(text)
    assert config.seed == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(config, output_dir=str(a), seed=1, quiet=True) == 0
    assert run(config, output_dir=str(b), seed=2, quiet=True) == 0
    # seeded outward perturbations differ, so the reports differ
    assert (a / "contraction_suite.csv").read_text() != (
        b / "contraction_suite.csv"
    ).read_text()


def test_run_rejects_unwritable_output_dir(tmp_path, capsys):
    blocker = tmp_path / "blocked"
    blocker.write_text("a file, not a directory")
    config = parse_config(EVOLVE_QUICK)
    assert run(config, output_dir=str(blocker / "sub")) == 2
    assert "output directory" in capsys.readouterr().err
