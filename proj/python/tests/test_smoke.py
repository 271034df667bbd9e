import math

import numpy as np
import pytest

import lfp


def test_grid_and_coherent_symbol():
    g = lfp.build_grid(64, 2.0, 0.125)
    assert g.n == 64
    assert g.dx * g.dxi * g.n == pytest.approx(2 * math.pi * g.h)
    a = lfp.coherent_symbol(g, 0.0, 0.0)
    assert a.shape == (64, 64)
    assert a.max() == pytest.approx(2.0)


def test_quantize_round_trip():
    g = lfp.build_grid(64, 3.5, 0.125)
    a = lfp.coherent_symbol(g, 0.3, -0.2)
    rho = lfp.quantize(g, a)
    assert rho.dtype == np.complex128
    assert np.trace(rho).real * 2 * math.pi * g.h == pytest.approx(
        a.sum() * g.cell_area, rel=1e-8
    )
    assert lfp.trace_norm(rho) == pytest.approx(1.0, abs=1e-6)
    back = lfp.dequantize(g, rho)
    assert np.abs(back - a).max() <= 1e-8 * np.abs(a).max()


def test_example_widths():
    a, b = lfp.example_widths(1 / 16, 1 / 8, 0.0)
    assert a == pytest.approx(1 / 16)
    assert b == pytest.approx(1 / 16)
    a, b = lfp.example_widths(1 / 16, 1 / 8, 1.0)
    assert a == pytest.approx((1 + math.exp(-2)) / 32, rel=1e-12)
    assert b == pytest.approx((3 * math.exp(2) - 1) / 32, rel=1e-12)


def test_errors_map_to_python():
    with pytest.raises(lfp.ConfigError):
        lfp.build_grid(15, 2.0, 0.125)
    assert issubclass(lfp.ConfigError, ValueError)
    assert issubclass(lfp.BoundaryMassError, lfp.NumericalError)
    bad = lfp.quadratic_example_config(0.125, 1.0, 64, 3.5, 0.1)
    bad["colour"] = "blue"
    with pytest.raises(lfp.ConfigError):
        lfp.validate_config(bad)


def test_run_writes_readable_artifacts(tmp_path):
    config = lfp.quadratic_example_config(0.125, 1.0, 64, 3.5, 0.1)
    config["solver"]["write_operator_snapshots"] = True
    assert isinstance(lfp.validate_config(config), list)
    result = lfp.run(config, tmp_path)
    rows = result["metrics"]
    assert len(rows) == 11
    assert max(r["trace_dist"] for r in rows) <= 1e-3

    on_disk = lfp.read_metrics_csv(str(tmp_path / "metrics.csv"))
    assert [r["t"] for r in on_disk] == [r["t"] for r in rows]

    header, values = lfp.read_snapshot(tmp_path / "snapshots" / "classical_0010.lfps")
    assert header["kind"] == "field"
    assert values.shape == (64, 64)
    header, rho = lfp.read_snapshot(tmp_path / "snapshots" / "operator_0000.lfps")
    assert header["kind"] == "operator"
    assert rho.shape == (64, 64)


def test_oracle_check():
    config = lfp.quadratic_example_config(1 / 16, 1.0, 128, 2.5, 0.5)
    r = lfp.oracle_check(config)
    assert r["width_error"] <= 1e-6
