import math

import pytest

import lagflow


def test_verify_clifford_passes():
    rep = lagflow.verify("clifford:a=-0.5", grid=16)
    assert rep["pass"] is True
    assert rep["mode"] == "analytic"
    assert rep["residuals"]["lagrangian"]["pass"] is True
    assert rep["residuals"]["soliton"]["value"] <= 1e-10


def test_verify_fd_mode():
    rep = lagflow.verify("cylinder:a=-0.5", grid=16, mode="fd")
    assert rep["mode"] == "fd"
    assert rep["pass"] is True


def test_area_closed_form():
    out = lagflow.area("psi:a=-0.5,m=1,n=1", grid=128)
    assert out["closed_form"] == pytest.approx(4 * math.pi**2, rel=1e-12)
    assert out["rel_error"] <= 1e-10


def test_willmore_has_closed_form():
    out = lagflow.willmore("clifford:a=-0.5", grid=64)
    assert out["quantity"] == "willmore"
    assert out["quadrature"] == pytest.approx(out["closed_form"], rel=1e-8)


def test_classify_band():
    out = lagflow.classify("phi:a=0.25,delta=0.9")
    assert out["branch"] == "band_E_positive"
    assert out["family"] == "phi"
    assert out["a"] == pytest.approx(0.25, abs=1e-6)
    assert out["shape"] == pytest.approx(0.9, abs=1e-6)
    assert out["congruence_residual"] <= 1e-6


def test_flow_short_run_shrinks_area():
    out = lagflow.flow("clifford:a=-0.5", grid=32, dt=1e-3, t_end=0.05)
    assert out["termination"] == "t_end"
    assert out["final"]["area"] < out["initial_area"]
    assert out["final"]["ss_error"] <= 1e-2
    assert len(out["trajectory"]) >= 2


def test_sample_grid_rows():
    out = lagflow.sample("clifford:a=-0.5", grid=8)
    assert out["columns"] == ["s", "t", "x1", "y1", "x2", "y2"]
    assert len(out["points"]) == 64
    # every Clifford point sits on the radius-1 torus |z1| = |z2| = 1
    for row in out["points"]:
        assert math.hypot(row[2], row[3]) == pytest.approx(1.0, abs=1e-12)
        assert math.hypot(row[4], row[5]) == pytest.approx(1.0, abs=1e-12)


def test_bad_spec_raises_value_error():
    with pytest.raises(ValueError):
        lagflow.verify("psi:a=0.5,m=1,n=1")  # psi needs a < 0
    with pytest.raises(ValueError):
        lagflow.verify("clifford:a=-0.5", mode="nope")


def test_bad_resolution_raises_value_error():
    with pytest.raises(ValueError):
        lagflow.flow("clifford:a=-0.5", grid=4)
