"""Smoke tests for the python bindings."""

import json
import math

import _fermirg as fr


def test_norm_series_arithmetic():
    shape = fr.TruncationShape(2, 1)
    one = fr.NormSeries(shape, 1.0)
    c1 = fr.ns_cj(1, 2.0, shape)
    prod = c1 * one
    assert prod.get(1, 1, 0) == c1.get(1, 1, 0) == 4.0
    assert one.leq(c1)
    # infinite coefficients survive the json round trip
    x = fr.NormSeries(shape)
    x.set(1, 0, 0, None)
    back = fr.NormSeries.from_json(x.to_json())
    assert back.get(1, 0, 0) is None


def test_geometry_and_sectors():
    disp = fr.Dispersion.builtin("circle")
    curve = fr.FermiCurve.trace(disp, 512)
    assert abs(curve.length() - 2 * math.pi) < 1e-3

    sp = fr.ScaleParams()
    sp.M = 2.0
    sp.aleph = 0.6
    sec = fr.Sectorization.build(3, curve, sp)
    l = sp.sector_length(3)
    assert sec.size() <= 2 * curve.length() / l
    assert l / 16 <= sec.overlap() <= l / 8
    cov = sec.covering(0.3 * curve.length())
    assert 1 <= len(cov) <= 2


def test_gaussian_integral_matches_single_pairing():
    shape = fr.AlgebraShape(0, 2)
    c = fr.Pairing.zero(2)
    c.set(0, 1, 0.25 - 0.5j)
    mono = fr.GrassmannFunction(shape)
    mono.set((1 << shape.zeta(0)) | (1 << shape.zeta(1)), 1.0)
    out = fr.gaussian_integral_zeta(mono, c)
    assert abs(out.get(0) - (0.25 - 0.5j)) < 1e-14


def test_wick_inversion():
    shape = fr.AlgebraShape(0, 3)
    c = fr.Pairing.zero(3)
    c.set(0, 1, 0.3 + 0.1j)
    c.set(1, 2, -0.2 + 0.05j)
    w = fr.GrassmannFunction(shape)
    w.set((1 << shape.psi(0)) | (1 << shape.psi(1)), 0.7)
    back = fr.wick_order(fr.gaussian_convolve(w, c), c)
    diff = max(
        abs(back.get(m) - w.get(m)) for m in range(2 ** (shape.n_phi + 2 * shape.n_psi))
    )
    assert diff < 1e-13


def test_config_validation():
    report = json.loads(fr.validate_config(""))
    assert report["accepted"]
    bad = json.loads(fr.default_config())
    bad["scales"]["aleph"] = 0.7
    report = json.loads(fr.validate_config(json.dumps(bad)))
    assert not report["accepted"]


def test_zero_interaction_flow():
    cfg = json.loads(fr.default_config())
    cfg["coupling"] = 0.0
    cfg["jmax"] = 4
    summary = json.loads(fr.flow_summary(json.dumps(cfg)))
    assert summary["composition_residual"] <= 1e-12
    assert all(d == 0.0 for d in summary["cauchy_differences"])
    assert all(f["converged"] for f in summary["fixpoints"][:-1])
