import numpy as np
import pytest

import rstensor as rt

SQRT3 = np.sqrt(3.0)


def _field(g, vals):
    return rt.GridFunction3(g, vals)


def test_identical_fields_zero_report():
    rng = np.random.default_rng(0)
    g = rt.Grid3(9, 1.0)
    v = rng.standard_normal((9, 9, 9))
    rep = rt.compare(_field(g, v), _field(g, v.copy()))
    assert rep.discrete_l2 == 0.0
    assert rep.max_abs == 0.0
    assert rep.relative_l2 == 0.0
    assert rep.rss == 0.0


def test_constant_offset_closed_form():
    g = rt.Grid3(9, 1.0)
    c = 0.75
    a = _field(g, np.full((9, 9, 9), 2.0 + c))
    b = _field(g, np.full((9, 9, 9), 2.0))
    rep = rt.compare(a, b)
    assert rep.max_abs == pytest.approx(c, rel=1e-14)
    assert rep.discrete_l2 == pytest.approx(c * np.sqrt(g.h ** 3 * 9 ** 3), rel=1e-13)
    assert rep.rss == pytest.approx(c * np.sqrt(9 ** 3), rel=1e-13)


def test_compare_rejects_grid_mismatch():
    a = _field(rt.Grid3(9, 1.0), np.zeros((9, 9, 9)))
    b = _field(rt.Grid3(9, 2.0), np.zeros((9, 9, 9)))
    with pytest.raises(rt.ConfigError):
        rt.compare(a, b)


def test_compare_rejects_zero_reference():
    g = rt.Grid3(9, 1.0)
    a = _field(g, np.ones((9, 9, 9)))
    b = _field(g, np.zeros((9, 9, 9)))
    with pytest.raises(rt.NumericError):
        rt.compare(a, b)


def test_exact_newton_point_value():
    g = rt.Grid3(33, 4.0)
    m = rt.Molecule([rt.Atom((0.0, 0.0, 0.0), 1.0)])
    f = rt.direct_sum_oracle(m, g, kernel="exact_newton")
    i = int(round((2.0 + g.b) / g.h))
    c = (g.n - 1) // 2
    assert f.values[i, c, c] == pytest.approx(0.5, rel=1e-14)


def test_exact_newton_antisymmetry():
    g = rt.Grid3(33, 4.0)
    m = rt.Molecule([rt.Atom((1.0, 0.0, 0.0), 1.0), rt.Atom((-1.0, 0.0, 0.0), -1.0)])
    f = rt.direct_sum_oracle(m, g, kernel="exact_newton")
    v = f.values
    flip = v[::-1]
    keep = np.isfinite(v) & (v != 0.0)
    assert np.max(np.abs((v + flip)[keep & keep[::-1]])) <= 1e-14 * np.max(np.abs(v[keep]))


def test_exact_newton_flags_singular_nodes():
    g = rt.Grid3(17, 2.0)
    c = (g.n - 1) // 2
    m = rt.Molecule([rt.Atom((0.0, 0.0, 0.0), 1.0)])
    f = rt.direct_sum_oracle(m, g, kernel="exact_newton")
    assert (c, c, c) in f.meta["excluded_nodes"]
    assert f.values[c, c, c] == 0.0
    other = rt.GridFunction3(g, f.values + 1e-3)
    rep = rt.compare(other, f)
    assert rep.max_abs_excluding_cores <= rep.max_abs


def test_gaussian_oracle_needs_quadrature():
    g = rt.Grid3(9, 1.0)
    m = rt.Molecule([rt.Atom((0.0, 0.0, 0.0), 1.0)])
    with pytest.raises(rt.ConfigError):
        rt.direct_sum_oracle(m, g, kernel="gaussian_sum")
    with pytest.raises(rt.ConfigError):
        rt.direct_sum_oracle(m, g, kernel="bogus")


def test_gaussian_oracle_matches_uncompressed_assembly():
    g = rt.Grid3(33, 4.0)
    q = rt.build_quadrature(10, g.h, 2 * SQRT3 * g.b)
    k = rt.split_reference(rt.assemble_reference_tensor(q, g), 8, 1e-8)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-2.5, 2.5, (3, 3))
    m = rt.Molecule([rt.Atom(p, z) for p, z in zip(pts, (1.0, -1.0, 0.5))])
    sm, _ = rt.snapped_molecule(m, g)
    rs = rt.assemble_collective(sm, k, None)
    oracle = rt.direct_sum_oracle(sm, g, kernel="gaussian_sum", quad=q)
    ref = rt.dense(rs.long)
    rt.scatter_short(rs, ref)
    assert np.max(np.abs(ref - oracle.values)) <= 1e-11 * np.max(np.abs(oracle.values))


def test_norm_homogeneity():
    rng = np.random.default_rng(2)
    g = rt.Grid3(9, 1.0)
    va = rng.standard_normal((9, 9, 9))
    vb = rng.standard_normal((9, 9, 9))
    r1 = rt.compare(_field(g, va), _field(g, vb))
    r3 = rt.compare(_field(g, 3 * va), _field(g, 3 * vb))
    assert r3.discrete_l2 == pytest.approx(3 * r1.discrete_l2, rel=1e-12)
    assert r3.max_abs == pytest.approx(3 * r1.max_abs, rel=1e-12)


def test_triangle_inequality():
    rng = np.random.default_rng(3)
    g = rt.Grid3(9, 1.0)
    a, b, c = (rng.standard_normal((9, 9, 9)) for _ in range(3))
    d_ac = rt.compare(_field(g, a), _field(g, c)).discrete_l2
    d_ab = rt.compare(_field(g, a), _field(g, b)).discrete_l2
    d_bc = rt.compare(_field(g, b), _field(g, c)).discrete_l2
    assert d_ac <= d_ab + d_bc + 1e-14


def test_core_exclusion_mask():
    g = rt.Grid3(17, 2.0)
    rng = np.random.default_rng(4)
    base = rng.standard_normal((17, 17, 17))
    bumped = base.copy()
    bumped[8, 8, 8] += 100.0
    a = _field(g, bumped)
    b = _field(g, base)
    rep = rt.compare(a, b, exclude_centers=[(8, 8, 8)])
    assert rep.max_abs == pytest.approx(100.0, rel=1e-12)
    assert rep.max_abs_excluding_cores == 0.0
    rep2 = rt.compare(a, b, exclude_centers=[(8, 8, 8)], l2_excludes_cores=True)
    assert rep2.discrete_l2 == 0.0
    assert rep2.config["l2_excludes_cores"] is True
    rep3 = rt.compare(a, b, exclude_centers=[(8, 8, 8)])
    assert rep3.discrete_l2 == pytest.approx(100.0 * np.sqrt(g.h ** 3), rel=1e-12)


def test_report_text_and_files(tmp_path):
    g = rt.Grid3(9, 1.0)
    rng = np.random.default_rng(5)
    a = _field(g, rng.standard_normal((9, 9, 9)))
    b = _field(g, rng.standard_normal((9, 9, 9)))
    rep = rt.compare(a, b, config={"case": "unit"})
    txt = rep.text()
    assert "discrete L2" in txt and "case: unit" in txt
    p = tmp_path / "report.txt"
    rt.write_report(rep, p)
    assert "discrete L2" in p.read_text()
    kv = (tmp_path / "report.txt.kv").read_text()
    got = dict(line.split("=", 1) for line in kv.splitlines() if "=" in line)
    assert float(got["discrete_l2"]) == pytest.approx(rep.discrete_l2, rel=1e-15)
    assert float(got["max_abs"]) == pytest.approx(rep.max_abs, rel=1e-15)
