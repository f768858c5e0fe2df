import json
import math

import numpy as np
import pytest

import wignerdyn as wd


def test_version():
    assert wd.__version__ == "0.1.0"


def test_model_couplings():
    h = wd.model("ising", extent=6)
    assert h.sites == 6
    jz = h.couplings(2)
    assert jz.shape == (6, 6)
    assert np.allclose(jz, jz.T)
    assert jz[0, 1] == 1.0 and jz[0, 5] == 1.0 and jz[0, 2] == 0.0
    assert np.allclose(wd.model("xx", extent=4).pair_couplings(0, 1), [1, 1, 0])


def test_closed_form_matches_statevector():
    h = wd.model("ising", extent=8)
    ed = wd.statevector(h, math.pi / 2, [0.0, 0.7], [(2, 3), (2, 4)])
    for p, (i, j) in enumerate([(2, 3), (2, 4)]):
        cf = wd.closed_form(h, "exact", math.pi / 2, 0.7, i, j)
        assert np.allclose(ed[1][p], cf, atol=1e-9)
    assert np.allclose(ed[0][0], 0.0, atol=1e-14)


def test_sampled_is_close_and_reproducible():
    h = wd.model("ising", extent=6)
    c1, se1 = wd.sampled(h, "twa", math.pi / 2, [0.0, 1.0], [(0, 1)], 4000, seed=3)
    c2, _ = wd.sampled(h, "twa", math.pi / 2, [0.0, 1.0], [(0, 1)], 4000, seed=3)
    assert np.array_equal(c1[1][0], c2[1][0])
    ref = wd.closed_form(h, "twa", math.pi / 2, 1.0, 0, 1)
    assert np.all(np.abs(c1[1][0] - ref) <= 5 * se1[1][0] + 1e-12)


def test_eigen_and_shapes():
    vals, vecs, dim, shape = wd.eigen(np.diag([1.0, -1.0, 0.0]))
    assert shape == "clover" and dim == 2
    assert abs(vals[0]) == pytest.approx(1.0)
    assert wd.eigen(np.diag([1.0, 0.0, 0.0]))[3] == "dumbbell"


def test_cmv_roots_and_mesh(tmp_path):
    c = np.diag([100.0, 0.0, 0.0])
    roots = wd.radii_along(c, 1.0, [1.0, 0.0, 0.0])
    assert len(roots) == 2
    assert roots[1] == pytest.approx(100.0, rel=0.02)
    for r in roots:
        assert abs(wd.q_value(c, [r, 0.0, 0.0])) == pytest.approx(1.0, abs=1e-8)
    faces = wd.export_cmv(np.diag([1.0, 1.0, -1.0]), 0.1, 2, str(tmp_path / "m.ply"))
    assert faces > 0
    assert (tmp_path / "m.ply").read_text().startswith("ply\n")


def test_sign_problem_and_short_time():
    assert wd.sign_problem_factor(math.pi / 2) == pytest.approx(1.0)
    assert wd.sign_problem_factor(math.pi / 4) == pytest.approx((1 + math.sqrt(2)) / 2)
    assert wd.short_time_delta([0, 0, 1], math.pi / 2, 1.0, "dtwa") == pytest.approx(1 / 16)


def test_run_config(tmp_path):
    cfg = {
        "model": {"preset": "ising"},
        "lattice": {"geometry": "chain", "extent": 5},
        "theta": "pi/2",
        "methods": ["exact_closed_form", "twa_closed_form"],
        "pairs": [[0, 1]],
        "times": [0, 0.5],
        "output": str(tmp_path / "out"),
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    files = wd.run_config(str(path))
    assert files[-1].endswith("manifest.json")
    lines = (tmp_path / "out" / "correlations.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    with pytest.raises(Exception):
        cfg["pairs"] = [[0, 9]]
        path.write_text(json.dumps(cfg))
        wd.run_config(str(path))
