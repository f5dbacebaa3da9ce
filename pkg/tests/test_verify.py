import json
import math

import numpy as np
import pytest

from steklov_trace import majorize, verify as V
from steklov_trace import mesh as M

DISK = V.AnalyticDisk(1.0)
ANN = V.AnalyticAnnulus(0.5, 1.0)


@pytest.fixture(scope="module")
def ellipse():
    return V.MeshDomain(M.generate_ellipse(2.0, 1.0, 0.06))


@pytest.fixture(scope="module")
def fem_square():
    return V.MeshDomain(M.generate_rectangle(1.0, 1.0, 0.04))


def _equal(rep, rel=1e-9):
    return rep.verdict and abs(rep.slack) <= rel * abs(rep.rhs)


def _strict(rep):
    return rep.verdict and rep.slack > rep.tol


def test_weinstock(ellipse):
    rep = V.check_weinstock(DISK)
    assert rep.lhs == pytest.approx(2 * math.pi) and _equal(rep)
    assert _strict(V.check_weinstock(ellipse))
    with pytest.raises(V.HypothesisViolation):
        V.check_weinstock(ANN)


def test_hps_product(ellipse):
    assert _equal(V.check_hps_product(DISK, 1, 1))
    rep = V.check_hps_product(DISK, 1, 2)
    # sigma_2 sigma_3 L^2 = 4 pi^2, odd branch (1 + 2 - 1)^2 pi^2 = 4 pi^2
    assert rep.lhs == pytest.approx(4 * math.pi**2) and _equal(rep)
    assert V.hps_product_rhs(2, 2) == pytest.approx(16 * math.pi**2)
    assert _strict(V.check_hps_product(ellipse, 2, 2))


def test_hps_linear(ellipse):
    assert _equal(V.check_hps_linear(DISK, 1))
    rep = V.check_hps_linear(DISK, 3)
    assert rep.lhs == pytest.approx(4 * math.pi) and rep.rhs == pytest.approx(6 * math.pi)
    assert _strict(V.check_hps_linear(ellipse, 2))


def test_inverse_trace(ellipse, fem_square):
    rep = V.check_hps_inverse_trace(DISK, 3)
    assert rep.lhs == pytest.approx(2 * (1 + 1 / 2 + 1 / 3)) and _equal(rep)
    assert _strict(V.check_hps_inverse_trace(ellipse, 2))
    assert _strict(V.check_hps_inverse_trace(fem_square, 2))


def test_dittmar(ellipse):
    assert _equal(V.check_dittmar(DISK, 4))
    assert _strict(V.check_dittmar(ellipse, 3))
    rep, partial = V.dittmar_trend(DISK, 40)
    assert rep.status == "trend" and rep.verdict is None
    assert np.all(np.diff(partial) > 0) and partial[-1] < math.pi**2 / 3
    assert rep.rhs == pytest.approx(math.pi**2 / 3)


def test_surface_inverse_trace():
    assert _equal(V.check_surface_inverse_trace(DISK, 1, 2, "t"))
    assert _equal(V.check_surface_inverse_trace(DISK, 1, 3, "t2"))
    for m in (1, 2):
        for f in ("t", "t2"):
            rep = V.check_surface_inverse_trace(ANN, m, 2, f)
            assert rep.params["b1"] == 1 and _strict(rep)


def test_surface_inverse_trace_reduces_to_classical():
    a = V.check_surface_inverse_trace(DISK, 1, 3, "t")
    b = V.check_hps_inverse_trace(DISK, 3)
    assert a.lhs == pytest.approx(b.lhs) and a.rhs == pytest.approx(b.rhs)
    a = V.check_surface_inverse_trace(DISK, 1, 3, "t2")
    b = V.check_dittmar(DISK, 3)
    assert a.lhs == pytest.approx(b.lhs) and a.rhs == pytest.approx(b.rhs)


def test_split_inverse_trace():
    rep = V.check_split_inverse_trace(DISK, 1, 1, 1, "t", 2)
    # sigma_2 sigma_2 = 1 against lambda_2 = 1
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(1.0) and _equal(rep)
    assert V.check_split_inverse_trace(DISK, 1, 2, 2, "t", 1).verdict
    rep = V.check_split_inverse_trace(ANN, 1, 1, 1, "t2", 2)
    assert rep.params["b1"] == 1 and _strict(rep)
    with pytest.raises(V.OutOfScope):
        V.check_split_inverse_trace(DISK, 1, 1, 1, "t", 1, dimension=3)


def test_parallel_form_matrix(ellipse):
    res = V.parallel_form_matrix(DISK, 0)
    assert np.allclose(res.matrix, np.eye(2)) and res.bound_ok
    assert np.allclose(res.sigma, 1.0)
    for dom in (ellipse, V.MeshDomain(M.generate_annulus(0.5, 1, 0.1))):
        r0 = V.parallel_form_matrix(dom, 0)
        assert r0.trace == pytest.approx(dom.length / dom.area, rel=1e-10)
        r1 = V.parallel_form_matrix(dom, 1)
        assert r1.matrix.shape == (1, 1) and r1.matrix[0, 0] == pytest.approx(dom.length / dom.area)
        assert r0.bound_ok and r1.bound_ok
    frame = V.ParallelFormFrame(0)
    assert (frame.n_forms, frame.trace_factor) == (2, 1)
    assert np.allclose(frame.coframe @ frame.coframe.T, np.eye(2))
    with pytest.raises(V.OutOfScope):
        V.ParallelFormFrame(2)


def test_parallel_trace(ellipse):
    rep = V.check_parallel_trace(DISK, 0)
    assert rep.lhs == pytest.approx(2.0) and _equal(rep)
    assert _strict(V.check_parallel_trace(ellipse, 0))
    rep = V.check_parallel_trace(DISK, 1)  # radial ODE oracle, equality 2 = L / area
    assert rep.verdict and abs(rep.slack) < 1e-6
    assert V.check_parallel_trace(V.MeshDomain(M.generate_disk(1, 0.05)), 1).verdict


def test_parallel_single(ellipse):
    assert _equal(V.check_parallel_single(DISK, 0, 1))
    rep = V.check_parallel_single(DISK, 0, 2)
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(2.0)
    assert V.check_parallel_single(ellipse, 1, 1).verdict
    with pytest.raises(V.OutOfScope):
        V.check_parallel_single(DISK, 1, 2)


def test_brock(ellipse):
    rep = V.check_brock(DISK, 0)
    assert rep.lhs == pytest.approx(2.0) and _equal(rep)
    assert _strict(V.check_brock(ellipse, 0))
    rep = V.check_brock(DISK, 1)
    assert rep.rhs == pytest.approx(0.5) and rep.verdict


def test_hypothesis_on_annulus_mesh():
    dom = V.MeshDomain(M.generate_annulus(0.5, 1, 0.1))
    for fn in (V.check_weinstock, lambda d: V.check_hps_inverse_trace(d, 2)):
        with pytest.raises(V.HypothesisViolation):
            fn(dom)


def test_tolerance_policy():
    dom = V.MeshDomain(M.generate_disk(1.0, 0.05))
    assert dom.tolerance(1.0) == pytest.approx(10 * dom.h**2 / (dom.area / math.pi))
    coarse = V.MeshDomain(M.generate_disk(1.0, 0.4))
    assert coarse.tolerance(2.0) == pytest.approx(0.1)  # capped at 5 %
    big = dom.scaled(2.0)
    assert big.tolerance(1.0) == pytest.approx(dom.tolerance(1.0), rel=1e-12)
    assert DISK.tolerance(2.0) == pytest.approx(2e-9)


def test_index_bookkeeping():
    class Broken(V.AnalyticDisk):
        def _topology(self):
            return 2, 0, 1

    with pytest.raises(V.IndexBookkeepingError):
        Broken().steklov(3)


def test_subspace_checks():
    mesh = M.generate_annulus(0.5, 1.0, 0.08)
    rep = V.check_subspace_minmax(mesh, 2, 2)
    assert rep.verdict and rep.lhs <= 1 + 1e-6
    assert V.check_subspace_diagonal(mesh, 1, 2).verdict


def test_diagonal_study_disk():
    meshes = [M.generate_disk(1.0, 0.15)]
    meshes.append(M.refine(meshes[0]))
    meshes.append(M.refine(meshes[1]))
    st = V.diagonal_bound_study(meshes, 1, 2)
    assert st.predicted_ok
    assert st.deficit_order == pytest.approx(2.0, abs=0.2)


def test_convergence_studies(tmp_path):
    t = V.convergence_study("disk", 3, "steklov:2", h0=0.15)
    assert t.richardson_order >= 1.8 and np.all(t.orders >= 1.8)
    t2 = V.convergence_study("disk", 3, "laplace:2", h0=0.15)
    assert t2.richardson_order >= 1.8
    t3 = V.convergence_study("annulus", 3, "steklov:2", h0=0.15)
    assert t3.monotone
    text = t.to_csv(tmp_path / "c.csv")
    assert text.splitlines()[0] == "level,h,value,exact,rel_error,order"
    svg = t.to_svg(tmp_path / "c.svg")
    assert svg.read_text().startswith("<?xml")
    with pytest.raises(ValueError):
        V.convergence_study("disk", 2)
    with pytest.raises(ValueError):
        V.convergence_study("ellipse", 3)


def test_report_serialization():
    reps = [V.check_weinstock(DISK), V.InequalityReport.status_only("weinstock", "", {}, "hypothesis violation", "annulus")]
    doc = json.loads(V.reports_to_json(reps))
    assert list(doc[0])[:10] == ["name", "anchor", "params", "lhs", "rhs", "slack", "tol", "verdict", "domain", "h"]
    assert doc[0]["lhs"] == reps[0].lhs  # lossless
    csv_text = V.reports_to_csv(reps)
    assert csv_text.splitlines()[0].startswith("name,anchor,params,lhs")
    assert len(csv_text.splitlines()) == 3


def test_inverted_report_is_negative_control(ellipse):
    rep = V.check_weinstock(ellipse)
    inv = rep.inverted()
    assert inv.status == "violated" and inv.slack == pytest.approx(-rep.slack)


def test_small_suite_and_self_test():
    cfg = V.SuiteConfig(domains=["disk", "annulus:0.5,1"], functions=["t", "t3"], n_max=2, convergence=[])
    res = V.run_suite(cfg)
    assert res.summary["violated"] == 0 and res.exit_status == 0
    assert res.summary["hypothesis violation"] > 0
    bad = V.run_suite(V.SuiteConfig(domains=["annulus:0.5,1"], functions=["t"], convergence=[], self_test=True))
    assert bad.summary["violated"] > 0 and bad.exit_status == 3


def test_suite_config_validation():
    with pytest.raises(ValueError):
        V.SuiteConfig(m_max=0)
    with pytest.raises(ValueError):
        V.SuiteConfig(functions=["sqrt"])
    with pytest.raises(ValueError):
        V.parse_domain("ellipse:2,1")
    assert isinstance(V.parse_domain("annulus:0.4,1"), V.AnalyticAnnulus)


def test_function_arguments_beyond_default_range():
    # 1/sigma can exceed the default evaluation range of the catalog
    rep = V.check_surface_inverse_trace(V.AnalyticAnnulus(0.9, 1.0), 1, 1, majorize.IncreasingConvexFn.square(hi=1.0))
    assert rep.verdict
