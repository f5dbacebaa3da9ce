import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steklov_trace import fem, spectra
from steklov_trace import mesh as M

# Annulus (0.5, 1) Steklov values from an independent per-mode solve
# (scipy generalized eig of the 2x2 boundary-value/flux pencil), frozen.
# Mode 1 is (5 - sqrt 17)/2 and the nonzero mode-0 value is 3/ln 2.
ANNULUS = [
    0.0,
    0.43844718719116965, 0.43844718719116965,
    1.5132037735886792, 1.5132037735886792,
    2.7570887453651314, 2.7570887453651314,
    3.9100233967699674, 3.9100233967699674,
    4.328085122666891,
]


def test_generalized_eig_trivial():
    vals, vecs = spectra.generalized_sym_eig(np.diag([3.0, 1.0, 2.0]), np.eye(3))
    assert np.allclose(vals, [1, 2, 3])
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    vals, _ = spectra.generalized_sym_eig(a, a)
    assert np.allclose(vals, 1.0)


def test_generalized_eig_random(rng):
    x = rng.standard_normal((6, 6))
    y = rng.standard_normal((6, 6))
    a = x @ x.T
    b = y @ y.T + 6 * np.eye(6)
    vals, vecs = spectra.generalized_sym_eig(a, b)
    ref = np.sort(np.linalg.eigvals(np.linalg.solve(b, a)).real)
    assert np.allclose(vals, ref, rtol=1e-10)
    assert np.allclose(vecs.T @ b @ vecs, np.eye(6), atol=1e-8)


def test_generalized_eig_rejects_indefinite():
    with pytest.raises(spectra.EigenSolveError):
        spectra.generalized_sym_eig(np.eye(2), np.diag([1.0, -1.0]))


def test_analytic_oracles():
    assert np.allclose(spectra.disk_steklov_analytic(1, 5).values, [0, 1, 1, 2, 2])
    assert np.allclose(spectra.circle_laplace_analytic(2 * math.pi, 5).values, [0, 1, 1, 4, 4])
    assert np.allclose(spectra.annulus_steklov_analytic(0.5, 1, 10).values, ANNULUS, rtol=1e-12, atol=1e-14)
    assert ANNULUS[1] == pytest.approx((5 - math.sqrt(17)) / 2, rel=1e-14)
    assert ANNULUS[9] == pytest.approx(3 / math.log(2), rel=1e-14)
    merged = spectra.circles_laplace_analytic([2 * math.pi, math.pi], 8).values
    assert np.allclose(merged, [0, 0, 1, 1, 4, 4, 4, 4])


def test_radial_one_form_oracle():
    # rotation field and conjugate pairs: 2 (x3), 3, 3, 4, 4
    vals = spectra.disk_steklov_1form_radial(1.0, 7).values
    assert np.allclose(vals, [2, 2, 2, 3, 3, 4, 4], rtol=1e-6)
    assert np.allclose(spectra.disk_steklov_1form_radial(2.0, 3).values, 1.0, rtol=1e-6)


def test_disk_steklov_fem(disk05):
    sp = spectra.steklov_functions(disk05, 8, vectors=True)
    assert sp.zero_modes == 1
    assert np.allclose(sp.values[1:], [1, 1, 2, 2, 3, 3, 4], rtol=1e-2)
    mb = fem.boundary_laplacian(disk05)[1].matrix.toarray()
    assert np.allclose(sp.vectors.T @ mb @ sp.vectors, np.eye(8), atol=1e-8)
    assert np.allclose(sp.vectors[:, 0], sp.vectors[0, 0])


def test_annulus_steklov_fem():
    mesh = M.generate_annulus(0.5, 1.0, 0.02)
    sp = spectra.steklov_functions(mesh, 6)
    assert sp.zero_modes == 1
    assert np.allclose(sp.values[1:], ANNULUS[1:6], rtol=1e-3)


def test_scaling_exact_on_scaled_mesh():
    mesh = M.generate_disk(1.0, 0.1)
    a = spectra.steklov_functions(mesh, 6).values
    b = spectra.steklov_functions(M.scale(mesh, 2.0), 6).values
    assert np.allclose(b, a / 2, rtol=1e-10, atol=1e-12)
    la = spectra.boundary_laplace(mesh, 6).values
    lb = spectra.boundary_laplace(M.scale(mesh, 2.0), 6).values
    assert np.allclose(lb, la / 4, rtol=1e-10, atol=1e-12)


def test_boundary_laplace(disk05, annulus05):
    sp = spectra.boundary_laplace(disk05, 7)
    assert sp.zero_modes == 1
    assert np.allclose(sp.values, [0, 1, 1, 4, 4, 9, 9], rtol=2e-2, atol=1e-9)
    two = spectra.boundary_laplace(annulus05, 8, vectors=True)
    assert two.zero_modes == 2
    assert np.allclose(two.values, [0, 0, 1, 1, 4, 4, 4, 4], rtol=2e-2, atol=1e-9)
    # constant first in the zero eigenspace
    assert np.allclose(two.vectors[:, 0], two.vectors[0, 0])


def test_one_forms_disk_and_annulus(annulus05):
    mesh = M.generate_disk(1.0, 0.04)
    sp = spectra.steklov_1forms_planar(mesh, 5)
    assert sp.zero_modes == 0
    assert np.allclose(sp.values, [2, 2, 2, 3, 3], rtol=1e-3)
    # L / area = 2 on the unit disk
    meas = M.measures(mesh)
    assert sp.values[0] <= meas.boundary_length / meas.area * (1 + 1e-3)
    ann = spectra.steklov_1forms_planar(annulus05, 3)
    assert ann.zero_modes == 1


def test_one_forms_constrained_variant_converges_slower():
    mesh = M.generate_disk(1.0, 0.08)
    nat = spectra.steklov_1forms_planar(mesh, 3).values
    hard = spectra.steklov_1forms_planar(mesh, 3, natural=False).values
    assert np.abs(nat - 2).max() < np.abs(hard - 2).max()


def test_count_validation(disk05):
    with pytest.raises(ValueError):
        spectra.steklov_functions(disk05, 10**6)
    with pytest.raises(ValueError):
        spectra.boundary_laplace(disk05, 0)


def test_expected_zero_modes(annulus05):
    assert spectra.expected_zero_modes(annulus05, "steklov-0") == 1
    assert spectra.expected_zero_modes(annulus05, "steklov-1") == 1
    assert spectra.expected_zero_modes(annulus05, "boundary-laplace") == 2


def test_clusters():
    assert spectra.clusters([0.0, 1.0, 1.0 + 1e-9, 2.0]) == [(0.0, 1), (1.0, 2), (2.0, 1)]


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=12), st.floats(0.1, 10))
def test_validated_spectrum_properties(vals, c):
    sp = spectra._validated(np.sort(vals), "steklov-0", "analytic")
    assert np.all(np.diff(sp.values) >= 0) and np.all(sp.values >= 0)
    assert np.allclose(sp.scaled(1 / c).values, sp.values / c)


def test_negative_values_rejected():
    with pytest.raises(spectra.EigenSolveError):
        spectra._validated(np.array([-1.0, 1.0]), "steklov-0", "fem")
    sp = spectra._validated(np.array([-1e-12, 1.0]), "steklov-0", "fem")
    assert sp.values[0] == 0.0 and sp.zero_modes == 1


def test_csv_export(disk05):
    sp = spectra.steklov_functions(disk05, 4)
    text = spectra.write_spectrum_csv(sp, oracle=spectra.disk_steklov_analytic(1, 4))
    lines = text.splitlines()
    assert lines[0] == "index,value,kind,provenance,h,oracle,error"
    assert len(lines) == 5 and lines[2].startswith("2,")
    plain = spectra.write_spectrum_csv(sp)
    assert plain.splitlines()[0] == "index,value,kind,provenance,h"
