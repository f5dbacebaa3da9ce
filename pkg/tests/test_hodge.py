import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steklov_trace import fem, hodge, spectra
from steklov_trace import mesh as M


def _z(mesh):
    return mesh.vertices[:, 0] + 1j * mesh.vertices[:, 1]


def test_harmonic_extension_constants_and_linears(annulus05):
    one = hodge.harmonic_extension(annulus05, np.ones(len(annulus05.boundary_vertices)))
    assert np.allclose(one, 1.0, atol=1e-12)
    x = annulus05.vertices[:, 0]
    ext = hodge.harmonic_extension(annulus05, x[annulus05.boundary_vertices])
    assert np.abs(ext - x).max() < 1e-10
    both = hodge.harmonic_extension(annulus05, np.column_stack([x, 2 * x])[annulus05.boundary_vertices])
    assert np.allclose(both[:, 1], 2 * both[:, 0])


def test_harmonic_extension_energy(disk05):
    theta = np.arctan2(disk05.vertices[:, 1], disk05.vertices[:, 0])
    u = hodge.harmonic_extension(disk05, np.cos(theta)[disk05.boundary_vertices])
    assert abs(fem.stiffness_scalar(disk05).form(u) - math.pi) < 2 * 0.05**2 * math.pi


def test_neumann_fields(disk05, annulus05):
    assert hodge.harmonic_neumann_fields(disk05).dimension == 0
    basis = hodge.harmonic_neumann_fields(annulus05)
    assert basis.dimension == 1
    assert np.allclose(basis.gram, np.eye(1))
    assert basis.d_residual.max() <= 1e-8
    assert basis.coderivative_residual.max() <= 1e-8
    assert basis.normal_trace_residual.max() <= 1e-8
    periods = hodge.loop_periods(annulus05, basis.fields[:, 0])
    assert abs(periods[0]) > 1.0
    assert periods.sum() == pytest.approx(0.0, abs=1e-10)  # loops are oppositely oriented


def test_conjugate_of_x_is_y(square):
    pair = hodge.conjugate_harmonic(square, square.vertices[:, 0])
    y = square.vertices[:, 1]
    assert pair.residual <= 1e-10
    assert np.ptp(pair.v - y) <= 1e-10
    mb = fem.mass_boundary(square).matrix
    assert abs(np.ones(square.n_vertices) @ (mb @ pair.v)) < 1e-12


def test_conjugate_of_powers_converges():
    res = []
    for h in (0.1, 0.05):
        mesh = M.generate_disk(1.0, h)
        z = _z(mesh)
        u = hodge.harmonic_extension(mesh, (z**2).real[mesh.boundary_vertices])
        pair = hodge.conjugate_harmonic(mesh, u, tol=0.5)
        exact = (z**2).imag
        assert np.abs(pair.v - exact).max() < 4 * mesh.h
        res.append(pair.relative_residual)
        # isometry up to the residual
        k = fem.stiffness_scalar(mesh)
        assert abs(math.sqrt(k.form(pair.v)) - math.sqrt(k.form(u))) <= pair.residual + 1e-12
    assert res[1] < 0.7 * res[0]


def test_period_obstruction(annulus05):
    r = np.linalg.norm(annulus05.vertices, axis=1)
    u = hodge.harmonic_extension(annulus05, np.log(r)[annulus05.boundary_vertices])
    with pytest.raises(hodge.PeriodObstructionError, match="period obstruction"):
        hodge.conjugate_harmonic(annulus05, u)


def test_conjugate_requires_harmonic(disk05):
    with pytest.raises(ValueError, match="not discretely harmonic"):
        hodge.conjugate_harmonic(disk05, disk05.vertices[:, 0] ** 2)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_simply_connected_never_obstructed(seed):
    mesh = M.generate_disk(1.0, 0.2)
    g = np.random.default_rng(seed).standard_normal(len(mesh.boundary_vertices))
    u = hodge.harmonic_extension(mesh, g)
    pair = hodge.conjugate_harmonic(mesh, u, tol=10.0)
    assert pair.period_pairing.size == 0


def test_conjugation_map_is_complex_structure(annulus05):
    cmap = hodge.conjugation_map(annulus05)
    j = cmap.J
    assert np.abs(j + j.T).max() < 1e-12
    assert np.abs(j @ j + np.eye(len(j))).max() < 1e-10


def test_proof_subspace_disk(disk05):
    sub = hodge.build_proof_subspace(disk05, 1, 1)
    assert sub.basis_indices == [(2, 2)]  # b1 + 2m + 2i - 2 = 2
    assert sub.gram_offdiag_rel < 1e-6
    assert np.allclose(np.diag(sub.energy_gram), 1.0)
    res = hodge.matrix_A(sub)
    assert res.minmax_ok
    assert np.all(res.sigma <= res.eigenvalues * (1 + 1e-8))
    assert res.diag_ratio.min() >= 1 - 10 * disk05.h**2


def test_proof_subspace_annulus_shift(annulus05):
    sub = hodge.build_proof_subspace(annulus05, 1, 1)
    assert sub.b1 == 1
    # one extra index for the hole, one extra constraint (zero flux)
    assert sub.basis_indices == [(2, 3)]
    assert len(sub.coefficients[0]) == 2
    assert sub.constraints["period_rows"] == 1


@pytest.mark.parametrize("m,n", [(1, 2), (2, 1), (2, 2)])
def test_proof_subspace_invariants(annulus05, m, n):
    sub = hodge.build_proof_subspace(annulus05, m, n)
    assert sub.gram_offdiag_rel < 1e-6
    res = hodge.matrix_A(sub)
    assert res.minmax_ok
    assert np.all(res.diag_ratio >= 1.0)
    # u's are L2(boundary)-orthogonal to the first m-1 positive Steklov eigenfunctions
    stk = spectra.steklov_functions(annulus05, m + 2, vectors=True)
    psi = stk.vectors[:, 1:m]
    mb = fem.boundary_laplacian(annulus05)[1].matrix
    assert np.abs(psi.T @ (mb @ sub.traces)).max(initial=0.0) < 1e-8


def test_single_function_subspace_rayleigh(disk05):
    sub = hodge.build_proof_subspace(disk05, 1, 1)
    u = sub.traces[:, 0]
    s = hodge._boundary(disk05)
    rayleigh = (u @ s.S @ u) / (u @ s.Mb @ u)
    a, _, lam = hodge._ritz(sub.energy_gram[:1, :1], sub.boundary_gram[:1, :1])
    assert lam[0] == pytest.approx(rayleigh, rel=1e-12)


def test_split_matrices(disk05, annulus05):
    d = hodge.split_subspace_matrices(disk05, 1, 1, 1)
    assert d.a_ok and d.b_ok
    assert abs(d.diag_ratio[0] - 1) < 1e-2  # near-equality on the disk
    a = hodge.split_subspace_matrices(annulus05, 1, 1, 2)
    assert a.a_ok and a.b_ok
    assert np.abs(a.energy_gram_u - a.energy_gram_w).max() < 1e-6
    assert np.all(a.diag_ratio > 1)


def test_subspace_json(tmp_path, disk05):
    sub = hodge.build_proof_subspace(disk05, 1, 2)
    text = hodge.dump_subspace_json(sub, tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert text.strip() == (tmp_path / "s.json").read_text().strip()
    assert list(doc)[:5] == ["mesh", "h", "m", "n", "b1"]
    assert len(doc["A_inverse"]) == 4 and doc["minmax_ok"] is True


def test_subspace_rejects_bad_parameters(disk05):
    with pytest.raises(ValueError):
        hodge.build_proof_subspace(disk05, 0, 1)
