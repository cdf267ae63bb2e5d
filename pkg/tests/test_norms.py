"""Prolongation, discrete norms and the Monte Carlo error functionals."""
import numpy as np
import pytest

from sks_api.assembly import assemble_static, project_scalar
from sks_api.mesh import build_uniform, refine
from sks_api.norms import (
    TrajectoryRecord,
    h1_equiv_disc,
    l2_disc,
    mc_aggregate,
    path_error,
    prolong_scalar,
    prolong_vector,
    restrict_to_coarse,
)


def test_prolong_constant():
    coarse = build_uniform(4)
    fine = refine(coarse)
    assert np.allclose(prolong_scalar(coarse, np.full(16, 2.0), fine), 2.0)


@pytest.mark.parametrize("N", [2, 3, 4, 8, 16])
def test_prolong_then_restrict_is_identity(N, rng):
    coarse = build_uniform(N)
    fine = refine(coarse)
    u = rng.standard_normal(coarse.n_vertices)
    assert np.allclose(restrict_to_coarse(fine, prolong_scalar(coarse, u, fine), coarse), u, atol=1e-14)


@pytest.mark.parametrize("N", [2, 4, 8])
def test_prolongation_is_exact_embedding(N, rng):
    coarse = build_uniform(N)
    fine = refine(coarse)
    u = rng.standard_normal(coarse.n_vertices)
    uf = prolong_scalar(coarse, u, fine)
    assert abs(l2_disc(fine, uf) - l2_disc(coarse, u)) <= 1e-13 * max(1.0, l2_disc(coarse, u))
    sigma = rng.standard_normal(2 * coarse.n_vertices)
    sf = prolong_vector(coarse, sigma, fine)
    assert abs(h1_equiv_disc(fine, sf) - h1_equiv_disc(coarse, sigma)) <= 1e-12 * h1_equiv_disc(coarse, sigma)


def test_prolong_rejects_non_nested():
    with pytest.raises(ValueError):
        prolong_scalar(build_uniform(4), np.zeros(16), build_uniform(6))


def test_l2_of_constant():
    mesh = build_uniform(4, L=2.0)
    assert l2_disc(mesh, np.full(16, 3.0)) == pytest.approx(6.0, rel=1e-13)


def test_h1_equiv_of_constant_field():
    mesh = build_uniform(4)
    assert h1_equiv_disc(mesh, np.tile([1.0, 0.0], 16)) == pytest.approx(1.0, rel=1e-13)


def test_l2_of_fourier_mode():
    mesh = build_uniform(32)
    forms = assemble_static(mesh)
    u = project_scalar(mesh, lambda x, y: np.sin(2 * np.pi * x) + 0.0 * y, forms=forms)
    assert abs(l2_disc(mesh, u, forms) - 1 / np.sqrt(2)) < 0.02 / np.sqrt(2)


def _records(coarse_N=2, steps=2, T=1.0, fill=0.0):
    coarse = build_uniform(coarse_N)
    fine = refine(coarse)
    n, nf = coarse.n_vertices, fine.n_vertices
    tc = np.linspace(0.0, T, steps + 1)
    tf = np.linspace(0.0, T, 4 * steps + 1)
    c_rec = TrajectoryRecord(
        times=tc, u=np.full((len(tc), n), fill), sigma=np.zeros((len(tc), 2 * n)),
        c=np.full((len(tc), n), fill), mesh=coarse,
    )
    f_rec = TrajectoryRecord(
        times=tf, u=np.full((len(tf), nf), fill), sigma=np.zeros((len(tf), 2 * nf)),
        c=np.full((len(tf), nf), fill), mesh=fine,
    )
    return c_rec, f_rec


def test_path_error_of_identical_trajectories():
    c_rec, f_rec = _records(fill=1.5)
    assert np.allclose(path_error(c_rec, f_rec), 0.0, atol=1e-13)


def test_path_error_constant_offset():
    c_rec, f_rec = _records()
    eps = 0.125
    c_rec.u[1] += eps
    err_u, err_c, err_sigma = path_error(c_rec, f_rec)
    assert err_u == pytest.approx(eps * 1.0, rel=1e-12)
    assert err_c == 0.0
    assert err_sigma == 0.0


def test_path_error_ignores_initial_time():
    c_rec, f_rec = _records()
    c_rec.u[0] += 1.0
    assert path_error(c_rec, f_rec)[0] == 0.0


def test_path_error_time_mismatch():
    c_rec, f_rec = _records()
    shifted = TrajectoryRecord(
        times=c_rec.times + 0.3, u=c_rec.u, sigma=c_rec.sigma, c=c_rec.c, mesh=c_rec.mesh,
    )
    with pytest.raises(ValueError):
        path_error(shifted, f_rec)


def test_path_error_invariant_under_shared_offset(rng):
    c_rec, f_rec = _records(coarse_N=4, steps=2)
    c_rec.u[:] = rng.standard_normal(c_rec.u.shape)
    f_rec.u[:] = rng.standard_normal(f_rec.u.shape)
    before = path_error(c_rec, f_rec)
    offset = rng.standard_normal(c_rec.mesh.n_vertices)
    c_rec.u[:] += offset
    f_rec.u[:] += prolong_scalar(c_rec.mesh, offset, f_rec.mesh)
    after = path_error(c_rec, f_rec)
    assert np.allclose(before, after, rtol=1e-10)


def test_trajectory_times_must_increase():
    mesh = build_uniform(2)
    with pytest.raises(ValueError):
        TrajectoryRecord(times=np.array([0.0, 0.0]), u=np.zeros((2, 4)), sigma=np.zeros((2, 8)),
                         c=np.zeros((2, 4)), mesh=mesh)


def test_mc_aggregate_examples():
    assert mc_aggregate([0.2] * 5) == pytest.approx(0.2)
    assert mc_aggregate([3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    assert mc_aggregate([0.7]) == 0.7
    with pytest.raises(ValueError):
        mc_aggregate([])


def test_mc_aggregate_scaling_and_monotonicity():
    base = [0.1, 0.5, 0.3]
    assert mc_aggregate([2 * e for e in base]) == pytest.approx(2 * mc_aggregate(base))
    assert mc_aggregate([0.1, 0.6, 0.3]) > mc_aggregate(base)
