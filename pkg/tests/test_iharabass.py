import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nbspectra.iharabass import (SingularLambdaError, deform, ib_discriminant,
                                 imaginary_axis_scan, scan_to_csv, verify_ib_on_spectrum)
from nbspectra.model import make_bipartite_profile, profile_stats, sample_centered_adjacency
from nbspectra.nonbacktracking import build_nb_operator, nb_eigenvalues, spectral_radius
from nbspectra.bounds import minimal_delta

from conftest import random_sparse

sparse_entries = st.one_of(st.just(0.0), st.floats(-2, 2, allow_nan=False).filter(lambda v: abs(v) > 0.05))
small = arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=sparse_entries)
lams = st.complex_numbers(min_magnitude=0.3, max_magnitude=4, allow_nan=False, allow_infinity=False)


def test_deform_zero_matrix():
    sys_ = deform(np.zeros((2, 3)), 1.0)
    np.testing.assert_array_equal(sys_.M_lambda, np.eye(5))
    np.testing.assert_array_equal(sys_.H_lambda, 0)


def test_deform_single_entry():
    sys_ = deform([[0.5]], 1.0)
    assert sys_.m1[0] == pytest.approx(4 / 3)
    assert sys_.m2[0] == pytest.approx(4 / 3)
    assert sys_.X_lambda[0, 0] == pytest.approx(2 / 3)
    assert sys_.singular_guard == pytest.approx(0.75)


@pytest.mark.parametrize("lam", [0.5, -0.5, 0.5 + 1e-9, 0.0])
def test_deform_guard(lam):
    with pytest.raises(SingularLambdaError):
        deform([[0.5, 0.0], [0.0, 1.0]], lam)


@given(small, lams)
def test_block_structure_consistent(x, lam):
    try:
        sys_ = deform(x, lam)
    except SingularLambdaError:
        return
    n, m = x.shape
    np.testing.assert_array_equal(np.diag(sys_.M_lambda), np.concatenate([sys_.m1, sys_.m2]))
    h = sys_.H_lambda
    np.testing.assert_array_equal(h[:n, n:], sys_.X_lambda)
    np.testing.assert_array_equal(h[n:, :n], sys_.X_lambda.T)
    assert sys_.singular_guard > 0


def test_discriminant_single_entry():
    ev = ib_discriminant([[0.5]], 1.0)
    assert ev.log_abs_det == pytest.approx(math.log(4 / 3), abs=1e-14)
    assert ev.block_available
    assert ev.block_log_abs_det == pytest.approx(math.log(4 / 3), abs=1e-14)


def test_discriminant_four_cycle(four_cycle):
    ev = ib_discriminant(four_cycle, 2.0)
    assert ev.log_abs_det == pytest.approx(math.log(25 / 9), abs=1e-13)
    assert ev.consistency_gap < 1e-13


def test_discriminant_four_cycle_root(four_cycle):
    ev = ib_discriminant(four_cycle, 1j)
    assert ev.smallest_singular_of_system < 1e-14
    # M(i) = 0, so the block form is unavailable
    assert not ev.block_available


def test_verify_zero_matrix():
    rep = verify_ib_on_spectrum(np.zeros((2, 2)))
    assert rep.ok
    assert rep.skipped == [0j]
    assert rep.n_probes == 2 and rep.min_probe_indicator == pytest.approx(1.0)


def test_verify_single_entry():
    rep = verify_ib_on_spectrum([[0.5]])
    assert rep.ok
    assert rep.n_eigenvalues == 2
    # rho(B) = 0, first probe at 0.5 sits on the guard, the one at 1.0 gives 4/3 > 0
    assert rep.probe_skipped == [0.5]
    assert rep.min_probe_indicator > 1e-4


def test_verify_random_suite():
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 11 - n))
        rep = verify_ib_on_spectrum(random_sparse(rng, n, m, rng.choice([0.4, 0.7, 1.0])))
        assert rep.ok, rep


@given(small.filter(lambda a: np.count_nonzero(a) > 0))
def test_root_completeness(x):
    # eigenvalues of B passing the guard are all roots; probes are not
    rep = verify_ib_on_spectrum(x)
    assert not rep.root_violations
    assert rep.n_checked + len(rep.skipped) == max(rep.n_eigenvalues, 1)
    assert not rep.probe_violations


@given(small, lams)
def test_full_block_consistency(x, lam):
    try:
        ev = ib_discriminant(x, lam)
    except SingularLambdaError:
        return
    if ev.block_available and ev.smallest_singular_of_system > 1e-6:
        assert ev.consistency_gap <= 1e-8 + 1e-8 * abs(ev.log_abs_det)


@given(small, lams)
def test_conjugate_symmetry(x, lam):
    try:
        a = ib_discriminant(x, lam)
        b = ib_discriminant(x, lam.conjugate())
    except SingularLambdaError:
        return
    if np.isfinite(a.log_abs_det):
        assert abs(math.exp(a.log_abs_det) - math.exp(b.log_abs_det)) <= 1e-12 * max(
            1.0, math.exp(a.log_abs_det))
    assert a.smallest_singular_of_system == pytest.approx(b.smallest_singular_of_system, abs=1e-12)


def _complex_scan_matrix(x, beta):
    lam = 1j * beta
    x2 = x * x
    sup = x != 0
    denom = np.where(sup, lam * lam - x2, 1.0)
    xl = np.where(sup, lam * x / denom, 0.0)
    m1 = 1 + np.where(sup, x2 / denom, 0).sum(axis=1)
    m2 = 1 + np.where(sup, x2 / denom, 0).sum(axis=0)
    return m1, np.diag(m2) - xl.T @ np.diag(1 / m1) @ xl


@given(small.filter(lambda a: a.shape[0] >= a.shape[1]), st.floats(0.5, 5.0))
def test_imaginary_axis_is_real(x, beta):
    row = imaginary_axis_scan(x, [beta]).rows[0]
    m1, ref = _complex_scan_matrix(x, beta)
    assert np.abs(m1.imag).max() <= 1e-12
    np.testing.assert_allclose(row.m1, m1.real, atol=1e-12)
    if row.valid:
        assert np.abs(ref.imag).max() <= 1e-12 * max(1.0, np.abs(ref).max())
        np.testing.assert_allclose(row.matrix, ref.real, atol=1e-10 * max(1.0, np.abs(ref).max()))


def test_deform_imaginary_path_matches_scan():
    rng = np.random.default_rng(4)
    x = random_sparse(rng, 5, 3, 0.7)
    sys_ = deform(x, 1.5j)
    assert sys_.real_imaginary_path
    row = imaginary_axis_scan(x, [1.5]).rows[0]
    np.testing.assert_allclose(sys_.m1.real, row.m1, atol=1e-15)
    assert np.abs(sys_.m1.imag).max() == 0


def test_scan_zero_matrix():
    row = imaginary_axis_scan(np.zeros((3, 2)), [1.0]).rows[0]
    np.testing.assert_array_equal(row.matrix, np.eye(2))
    assert row.smallest_eig == 1.0 and row.psd and row.valid


def test_scan_large_beta_near_identity():
    rng = np.random.default_rng(6)
    x = random_sparse(rng, 6, 4, 0.8)
    beta = 1e3 * np.abs(x).max()
    row = imaginary_axis_scan(x, [beta]).rows[0]
    assert np.abs(row.matrix - np.eye(4)).max() < 1e-4


def test_scan_invalid_row_and_transpose():
    x = np.full((2, 6), 1.0)
    table = imaginary_axis_scan(x, [0.1, 10.0])
    assert table.transposed
    assert not table.rows[0].valid and not table.rows[0].psd
    assert table.rows[1].valid
    with pytest.raises(ValueError):
        imaginary_axis_scan(x, [0.0])


def test_scan_psd_on_sampled_instances():
    prof = make_bipartite_profile(400, 100, 0.15)
    stats = profile_stats(prof)
    g = stats.gamma
    for seed in range(5):
        x = sample_centered_adjacency(prof, seed).entries
        delta = minimal_delta(x, stats, lower=True)
        beta = g ** 0.25 * (1 + math.sqrt(delta)) * 1.05
        assert spectral_radius(build_nb_operator(x), seed=seed).rho < beta
        row = imaginary_axis_scan(x, [beta]).rows[0]
        assert row.valid and row.psd


def test_scan_csv(tmp_path):
    table = imaginary_axis_scan(np.eye(3), [0.5, 2.0])
    path = tmp_path / "scan.csv"
    scan_to_csv(table, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["beta", "min_m1", "smallest_eig", "psd_flag"]
    assert len(rows) == 3 and rows[2][3] == "1"
