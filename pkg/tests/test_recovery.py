import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from csfilter.basis import SparsityBasis
from csfilter.errors import DegenerateDictionaryError, DimensionError, InstabilityError, SizeError, SpecError
from csfilter.experiments import TrialSpec, build_operator, plant_signal
from csfilter.recovery import (
    Dictionary,
    RecoveryResult,
    SolverConfig,
    SparseSignal,
    l0_oracle,
    soft_threshold,
    solve_l1,
    solve_omp,
)
from csfilter.sensing import SensingOperator, Transfer, apply_forward, make_mask, materialize

finite = st.floats(-1e3, 1e3, allow_nan=False)


def instance(n, S, m, seed, basis="identity", scheme="random_subset", model="real"):
    spec = TrialSpec(n, S, m, basis=basis, mask_scheme=scheme, seed=seed, signal_model=model)
    op = build_operator(spec)
    b = SparsityBasis(basis, n)
    alpha = plant_signal(spec)
    return op, b, alpha, apply_forward(op, b.synthesize(alpha))


def check_result(res, op, basis, y):
    np.testing.assert_allclose(res.x_hat, basis.synthesize(res.alpha_hat), atol=1e-10)
    assert abs(res.residual_l2 - np.linalg.norm(y - apply_forward(op, res.x_hat))) <= 1e-10
    assert res.alpha_hat.shape == res.x_hat.shape == (op.n,)


@settings(max_examples=100, deadline=None)
@given(v=hnp.arrays(float, st.integers(0, 30), elements=finite), lam=st.floats(0, 100))
def test_soft_threshold_real_closed_form(v, lam):
    expected = np.array([math.copysign(max(abs(a) - lam, 0.0), a) if a else 0.0 for a in v])
    np.testing.assert_allclose(soft_threshold(v, lam), expected, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(re=hnp.arrays(float, 12, elements=finite), im=hnp.arrays(float, 12, elements=finite), lam=st.floats(0, 100))
def test_soft_threshold_complex_keeps_phase(re, im, lam):
    v = re + 1j * im
    out = soft_threshold(v, lam)
    mag = np.abs(v)
    np.testing.assert_allclose(np.abs(out), np.maximum(mag - lam, 0), atol=1e-9)
    live = np.abs(out) > 1e-9
    np.testing.assert_allclose(np.angle(out[live]), np.angle(v[live]), atol=1e-9)


@pytest.mark.parametrize("kind", ["identity", "dft"])
def test_basis_is_unitary(kind):
    rng = np.random.default_rng(0)
    for n in (1, 7, 64, 1000):
        b = SparsityBasis(kind, n)
        for _ in range(5):
            a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            assert abs(np.linalg.norm(b.synthesize(a)) - np.linalg.norm(a)) <= 1e-10 * np.linalg.norm(a)
            np.testing.assert_allclose(b.analyze(b.synthesize(a)), a, atol=1e-10)


def test_basis_and_signal_validation():
    with pytest.raises(SpecError):
        SparsityBasis("wavelet", 4)
    with pytest.raises(SpecError):
        SparsityBasis("dft", 0)
    with pytest.raises(SpecError):
        SparseSignal(np.array([1.0, 2.0, 0.0]), (0,))
    assert SparseSignal(np.array([1.0, 0.0, 3.0]), (0, 2)).S == 2
    with pytest.raises(SpecError):
        SolverConfig(tol=0)
    with pytest.raises(SpecError):
        SolverConfig(max_iters=0)
    with pytest.raises(SpecError):
        SolverConfig(lam=-1)


@pytest.mark.parametrize("kind", ["identity", "dft"])
@pytest.mark.parametrize("model", ["real", "baseband"])
def test_dictionary_products_match_dense(kind, model):
    op, b, _, _ = instance(48, 3, 13, seed=4, basis=kind, model=model)
    M = materialize(op) @ b.matrix()
    rng = np.random.default_rng(1)
    a = rng.standard_normal(48) + 1j * rng.standard_normal(48)
    r = rng.standard_normal(13) + 1j * rng.standard_normal(13)
    A = Dictionary(op, b)
    np.testing.assert_allclose(A.matvec(a), M @ a, atol=1e-12)
    np.testing.assert_allclose(A.rmatvec(r), M.conj().T @ r, atol=1e-12)
    np.testing.assert_allclose(A.column_norms(), np.linalg.norm(M, axis=0), atol=1e-12)
    if kind == "identity" and model == "real":
        R = Dictionary(op, b, real=True)
        np.testing.assert_allclose(R.matvec(a.real), (M @ a.real).real, atol=1e-12)
        np.testing.assert_allclose(R.rmatvec(r.real), (M.conj().T @ r.real).real, atol=1e-12)


def test_power_iteration_bounds_filterbank_norm():
    spec = TrialSpec(64, 3, 20, operator_mode="filterbank", mask_scheme="random_subset")
    op = build_operator(spec)
    top = np.linalg.norm(materialize(op), 2) ** 2
    est = Dictionary(op, SparsityBasis("identity", 64)).operator_norm_sq()
    assert top <= est <= 1.06 * top


@pytest.mark.parametrize("kind", ["identity", "dft"])
def test_zero_data_gives_zero_solution(kind):
    op, b, _, _ = instance(32, 2, 8, seed=0, basis=kind)
    y = np.zeros(8)
    res = solve_l1(op, b, y)
    assert res.converged and res.iters == 1
    assert np.all(res.alpha_hat == 0) and res.support == ()
    omp = solve_omp(op, b, y, S_max=3)
    assert omp.support == () and np.all(omp.alpha_hat == 0)
    check_result(res, op, b, y)


def test_objective_trace_is_monotone():
    for seed in range(5):
        op, b, _, y = instance(256, 12, 64, seed=seed)
        res = solve_l1(op, b, y, SolverConfig(max_iters=800))
        assert np.all(np.diff(res.trace) <= 1e-12)
        check_result(res, op, b, y)


def test_l1_recovers_single_spike():
    hits = 0
    for seed in range(100):
        op, b, alpha, y = instance(1024, 1, 100, seed=seed, scheme="uniform_grid")
        res = solve_l1(op, b, y)
        rel = np.linalg.norm(res.x_hat - b.synthesize(alpha)) / np.linalg.norm(alpha)
        hits += set(res.support) == set(np.flatnonzero(alpha)) and rel <= 1e-6
    assert hits >= 99


def test_l1_dft_basis_instance():
    op, b, alpha, y = instance(256, 8, 96, seed=3, basis="dft")
    res = solve_l1(op, b, y)
    assert res.converged
    assert set(res.support) == set(np.flatnonzero(alpha))
    np.testing.assert_allclose(res.alpha_hat, alpha, atol=1e-6)
    check_result(res, op, b, y)


def test_l1_support_matches_oracle():
    agree = 0
    for seed in range(100):
        op, b, _, y = instance(16, 2, 8, seed=seed, scheme="uniform_grid")
        agree += set(solve_l1(op, b, y).support) == set(l0_oracle(op, b, y, 2).support)
    assert agree >= 95


def test_omp_single_spike_one_step():
    hits = 0
    for seed in range(100):
        op, b, alpha, y = instance(256, 1, 20, seed=seed)
        res = solve_omp(op, b, y, S_max=5)
        hits += res.iters == 1 and res.support == tuple(np.flatnonzero(alpha))
    assert hits >= 99


def test_omp_support_matches_oracle():
    agree = 0
    for seed in range(100):
        op, b, _, y = instance(16, 2, 10, seed=seed, scheme="uniform_grid")
        agree += set(solve_omp(op, b, y, S_max=2).support) == set(l0_oracle(op, b, y, 2).support)
    assert agree >= 90


@pytest.mark.parametrize("model", ["real", "baseband"])
def test_omp_residual_orthogonal_to_selected_atoms(model):
    for seed in range(10):
        op, b, _, y = instance(128, 6, 40, seed=seed, model=model)
        M = materialize(op) @ b.matrix()
        for k in range(1, 7):
            res = solve_omp(op, b, y, S_max=k, tol=1e-14)
            r = y - M @ res.alpha_hat
            corr = np.abs(M[:, list(res.support)].conj().T @ r)
            assert np.all(corr <= 1e-8 * max(np.linalg.norm(r), 1e-300) + 1e-13)
            check_result(res, op, b, y)


def test_omp_ties_break_to_lowest_index():
    op = SensingOperator(Transfer.identity(8), make_mask(8, 8))
    y = np.array([0, 0, 1.0, 0, 0, 1.0, 0, 0])
    assert solve_omp(op, SparsityBasis("identity", 8), y, S_max=1).support == (2,)


def test_omp_validation():
    op, b, _, y = instance(16, 1, 4, seed=0)
    with pytest.raises(SpecError):
        solve_omp(op, b, y, S_max=0)
    with pytest.raises(SpecError):
        solve_omp(op, b, y, S_max=5)
    with pytest.raises(DimensionError):
        solve_omp(op, b, np.zeros(5), S_max=1)


def test_degenerate_dictionary_detected():
    gains = np.zeros(16, complex)
    op = SensingOperator(Transfer(16, gains, "filterbank"), make_mask(16, 4))
    with pytest.raises(DegenerateDictionaryError):
        solve_omp(op, SparsityBasis("dft", 16), np.ones(4), S_max=1)


def test_divergence_raises_instability(monkeypatch):
    op, b, _, y = instance(64, 3, 20, seed=1)
    monkeypatch.setattr(Dictionary, "operator_norm_sq", lambda self: 1e-3)
    with pytest.raises(InstabilityError, match="step"):
        solve_l1(op, b, y, SolverConfig(debias=False))


def test_l0_planted_support_recovered():
    for seed in range(5):
        op, b, alpha, y = instance(14, 2, 7, seed=seed, model="baseband")
        res = l0_oracle(op, b, y, 2)
        assert res.residual_l2 <= 1e-10
        assert set(np.flatnonzero(alpha)) <= set(res.support)
        check_result(res, op, b, y)


def test_l0_full_support_is_least_squares():
    op, b, _, _ = instance(6, 2, 4, seed=2)
    y = np.random.default_rng(0).standard_normal(4)
    res = l0_oracle(op, b, y, 6)
    M = materialize(op)
    best = np.linalg.norm(y - M @ np.linalg.lstsq(M, y, rcond=None)[0])
    assert res.residual_l2 == pytest.approx(best, abs=1e-10)


def test_l0_is_global_optimum():
    op, b, _, _ = instance(12, 2, 6, seed=3)
    y = np.random.default_rng(4).standard_normal(6)
    res = l0_oracle(op, b, y, 2)
    assert len(res.support) == 2
    M = materialize(op)
    # independent enumeration with QR projections instead of lstsq
    for sup in itertools.combinations(range(12), 2):
        q, _ = np.linalg.qr(M[:, sup])
        other = np.linalg.norm(y - q @ (q.conj().T @ y))
        assert res.residual_l2 <= other + 1e-9
    assert res.iters == 1 + 12 + math.comb(12, 2)


def test_l0_guard():
    op, b, _, y = instance(1000, 3, 10, seed=0)
    with pytest.raises(SizeError):
        l0_oracle(op, b, y, 3)


def test_oracle_dominates_other_solvers():
    for seed in range(20):
        op, b, _, y = instance(16, 3, 7, seed=seed)
        best = l0_oracle(op, b, y, 3).residual_l2
        assert best <= solve_omp(op, b, y, S_max=3).residual_l2 + 1e-9
        l1 = solve_l1(op, b, y)
        if len(l1.support) <= 3:
            assert best <= l1.residual_l2 + 1e-9


def test_result_export(tmp_path):
    op, b, alpha, y = instance(64, 3, 30, seed=5)
    res = solve_l1(op, b, y)
    d = res.to_dict()
    assert set(d) == {"support", "coefficients", "residual_l2", "iters", "converged"}
    assert d["support"] == sorted(np.flatnonzero(alpha).tolist())
    np.testing.assert_allclose([c[0] for c in d["coefficients"]], alpha[d["support"]].real, atol=1e-6)
    res.save(tmp_path / "r.json")
    assert (tmp_path / "r.json").read_text() == res.to_json()
    assert isinstance(res, RecoveryResult)
