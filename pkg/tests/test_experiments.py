import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from csfilter.errors import SpecError
from csfilter.experiments import (
    TrialSpec,
    fit_log_bound,
    phase_transition,
    plant_signal,
    run_cell,
    run_trial,
    trial_seed,
)


def test_zero_signal_counts_as_success():
    out = run_trial(TrialSpec(64, 0, 16))
    assert out.success and out.rel_error == 0.0
    assert np.all(out.result.x_hat == 0)


@pytest.mark.parametrize("basis", ["identity", "dft"])
def test_planted_signal_shape(basis):
    spec = TrialSpec(100, 7, 30, basis=basis, seed=11)
    alpha = plant_signal(spec)
    assert np.count_nonzero(alpha) == 7
    np.testing.assert_allclose(np.abs(alpha[alpha != 0]), 1.0, atol=1e-15)
    if basis == "identity":
        assert set(alpha[alpha != 0].real) <= {-1.0, 1.0} and np.all(alpha.imag == 0)
    np.testing.assert_array_equal(plant_signal(spec), alpha)


def test_trial_spec_validation():
    for bad in [dict(S=5, m=4), dict(m=11), dict(S=-1), dict(success_tol=0.0), dict(solver="bcs"),
                dict(basis="haar"), dict(bands="coarse"), dict(signal_model="iq")]:
        kwargs = {**dict(n=10, S=2, m=4), **bad}
        with pytest.raises(SpecError):
            TrialSpec(**kwargs)


def test_sparse_scenario_smoke():
    # the full 100-seed version runs in the acceptance suite
    for seed in range(3):
        out = run_trial(TrialSpec(1000, 26, 200, seed=seed))
        assert out.success and out.rel_error <= 1e-4


def test_filterbank_mode_trial_runs():
    out = run_trial(TrialSpec(128, 3, 64, operator_mode="filterbank", mask_scheme="random_subset", seed=1))
    assert np.isfinite(out.rel_error)
    assert out.result.residual_l2 <= 1e-3


def test_dft_basis_with_random_samples():
    # informational companion to the grid-sampled DFT scenario, which is
    # structurally ambiguous; random sampling removes the aliasing
    wins = sum(
        run_trial(TrialSpec(1000, 26, 200, basis="dft", mask_scheme="random_subset", seed=s)).success
        for s in range(10)
    )
    assert wins >= 9


def test_full_sampling_always_succeeds():
    rep = phase_transition(64, [1, 5, 20], [64], T=5, base_seed=2)
    for S in (1, 5, 20):
        assert rep.probability(S, 64) == 1.0
        assert rep.m90[S] == 64


def test_trial_seeds_are_distinct_and_stable():
    seeds = {trial_seed(0, S, m, t) for S in (5, 10) for m in (32, 64) for t in range(50)}
    assert len(seeds) == 200
    assert trial_seed(3, 5, 64, 7) == trial_seed(3, 5, 64, 7)


def test_run_cell_matches_manual_aggregation():
    tpl = TrialSpec(64, 4, 24, mask_scheme="random_subset")
    cell = run_cell(tpl, base_seed=5, T=6)
    outs = [run_trial(replace(tpl, seed=trial_seed(5, 4, 24, t))) for t in range(6)]
    assert cell.trials == 6
    assert cell.successes == sum(o.success for o in outs)
    assert cell.mean_rel_error == float(np.mean([o.rel_error for o in outs]))


def _small(**kw):
    return phase_transition(96, [2, 6], [12, 24, 36, 48], T=8, base_seed=4, **kw)


def test_report_is_deterministic(tmp_path):
    a, b = _small(), _small()
    for rep, name in ((a, "a"), (b, "b")):
        rep.write_json(tmp_path / f"{name}.json")
        rep.write_csv(tmp_path / f"{name}.csv")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cell_order_does_not_matter():
    a = _small()
    b = phase_transition(96, [6, 2], [48, 12, 36, 24], T=8, base_seed=4)
    c = _small(workers=2)
    for other in (b, c):
        assert other.cells == a.cells
        assert other.m90 == a.m90 and other.c == a.c


def test_success_probability_roughly_monotone_in_m():
    T = 30
    rep = phase_transition(128, [4, 8], [16, 24, 32, 40, 48, 64], T=T, base_seed=1)
    for S in rep.S_list:
        probs = [rep.probability(S, m) for m in rep.m_list]
        assert all(0.0 <= p <= 1.0 for p in probs)
        for lo, hi in zip(probs, probs[1:]):
            p = 0.5 * (lo + hi)
            assert lo - hi <= 3 * math.sqrt(p * (1 - p) / T)
        assert rep.cells[(S, rep.m_list[0])].trials == T


def test_fit_log_bound_exact_line():
    n = 1024
    m90 = {S: 2.5 * S * math.log(n) for S in (5, 10, 20)}
    c, resid = fit_log_bound(m90, n)
    assert c == pytest.approx(2.5, rel=1e-12)
    assert resid == pytest.approx(0.0, abs=1e-12)
    assert fit_log_bound({5: None, 10: None}, n) == (None, None)
    c2, _ = fit_log_bound({**m90, 40: None}, n)
    assert c2 == pytest.approx(c, rel=1e-12)


def test_fit_log_bound_matches_lstsq():
    m90 = {5: 40, 10: 72, 20: 150, 40: 260}
    x = np.array([[S * math.log(512)] for S in m90])
    y = np.array(list(m90.values()), float)
    sol, *_ = np.linalg.lstsq(x, y, rcond=None)
    c, resid = fit_log_bound(m90, 512)
    assert c == pytest.approx(sol[0], rel=1e-12)
    assert resid == pytest.approx(np.linalg.norm(y - x[:, 0] * sol[0]) / np.linalg.norm(y), rel=1e-12)


def test_report_exports(tmp_path):
    rep = _small()
    rep.write_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["n", "S", "m", "trials", "successes", "mean_rel_error"]
    assert len(rows) == 1 + 8
    rep.write_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert {"n", "trials", "cells", "m90", "c", "fit_residual"} <= set(data)
    assert all(cell["trials"] == 8 for cell in data["cells"])
    paths = rep.write_plot_data(tmp_path, "pt")
    assert [p.name for p in paths] == ["pt_S2.dat", "pt_S6.dat"]
    body = [ln for ln in paths[0].read_text().splitlines() if not ln.startswith("#")]
    assert len(body) == 4 and all(len(ln.split()) == 2 for ln in body)


def test_phase_transition_validation():
    with pytest.raises(SpecError):
        phase_transition(64, [], [10], T=2)
    with pytest.raises(SpecError):
        phase_transition(64, [2], [], T=2)
    with pytest.raises(SpecError):
        phase_transition(64, [2], [10], T=0)
    with pytest.raises(SpecError):
        phase_transition(64, [20], [10], T=1)
