"""Seeded sense-and-recover trials and phase-transition sweeps over (S, m)."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .basis import SparsityBasis
from .errors import SpecError
from .filter_bank import FilterSpec, build_band_plan, per_bin_band_plan
from .recovery import RecoveryResult, SolverConfig, l0_oracle, solve_l1, solve_omp
from .sensing import (
    SensingOperator,
    apply_forward,
    assemble_filterbank_transfer,
    assemble_ideal_transfer,
    make_mask,
)

# Real RF signals are sampled at the Nyquist rate of the 4 GHz top cutoff;
# complex baseband covers the 2-4 GHz band around a 3 GHz centre.
REAL_SAMPLE_RATE_HZ = 8e9
BASEBAND_SAMPLE_RATE_HZ = 2e9
BASEBAND_CENTER_HZ = 3e9
SOLVERS = ("l1", "omp", "l0")


@dataclass(frozen=True)
class TrialSpec:
    """One planted-sparse sensing experiment.

    ``bands="per_bin"`` gives every DFT bin its own delay line (the fine
    limit of the filter bank); ``bands="bank"`` is the eleven-section bank
    with cutoffs 4.0, 3.8, ..., 2.0 GHz.  ``signal_model="baseband"`` treats
    samples as the complex envelope of the RF band, so the gains carry no
    conjugate symmetry.
    """

    n: int
    S: int
    m: int
    basis: str = "identity"
    operator_mode: str = "ideal"
    mask_scheme: str = "uniform_grid"
    seed: int = 0
    success_tol: float = 1e-4
    solver: str = "l1"
    bands: str = "per_bin"
    signal_model: str = "real"

    def __post_init__(self):
        if not 0 <= self.S <= self.m <= self.n:
            raise SpecError(f"need 0 <= S <= m <= n, got S={self.S} m={self.m} n={self.n}")
        if not self.success_tol > 0:
            raise SpecError("success_tol must be positive")
        if self.solver not in SOLVERS:
            raise SpecError(f"solver must be one of {SOLVERS}")
        if self.bands not in ("per_bin", "bank"):
            raise SpecError("bands must be 'per_bin' or 'bank'")
        if self.signal_model not in ("real", "baseband"):
            raise SpecError("signal_model must be 'real' or 'baseband'")
        SparsityBasis(self.basis, self.n)


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    rel_error: float
    result: RecoveryResult
    truth: np.ndarray


def _seeds(seed: int) -> tuple[int, int, int]:
    plan_seed, mask_seed, signal_seed = np.random.SeedSequence(seed).generate_state(3)
    return int(plan_seed), int(mask_seed), int(signal_seed)


def build_operator(spec: TrialSpec) -> SensingOperator:
    plan_seed, mask_seed, _ = _seeds(spec.seed)
    if spec.signal_model == "real":
        fs, center = REAL_SAMPLE_RATE_HZ, None
    else:
        fs, center = BASEBAND_SAMPLE_RATE_HZ, BASEBAND_CENTER_HZ
    if spec.bands == "per_bin":
        plan = per_bin_band_plan(spec.n, fs, plan_seed, center)
    else:
        plan = build_band_plan(4e9, 2e9, 0.2e9, seed=plan_seed)
    if spec.operator_mode == "ideal":
        transfer = assemble_ideal_transfer(spec.n, plan, fs, center)
    else:
        transfer = assemble_filterbank_transfer(spec.n, plan, FilterSpec(9, 1.0), fs, center)
    return SensingOperator(transfer, make_mask(spec.n, spec.m, spec.mask_scheme, mask_seed))


def plant_signal(spec: TrialSpec) -> np.ndarray:
    """Random S-sparse coefficients: +-1 for the spike basis, unit phasors for DFT."""
    rng = np.random.default_rng(_seeds(spec.seed)[2])
    alpha = np.zeros(spec.n, dtype=complex)
    support = rng.choice(spec.n, size=spec.S, replace=False)
    if spec.basis == "identity":
        alpha[support] = rng.choice([-1.0, 1.0], size=spec.S)
    else:
        alpha[support] = np.exp(2j * np.pi * rng.uniform(size=spec.S))
    return alpha


def recover(spec: TrialSpec, op: SensingOperator, basis: SparsityBasis, y) -> RecoveryResult:
    if spec.solver == "l1":
        return solve_l1(op, basis, y, SolverConfig())
    if spec.solver == "omp":
        return solve_omp(op, basis, y, S_max=max(spec.S, 1))
    return l0_oracle(op, basis, y, spec.S)


def run_trial(spec: TrialSpec) -> TrialOutcome:
    op = build_operator(spec)
    basis = SparsityBasis(spec.basis, spec.n)
    alpha = plant_signal(spec)
    x = basis.synthesize(alpha)
    y = apply_forward(op, x)
    result = recover(spec, op, basis, y)
    norm = float(np.linalg.norm(x))
    err = float(np.linalg.norm(result.x_hat - x))
    rel = err / norm if norm > 0 else 0.0
    return TrialOutcome(rel <= spec.success_tol, rel, result, alpha)


@dataclass(frozen=True)
class CellStats:
    S: int
    m: int
    trials: int
    successes: int
    mean_rel_error: float

    @property
    def probability(self) -> float:
        return self.successes / self.trials


def trial_seed(base_seed: int, S: int, m: int, t: int) -> int:
    return int(np.random.SeedSequence([base_seed, S, m, t]).generate_state(1)[0])


def run_cell(template: TrialSpec, base_seed: int, T: int) -> CellStats:
    successes, errors = 0, []
    for t in range(T):
        spec = TrialSpec(**{**asdict(template), "seed": trial_seed(base_seed, template.S, template.m, t)})
        out = run_trial(spec)
        successes += out.success
        errors.append(out.rel_error)
    return CellStats(template.S, template.m, T, successes, float(np.mean(errors)))


def _run_cell_args(args):
    return run_cell(*args)


@dataclass(frozen=True)
class PhaseTransitionReport:
    n: int
    trials: int
    S_list: tuple[int, ...]
    m_list: tuple[int, ...]
    cells: dict
    m90: dict
    c: float | None
    fit_residual: float | None

    def probability(self, S: int, m: int) -> float:
        return self.cells[(S, m)].probability

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "trials": self.trials,
            "S_list": list(self.S_list),
            "m_list": list(self.m_list),
            "cells": [
                {**asdict(cell), "probability": cell.probability}
                for _, cell in sorted(self.cells.items())
            ],
            "m90": {str(S): self.m90[S] for S in self.S_list},
            "c": self.c,
            "fit_residual": self.fit_residual,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "S", "m", "trials", "successes", "mean_rel_error"])
            for (S, m), cell in sorted(self.cells.items()):
                w.writerow([self.n, S, m, cell.trials, cell.successes, repr(cell.mean_rel_error)])

    def write_plot_data(self, directory, stem: str = "phase") -> list[Path]:
        """Two-column ``m probability`` text file per S."""
        out = []
        for S in self.S_list:
            path = Path(directory) / f"{stem}_S{S}.dat"
            lines = [f"# n={self.n} S={S} trials={self.trials}", "# m probability"]
            lines += [f"{m} {self.probability(S, m)!r}" for m in self.m_list]
            path.write_text("\n".join(lines) + "\n")
            out.append(path)
        return out


def fit_log_bound(m90: dict, n: int) -> tuple[float | None, float | None]:
    """Least-squares slope through the origin of m90(S) against S ln n.

    Returns ``(c, relative residual ||m90 - c S ln n|| / ||m90||)``; both are
    ``None`` when no S reached the 90% level.
    """
    pts = [(S * math.log(n), m) for S, m in sorted(m90.items()) if m is not None]
    if not pts:
        return None, None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts], dtype=float)
    c = float(x @ y / (x @ x))
    return c, float(np.linalg.norm(y - c * x) / np.linalg.norm(y))


def phase_transition(
    n: int,
    S_list,
    m_list,
    T: int,
    base_seed: int = 0,
    *,
    basis: str = "identity",
    mask_scheme: str = "random_subset",
    solver: str = "l1",
    operator_mode: str = "ideal",
    success_tol: float = 1e-4,
    workers: int = 1,
) -> PhaseTransitionReport:
    """Empirical success probability on the (S, m) grid.

    Trial ``t`` of cell ``(S, m)`` is seeded from ``(base_seed, S, m, t)``, so
    cells are independent of each other and of execution order.
    """
    S_list, m_list = tuple(int(s) for s in S_list), tuple(sorted(int(m) for m in m_list))
    if not S_list or not m_list:
        raise SpecError("S_list and m_list must be non-empty")
    if T < 1:
        raise SpecError("need at least one trial per cell")
    templates = [
        TrialSpec(n, S, m, basis, operator_mode, mask_scheme, 0, success_tol, solver)
        for S in S_list
        for m in m_list
    ]
    jobs = [(tpl, base_seed, T) for tpl in templates]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(_run_cell_args, jobs))
    else:
        stats = [run_cell(*job) for job in jobs]
    cells = {(c.S, c.m): c for c in stats}

    m90 = {}
    for S in S_list:
        m90[S] = next((m for m in m_list if cells[(S, m)].probability >= 0.9), None)
    c, resid = fit_log_bound(m90, n)
    return PhaseTransitionReport(n, T, S_list, m_list, cells, m90, c, resid)
