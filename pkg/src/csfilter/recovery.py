"""Sparse recovery: l1 proximal gradient, orthogonal matching pursuit, l0 enumeration.

All solvers see the composite dictionary ``A = Phi @ Psi`` through fast
matvecs.  When the operator is real (conjugate-symmetric gains, spike basis,
real data) they run in real arithmetic on half-spectrum FFTs.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, cg

from .basis import SparsityBasis
from .errors import (
    DegenerateDictionaryError,
    DimensionError,
    InstabilityError,
    SizeError,
    SpecError,
)
from .sensing import SensingOperator, apply_forward, materialize

__all__ = [
    "SparsityBasis",
    "SparseSignal",
    "SolverConfig",
    "RecoveryResult",
    "Dictionary",
    "soft_threshold",
    "solve_l1",
    "solve_omp",
    "l0_oracle",
    "L0_GUARD",
]

L0_GUARD = 10**6
POWER_ROUNDS = 50
POWER_TOL = 1e-6
# power iteration approaches the top eigenvalue from below
LIPSCHITZ_SAFETY = 1.05
DIVERGENCE_STREAK = 10


@dataclass(frozen=True, eq=False)
class SparseSignal:
    coeffs: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        off = np.ones(self.coeffs.size, dtype=bool)
        off[list(self.support)] = False
        if np.any(self.coeffs[off] != 0):
            raise SpecError("coefficients must vanish outside the support")

    @property
    def S(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`solve_l1`.

    ``lam=None`` picks ``1e-4 * ||A^H y||_inf``, close to basis pursuit for
    noiseless data.
    """

    lam: float | None = None
    max_iters: int = 5000
    tol: float = 1e-7
    debias: bool = True

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise SpecError("lambda must be non-negative")
        if self.max_iters < 1:
            raise SpecError("max_iters must be at least 1")
        if not self.tol > 0:
            raise SpecError("tol must be positive")


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    alpha_hat: np.ndarray
    x_hat: np.ndarray
    residual_l2: float
    iters: int
    converged: bool
    support: tuple[int, ...] = ()
    trace: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        coeffs = self.alpha_hat[list(self.support)]
        return {
            "support": list(self.support),
            "coefficients": np.column_stack([coeffs.real, coeffs.imag]).tolist(),
            "residual_l2": self.residual_l2,
            "iters": self.iters,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


def soft_threshold(v, thresh: float) -> np.ndarray:
    """Proximal map of ``thresh * ||.||_1``; shrinks magnitudes, keeps phases."""
    v = np.asarray(v)
    mag = np.abs(v)
    if not np.iscomplexobj(v):
        return np.sign(v) * np.maximum(mag - thresh, 0.0)
    scale = np.maximum(mag - thresh, 0.0) / np.where(mag > 0, mag, 1.0)
    return v * scale


class Dictionary:
    """Fast products with ``A = Phi @ Psi`` and its adjoint."""

    def __init__(self, op: SensingOperator, basis: SparsityBasis, real: bool = False):
        if basis.n != op.n:
            raise DimensionError("basis and operator disagree on n")
        if real and not (basis.is_real and op.transfer.is_conjugate_symmetric):
            raise SpecError("real arithmetic needs a spike basis and a symmetric transfer")
        self.op, self.basis, self.real = op, basis, real
        self.n, self.m = op.n, op.m
        self.idx = op.mask.indices
        g = op.transfer.gains
        if real:
            self._g = g[: self.n // 2 + 1].copy()
        else:
            self._g = g
        self._gc = np.conj(self._g)
        self.dtype = float if real else complex

    @classmethod
    def for_data(cls, op: SensingOperator, basis: SparsityBasis, y) -> "Dictionary":
        y = np.asarray(y)
        # imaginary rounding noise from a real forward pass is discarded
        real = (
            basis.is_real
            and op.transfer.is_conjugate_symmetric
            and float(np.max(np.abs(np.imag(y)), initial=0.0))
            <= 1e-10 * max(float(np.linalg.norm(y)), 1e-300)
        )
        return cls(op, basis, real)

    def matvec(self, alpha):
        if self.real:
            return sfft.irfft(self._g * sfft.rfft(alpha), self.n)[self.idx]
        if self.basis.kind == "identity":
            return sfft.ifft(self._g * sfft.fft(alpha))[self.idx]
        return sfft.ifft(self._g * alpha, norm="ortho")[self.idx]

    def rmatvec(self, r):
        z = np.zeros(self.n, dtype=self.dtype)
        z[self.idx] = r
        if self.real:
            return sfft.irfft(self._gc * sfft.rfft(z), self.n)
        if self.basis.kind == "identity":
            return sfft.ifft(self._gc * sfft.fft(z))
        return self._gc * sfft.fft(z, norm="ortho")

    def column_norms(self) -> np.ndarray:
        """Euclidean norm of every column of ``A`` without materializing it."""
        g = self.op.transfer.gains
        if self.basis.kind == "dft":
            return np.abs(g) * math.sqrt(self.m / self.n)
        weights = np.zeros(self.n)
        weights[self.idx] = 1.0
        power = np.abs(sfft.ifft(g)) ** 2
        sq = sfft.ifft(sfft.fft(weights) * np.conj(sfft.fft(power))).real
        return np.sqrt(np.maximum(sq, 0.0))

    def restricted(self, support) -> LinearOperator:
        """Normal-equation operator ``A_S^H A_S`` on the given support."""
        support = np.asarray(support, dtype=np.int64)
        k = support.size

        def normal(c):
            full = np.zeros(self.n, dtype=self.dtype)
            full[support] = np.ravel(c)
            return self.rmatvec(self.matvec(full))[support]

        return LinearOperator((k, k), matvec=normal, dtype=self.dtype)

    def least_squares(self, y, support, x0=None, rtol: float = 1e-10) -> np.ndarray:
        """Coefficients on ``support`` minimizing ``||y - A_S c||`` (CG on normal equations)."""
        support = np.asarray(support, dtype=np.int64)
        rhs = self.rmatvec(y)[support]
        c, _ = cg(self.restricted(support), rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=4 * self.n)
        return c

    def operator_norm_sq(self) -> float:
        """Largest eigenvalue of ``A^H A``; exactly bounded by 1 for unit-modulus gains."""
        if self.op.is_unit_modulus:
            return 1.0
        rng = np.random.default_rng(0)
        v = rng.standard_normal(self.n)
        if not self.real:
            v = v + 1j * rng.standard_normal(self.n)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(POWER_ROUNDS):
            w = self.rmatvec(self.matvec(v))
            new = float(np.linalg.norm(w))
            if new == 0.0:
                return 0.0
            v = w / new
            if abs(new - est) <= POWER_TOL * new:
                est = new
                break
            est = new
        return est * LIPSCHITZ_SAFETY


def _finish(op, basis, y, alpha, iters, converged, support, trace=()) -> RecoveryResult:
    alpha = np.asarray(alpha, dtype=complex)
    x_hat = np.asarray(basis.synthesize(alpha), dtype=complex)
    residual = float(np.linalg.norm(np.asarray(y) - apply_forward(op, x_hat)))
    return RecoveryResult(
        alpha, x_hat, residual, int(iters), bool(converged), tuple(int(j) for j in support), tuple(trace)
    )


def _check_data(op: SensingOperator, basis: SparsityBasis, y) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (op.m,):
        raise DimensionError(f"expected {op.m} measurements, got shape {y.shape}")
    if basis.n != op.n:
        raise DimensionError("basis and operator disagree on n")
    return y


def solve_l1(
    op: SensingOperator,
    basis: SparsityBasis,
    y,
    cfg: SolverConfig = SolverConfig(),
    support_tol: float = 1e-6,
) -> RecoveryResult:
    """Minimize ``0.5 ||y - A a||^2 + lam ||a||_1`` by monotone FISTA.

    A candidate step is accepted only if it does not raise the objective, so
    the recorded objective trace is non-increasing.  Iteration stops when the
    relative change between successive candidates drops to ``cfg.tol``.  With
    ``cfg.debias`` the entries above ``10 * lam`` are refit by least squares.
    ``support_tol`` (relative to the largest coefficient) defines the
    reported support.
    """
    y = _check_data(op, basis, y)
    A = Dictionary.for_data(op, basis, y)
    y = y.real.astype(float) if A.real else y.astype(complex)

    lam = cfg.lam
    if lam is None:
        lam = 1e-4 * float(np.max(np.abs(A.rmatvec(y)))) if y.size else 0.0
    lip = A.operator_norm_sq()
    step = 1.0 / lip if lip > 0 else 1.0

    x = np.zeros(A.n, dtype=A.dtype)
    ax = np.zeros(A.m, dtype=A.dtype)
    f_zero = 0.5 * float(np.vdot(y, y).real)
    f_x = f_zero
    v, av = x, ax
    z_prev = x
    f_z_prev = f_x
    t = 1.0
    rising = 0
    converged = False
    trace = [f_x]
    it = 0
    for it in range(1, cfg.max_iters + 1):
        grad = A.rmatvec(av - y)
        z = soft_threshold(v - step * grad, step * lam)
        az = A.matvec(z)
        res = az - y
        f_z = 0.5 * float(np.vdot(res, res).real) + lam * float(np.sum(np.abs(z)))

        rising = rising + 1 if f_z > f_z_prev else 0
        if rising >= DIVERGENCE_STREAK and f_z > f_zero:
            raise InstabilityError(
                f"objective rose for {rising} consecutive iterations with step {step:.6g}"
            )
        f_z_prev = f_z

        if f_z <= f_x:
            x_new, ax_new, f_x = z, az, f_z
        else:
            x_new, ax_new = x, ax
        trace.append(f_x)

        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        a, b = t / t_new, (t - 1.0) / t_new
        v = x_new + a * (z - x_new) + b * (x_new - x)
        av = ax_new + a * (az - ax_new) + b * (ax_new - ax)

        dz = float(np.linalg.norm(z - z_prev))
        nz = float(np.linalg.norm(z))
        x, ax, t, z_prev = x_new, ax_new, t_new, z
        if dz <= cfg.tol * nz or (nz == 0.0 and dz == 0.0):
            converged = True
            break

    alpha = x
    if cfg.debias:
        keep = np.flatnonzero(np.abs(alpha) > 10.0 * lam)
        if 0 < keep.size <= A.m:
            refit = np.zeros_like(alpha)
            refit[keep] = A.least_squares(y, keep, x0=alpha[keep])
            alpha = refit

    peak = float(np.max(np.abs(alpha))) if alpha.size else 0.0
    support = np.flatnonzero(np.abs(alpha) > support_tol * peak) if peak > 0 else []
    return _finish(op, basis, y, alpha, it, converged, support, trace)


def solve_omp(
    op: SensingOperator,
    basis: SparsityBasis,
    y,
    S_max: int,
    tol: float = 1e-8,
) -> RecoveryResult:
    """Greedy atom selection with a least-squares refit after every pick."""
    y = _check_data(op, basis, y)
    if not 1 <= S_max <= op.m:
        raise SpecError(f"S_max must lie in [1, m={op.m}], got {S_max}")
    A = Dictionary.for_data(op, basis, y)
    y = y.real.astype(float) if A.real else y.astype(complex)
    norms = A.column_norms()
    safe = np.where(norms >= 1e-12, norms, 1.0)

    target = tol * float(np.linalg.norm(y))
    support: list[int] = []
    coef = np.zeros(0, dtype=A.dtype)
    r = y.copy()
    while len(support) < S_max and float(np.linalg.norm(r)) > target:
        scores = np.abs(A.rmatvec(r)) / safe
        scores[support] = -np.inf
        j = int(np.argmax(scores))
        if norms[j] < 1e-12:
            raise DegenerateDictionaryError(f"selected column {j} has norm {norms[j]:.3g}")
        support.append(j)
        coef = A.least_squares(y, support, x0=np.append(coef, 0.0))
        full = np.zeros(A.n, dtype=A.dtype)
        full[support] = coef
        r = y - A.matvec(full)

    alpha = np.zeros(A.n, dtype=complex)
    alpha[support] = coef
    converged = float(np.linalg.norm(r)) <= target
    return _finish(op, basis, y, alpha, len(support), converged, support)


def l0_oracle(op: SensingOperator, basis: SparsityBasis, y, S: int) -> RecoveryResult:
    """Exhaustive search over every support of size <= S.

    Each support is fit by dense least squares on the explicit matrix, which
    keeps this path independent of the FFT operators used by the solvers.
    Smaller supports win ties.
    """
    y = _check_data(op, basis, y)
    n = op.n
    if not 0 <= S <= n:
        raise SpecError(f"S must lie in [0, n={n}]")
    count = sum(math.comb(n, s) for s in range(S + 1))
    if math.comb(n, S) > L0_GUARD:
        raise SizeError(f"C({n}, {S}) = {math.comb(n, S)} supports exceeds the guard {L0_GUARD}")
    M = materialize(op) @ basis.matrix()
    y = y.astype(complex)
    margin = 1e-12 * max(float(np.linalg.norm(y)), 1.0)
    best_res, best_sup, best_coef = float(np.linalg.norm(y)), (), np.zeros(0, complex)
    for s in range(1, S + 1):
        for sup in itertools.combinations(range(n), s):
            cols = M[:, sup]
            coef = np.linalg.lstsq(cols, y, rcond=None)[0]
            res = float(np.linalg.norm(y - cols @ coef))
            if res < best_res - margin:
                best_res, best_sup, best_coef = res, sup, coef
    alpha = np.zeros(n, dtype=complex)
    alpha[list(best_sup)] = best_coef
    return _finish(op, basis, y, alpha, count, True, best_sup)
