"""The measurement operator: band-wise delayed transfer function, then sampling.

A signal of length ``n`` is circularly convolved with the filter's impulse
response (a pointwise product in the DFT domain) and ``m`` of the ``n``
output samples are kept.  All DFTs use the unitary convention.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .basis import SparsityBasis
from .errors import AliasingError, DimensionError, FormatError, SizeError, SpecError
from .filter_bank import BandPlan, FilterSpec, chebyshev_magnitude

MODES = ("ideal", "filterbank")
SCHEMES = ("uniform_grid", "random_subset")
COHERENCE_MAX_N = 4096


@dataclass(frozen=True, eq=False)
class Transfer:
    n: int
    gains: np.ndarray
    mode: str = "ideal"

    def __post_init__(self):
        g = np.array(self.gains, dtype=complex)
        if g.shape != (self.n,):
            raise DimensionError(f"expected {self.n} gains, got shape {g.shape}")
        if self.mode not in MODES:
            raise SpecError(f"mode must be one of {MODES}")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @classmethod
    def identity(cls, n: int) -> "Transfer":
        return cls(n, np.ones(n, dtype=complex), "ideal")

    @property
    def is_conjugate_symmetric(self) -> bool:
        g = self.gains
        return bool(np.allclose(g[1:], np.conj(g[:0:-1]), rtol=0, atol=1e-12)) and abs(
            g[0].imag
        ) <= 1e-12

    @property
    def max_modulus_deviation(self) -> float:
        return float(np.max(np.abs(np.abs(self.gains) - 1.0)))

    def kernel(self) -> np.ndarray:
        """Impulse response h with (h * x)[t] = sum_s h[s] x[t - s]."""
        return sfft.ifft(self.gains)


@dataclass(frozen=True, eq=False)
class SampleMask:
    n: int
    indices: np.ndarray
    scheme: str = "uniform_grid"
    seed: int = 0

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 1 or not 1 <= idx.size <= self.n:
            raise SizeError(f"mask needs 1 <= m <= n={self.n} indices")
        if np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.n:
            raise SizeError("mask indices must be sorted, distinct and inside [0, n)")
        if self.scheme not in SCHEMES:
            raise SpecError(f"scheme must be one of {SCHEMES}")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return self.indices.size


@dataclass(frozen=True, eq=False)
class SensingOperator:
    transfer: Transfer
    mask: SampleMask

    def __post_init__(self):
        if self.transfer.n != self.mask.n:
            raise DimensionError("transfer and mask disagree on n")

    @property
    def n(self) -> int:
        return self.transfer.n

    @property
    def m(self) -> int:
        return self.mask.m

    @property
    def is_unit_modulus(self) -> bool:
        return self.transfer.max_modulus_deviation <= 1e-12

    def convolve(self, x) -> np.ndarray:
        """Full-rate filter output before sampling."""
        return sfft.ifft(self.transfer.gains * sfft.fft(x, norm="ortho"), norm="ortho")

    def forward(self, x) -> np.ndarray:
        return apply_forward(self, x)

    def adjoint(self, y) -> np.ndarray:
        return apply_adjoint(self, y)


def bin_frequencies(n: int, sample_rate_hz: float, center_hz: float | None = None) -> np.ndarray:
    """Physical frequency of each DFT bin.

    Real signals: ``j * fs / n`` for the non-negative half ``j <= n // 2``.
    Complex baseband: ``center + fftfreq`` for all ``n`` bins.
    """
    if center_hz is None:
        return np.arange(n // 2 + 1) * (sample_rate_hz / n)
    return center_hz + sfft.fftfreq(n, 1.0 / sample_rate_hz)


def _check_band(n: int, plan: BandPlan, sample_rate_hz: float, center_hz: float | None):
    if n < 2:
        raise SizeError("signal length must be at least 2")
    if not sample_rate_hz > 0:
        raise SpecError("sample rate must be positive")
    if center_hz is None:
        top = sample_rate_hz / 2
    else:
        if center_hz - sample_rate_hz / 2 <= 0:
            raise SpecError("baseband centre must exceed half the sample rate")
        top = center_hz + sample_rate_hz / 2
    if plan.cutoffs_hz[0] > top * (1 + 1e-12):
        raise AliasingError(
            f"highest cutoff {plan.cutoffs_hz[0]:g} Hz exceeds the band edge {top:g} Hz"
        )


def _complete(half: np.ndarray, n: int, unit: bool) -> np.ndarray:
    """Mirror gains for bins 0..n//2 into a conjugate-symmetric length-n vector."""
    half = half.copy()
    # DC and (for even n) Nyquist are their own mirrors and must be real
    self_mirrored = [0, n // 2] if n % 2 == 0 else [0]
    for j in self_mirrored:
        re = half[j].real
        half[j] = (1.0 if re >= 0 else -1.0) if unit else re
    g = np.empty(n, dtype=complex)
    g[: n // 2 + 1] = half
    g[n // 2 + 1 :] = np.conj(half[1 : (n + 1) // 2][::-1])
    return g


def assemble_ideal_transfer(
    n: int, plan: BandPlan, sample_rate_hz: float, center_hz: float | None = None
) -> Transfer:
    """Unit-modulus transfer: bin ``j`` in band ``k`` gets ``exp(-2j pi f_j tau_k)``.

    Without ``center_hz`` the signal is real and the gains are mirrored
    conjugate-symmetrically.  With ``center_hz`` the bins are the complex
    baseband image of the RF band around ``center_hz`` and every bin keeps its
    own phase (no symmetry).
    """
    _check_band(n, plan, sample_rate_hz, center_hz)
    f = bin_frequencies(n, sample_rate_hz, center_hz)
    tau = plan.delays_s[plan.band_index(f)]
    gains = np.exp(-2j * np.pi * f * tau)
    if center_hz is None:
        gains = _complete(gains, n, unit=True)
    return Transfer(n, gains, "ideal")


def filterbank_sections(
    freq_hz: np.ndarray, plan: BandPlan, spec: FilterSpec
) -> np.ndarray:
    """Section responses D_k = H(c_k) - H(c_{k+1}), one row per band.

    ``H(c)`` is the Chebyshev lowpass at cutoff ``c``; the lowest section is
    the narrowest lowpass alone.  Rows sum to the widest lowpass.
    """
    lowpass = np.array([chebyshev_magnitude(spec.with_cutoff(c), freq_hz) for c in plan.cutoffs_hz])
    sections = lowpass.copy()
    sections[:-1] -= lowpass[1:]
    return sections


def assemble_filterbank_transfer(
    n: int,
    plan: BandPlan,
    spec: FilterSpec,
    sample_rate_hz: float,
    center_hz: float | None = None,
) -> Transfer:
    """Cascade of Chebyshev sections, each behind its own delay line."""
    _check_band(n, plan, sample_rate_hz, center_hz)
    f = bin_frequencies(n, sample_rate_hz, center_hz)
    sections = filterbank_sections(np.abs(f), plan, spec)
    phases = np.exp(-2j * np.pi * np.outer(plan.delays_s, f))
    gains = np.sum(sections * phases, axis=0)
    if center_hz is None:
        gains = _complete(gains, n, unit=False)
    return Transfer(n, gains, "filterbank")


def inband_deviation(
    transfer: Transfer, plan: BandPlan, sample_rate_hz: float, center_hz: float | None = None
) -> float:
    """max ||g_j| - 1| over bins at or below the highest cutoff."""
    f = bin_frequencies(transfer.n, sample_rate_hz, center_hz)
    g = transfer.gains[: f.size]
    covered = np.abs(f) <= plan.cutoffs_hz[0]
    return float(np.max(np.abs(np.abs(g[covered]) - 1.0)))


def notch_fraction(
    transfer: Transfer,
    plan: BandPlan,
    sample_rate_hz: float,
    center_hz: float | None = None,
    level: float = 0.5,
) -> float:
    """Share of covered bins whose gain deviates from unity by more than ``level``.

    Neighbouring sections overlap near each crossover and their delays are
    unrelated, so a deep notch can appear at any order; raising the order
    shrinks how many bins fall inside such crossovers.
    """
    f = bin_frequencies(transfer.n, sample_rate_hz, center_hz)
    g = transfer.gains[: f.size]
    covered = np.abs(f) <= plan.cutoffs_hz[0]
    return float(np.mean(np.abs(np.abs(g[covered]) - 1.0) > level))


def make_mask(n: int, m: int, scheme: str = "uniform_grid", seed: int = 0) -> SampleMask:
    """Measurement positions: every ``n // m``-th sample, or a seeded random subset."""
    if not 1 <= m:
        raise SizeError(f"need at least one measurement, got m={m}")
    if m > n:
        raise SizeError(f"m={m} exceeds n={n}")
    if scheme == "uniform_grid":
        idx = np.arange(m) * (n // m)
    elif scheme == "random_subset":
        idx = np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))
    else:
        raise SpecError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return SampleMask(n, idx, scheme, int(seed))


def apply_forward(op: SensingOperator, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (op.n,):
        raise DimensionError(f"expected a length-{op.n} signal, got shape {x.shape}")
    return op.convolve(x)[op.mask.indices]


def apply_adjoint(op: SensingOperator, y) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (op.m,):
        raise DimensionError(f"expected {op.m} measurements, got shape {y.shape}")
    z = np.zeros(op.n, dtype=complex)
    z[op.mask.indices] = y
    return sfft.ifft(np.conj(op.transfer.gains) * sfft.fft(z, norm="ortho"), norm="ortho")


def materialize(op: SensingOperator) -> np.ndarray:
    """Dense m x n matrix of the operator; row k is the k-th sensing waveform."""
    if op.n > COHERENCE_MAX_N:
        raise SizeError(
            f"n={op.n} is too large to materialize (limit {COHERENCE_MAX_N}); "
            "use apply_forward/apply_adjoint instead"
        )
    eye = np.eye(op.n)
    full = sfft.ifft(op.transfer.gains[:, None] * sfft.fft(eye, axis=0), axis=0)
    return full[op.mask.indices]


def coherence(op: SensingOperator, basis: SparsityBasis) -> float:
    """Largest normalized inner product between a sensing row and a basis vector."""
    if basis.n != op.n:
        raise DimensionError("basis and operator disagree on n")
    phi = materialize(op)
    gram = np.abs(phi @ basis.matrix())
    gram /= np.linalg.norm(phi, axis=1)[:, None]
    return float(gram.max())


def spreading_ratio(transfer: Transfer, position: int = 0) -> float:
    """l_inf / l_2 of the filter output for a unit spike at ``position``."""
    spike = np.zeros(transfer.n)
    spike[position] = 1.0
    out = sfft.ifft(transfer.gains * sfft.fft(spike))
    return float(np.max(np.abs(out)) / np.linalg.norm(out))


def _interleave(z: np.ndarray) -> list[float]:
    return np.column_stack([z.real, z.imag]).ravel().tolist()


def operator_to_dict(op: SensingOperator) -> dict:
    t, mk = op.transfer, op.mask
    return {
        "transfer": {"n": t.n, "mode": t.mode, "gains": _interleave(t.gains)},
        "mask": {"n": mk.n, "indices": mk.indices.tolist(), "scheme": mk.scheme, "seed": mk.seed},
    }


def operator_from_dict(doc: dict) -> SensingOperator:
    try:
        t, mk = doc["transfer"], doc["mask"]
        pairs = np.asarray(t["gains"], dtype=float).reshape(-1, 2)
        transfer = Transfer(int(t["n"]), pairs[:, 0] + 1j * pairs[:, 1], t["mode"])
        mask = SampleMask(int(mk["n"]), mk["indices"], mk["scheme"], int(mk["seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (SizeError, DimensionError, SpecError)):
            raise
        raise FormatError(f"not a sensing operator document: {exc}") from exc
    return SensingOperator(transfer, mask)


def save_operator(path, op: SensingOperator) -> None:
    Path(path).write_text(json.dumps(operator_to_dict(op)) + "\n")


def load_operator(path) -> SensingOperator:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    return operator_from_dict(doc)
