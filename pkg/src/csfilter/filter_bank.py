"""Chebyshev lowpass responses and the band plan of the compressive sensing filter.

The filter is a cascade of lowpass sections with decreasing cutoffs, each
followed by a delay line.  Only the analytic magnitude of each section is
modelled; phase comes from the per-band delays applied in
:mod:`csfilter.sensing`.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, GridError, RangeError, SpecError, StepError

__all__ = [
    "FilterSpec",
    "FrequencyResponse",
    "BandPlan",
    "chebyshev_poly",
    "design_chebyshev",
    "build_band_plan",
    "per_bin_band_plan",
    "bank_to_json",
    "bank_from_dict",
    "bank_from_json",
    "save_bank",
    "load_bank",
    "write_response_csv",
    "write_bank_csv",
]


@dataclass(frozen=True)
class FilterSpec:
    order: int = 9
    ripple_db: float = 1.0
    cutoff_hz: float = 3e9

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise SpecError(f"filter order must be a positive integer, got {self.order!r}")
        if not self.ripple_db > 0:
            raise SpecError(f"ripple_db must be positive, got {self.ripple_db!r}")
        if not self.cutoff_hz > 0:
            raise SpecError(f"cutoff_hz must be positive, got {self.cutoff_hz!r}")

    @property
    def epsilon(self) -> float:
        return math.sqrt(10.0 ** (self.ripple_db / 10.0) - 1.0)

    @property
    def ripple_floor(self) -> float:
        """Passband minimum gain, reached at the cutoff."""
        return 10.0 ** (-self.ripple_db / 20.0)

    def with_cutoff(self, cutoff_hz: float) -> "FilterSpec":
        return FilterSpec(self.order, self.ripple_db, float(cutoff_hz))


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    grid_hz: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.grid_hz.shape != self.values.shape or self.grid_hz.size < 2:
            raise GridError("grid and values must have equal length >= 2")

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.values)


@dataclass(frozen=True, eq=False)
class BandPlan:
    """Cutoffs (strictly decreasing) and one delay per band.

    ``delays_s[k]`` is the round-trip delay of the line behind section ``k``;
    the factor two of the reflected path is already folded in.
    """

    cutoffs_hz: np.ndarray
    delays_s: np.ndarray
    seed: int = 0

    def __post_init__(self):
        cut = np.asarray(self.cutoffs_hz, dtype=float)
        tau = np.asarray(self.delays_s, dtype=float)
        if cut.ndim != 1 or cut.size < 1:
            raise SpecError("band plan needs at least one cutoff")
        if tau.shape != cut.shape:
            raise SpecError("delays and cutoffs must have the same length")
        if np.any(np.diff(cut) >= 0):
            raise SpecError("cutoffs must be strictly decreasing")
        if np.any(cut <= 0) or np.any(tau < 0):
            raise SpecError("cutoffs must be positive and delays non-negative")
        cut.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "cutoffs_hz", cut)
        object.__setattr__(self, "delays_s", tau)

    @property
    def n_bands(self) -> int:
        return self.cutoffs_hz.size

    def band_index(self, freq_hz) -> np.ndarray:
        """Band owning each frequency: cutoffs[k] >= f > cutoffs[k+1].

        Frequencies at or below the lowest cutoff go to the last band and
        frequencies above the highest cutoff go to band 0.
        """
        f = np.asarray(freq_hz, dtype=float)
        ascending = self.cutoffs_hz[::-1]
        n_at_or_above = self.n_bands - np.searchsorted(ascending, f, side="left")
        return np.clip(n_at_or_above - 1, 0, self.n_bands - 1)


def chebyshev_poly(order: int, x) -> np.ndarray:
    """Chebyshev polynomial of the first kind by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    t_prev, t = np.ones_like(x), x.copy()
    if order == 0:
        return t_prev
    for _ in range(order - 1):
        t_prev, t = t, 2.0 * x * t - t_prev
    return t


def _log_abs_chebyshev(order: int, x: np.ndarray) -> np.ndarray:
    # log|T_order(x)| for |x| > 1 without overflow: cosh(u) = e^u (1 + e^-2u) / 2
    u = order * np.arccosh(np.abs(x))
    return u + np.log1p(np.exp(-2.0 * u)) - math.log(2.0)


def chebyshev_magnitude(spec: FilterSpec, freq_hz) -> np.ndarray:
    x = np.asarray(freq_hz, dtype=float) / spec.cutoff_hz
    mag = np.empty_like(x)
    inside = np.abs(x) <= 1.0
    t_in = np.cos(spec.order * np.arccos(x[inside]))
    mag[inside] = 1.0 / np.sqrt(1.0 + spec.epsilon**2 * t_in**2)
    log_et = math.log(spec.epsilon) + _log_abs_chebyshev(spec.order, x[~inside])
    mag[~inside] = np.exp(-0.5 * np.logaddexp(0.0, 2.0 * log_et))
    return mag


def design_chebyshev(spec: FilterSpec, grid_hz) -> FrequencyResponse:
    """Ideal Chebyshev type-I lowpass sampled on ``grid_hz`` (zero phase).

    Gain is ``1 / sqrt(1 + eps^2 T_N(f/fc)^2)`` with ``eps^2 = 10^(ripple/10) - 1``.
    Outside the passband the polynomial is evaluated as a cosh in the log
    domain, so very high orders and far stopband frequencies do not overflow.
    """
    grid = np.asarray(grid_hz, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise GridError("frequency grid must be a non-empty 1-D vector")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise GridError("frequency grid must be non-negative and increasing")
    if grid.size < 2:
        raise GridError("frequency grid needs at least two points")
    mag = chebyshev_magnitude(spec, grid)
    return FrequencyResponse(grid, mag.astype(complex))


def build_band_plan(
    f_hi: float,
    f_lo: float,
    step: float,
    delay_max_s: float | None = None,
    seed: int = 0,
) -> BandPlan:
    """Cutoffs ``f_hi, f_hi - step, ..., f_lo`` with i.i.d. uniform delays.

    ``delay_max_s`` defaults to ``1 / step``, one full phase wrap across a
    band.  Delays come from ``numpy.random.default_rng(seed)``.
    """
    if not step > 0:
        raise StepError(f"step must be positive, got {step!r}")
    if not f_lo > 0:
        raise RangeError(f"f_lo must be positive, got {f_lo!r}")
    if f_lo > f_hi:
        raise RangeError(f"f_lo ({f_lo:g} Hz) exceeds f_hi ({f_hi:g} Hz)")
    if delay_max_s is None:
        delay_max_s = 1.0 / step
    if not delay_max_s > 0:
        raise SpecError(f"delay_max_s must be positive, got {delay_max_s!r}")
    if seed < 0:
        raise SpecError("seed must be unsigned")
    # 1e-9 slack keeps (4e9 - 2e9) / 2e8 from flooring to 9
    n_bands = math.floor((f_hi - f_lo) / step + 1e-9) + 1
    cutoffs = f_hi - step * np.arange(n_bands)
    delays = np.random.default_rng(seed).uniform(0.0, delay_max_s, n_bands)
    return BandPlan(cutoffs, delays, int(seed))


def per_bin_band_plan(
    n: int, sample_rate_hz: float, seed: int = 0, center_hz: float | None = None
) -> BandPlan:
    """Plan with one band per DFT bin, edges at half-bin offsets.

    This is the fine limit of the filter bank: every bin gets its own delay,
    which is what the random-convolution operator needs.  With ``center_hz``
    the plan covers the complex-baseband band ``center +- sample_rate/2``;
    otherwise it covers the positive half of a real signal's spectrum.
    """
    df = sample_rate_hz / n
    if center_hz is None:
        if n < 2:
            raise SpecError("per-bin plan needs n >= 2")
        f_hi, f_lo = ((n - 1) // 2 + 0.5) * df, 0.5 * df
    else:
        f_hi = center_hz + ((n - 1) // 2 + 0.5) * df
        f_lo = center_hz - (n // 2 - 0.5) * df
    return build_band_plan(f_hi, f_lo, df, 1.0 / df, seed)


def bank_to_json(spec: FilterSpec, plan: BandPlan) -> str:
    doc = {
        "order": spec.order,
        "ripple_db": spec.ripple_db,
        "cutoffs_hz": plan.cutoffs_hz.tolist(),
        "delays_s": plan.delays_s.tolist(),
        "seed": plan.seed,
    }
    return json.dumps(doc, indent=2) + "\n"


def bank_from_dict(doc: dict) -> tuple[FilterSpec, BandPlan]:
    try:
        cutoffs = np.asarray(doc["cutoffs_hz"], dtype=float)
        plan = BandPlan(cutoffs, np.asarray(doc["delays_s"], dtype=float), int(doc["seed"]))
        spec = FilterSpec(int(doc["order"]), float(doc["ripple_db"]), float(cutoffs[0]))
    except (KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"not a band plan document: {exc!r}") from exc
    return spec, plan


def bank_from_json(text: str) -> tuple[FilterSpec, BandPlan]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid band plan JSON: {exc}") from exc
    return bank_from_dict(doc)


def save_bank(path, spec: FilterSpec, plan: BandPlan) -> None:
    Path(path).write_text(bank_to_json(spec, plan))


def load_bank(path) -> tuple[FilterSpec, BandPlan]:
    return bank_from_json(Path(path).read_text())


def write_response_csv(path, response: FrequencyResponse) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "mag", "phase_rad"])
        for f, mag, ph in zip(response.grid_hz, response.magnitude, response.phase):
            w.writerow([repr(float(f)), repr(float(mag)), repr(float(ph))])


def write_bank_csv(path, spec: FilterSpec, plan: BandPlan, grid_hz) -> list[FrequencyResponse]:
    """One magnitude column per section, ``mag_<cutoff_hz>``, in plan order."""
    responses = [design_chebyshev(spec.with_cutoff(c), grid_hz) for c in plan.cutoffs_hz]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz"] + [f"mag_{c:.6g}" for c in plan.cutoffs_hz])
        mags = np.column_stack([r.magnitude for r in responses])
        for f, row in zip(np.asarray(grid_hz, dtype=float), mags):
            w.writerow([repr(float(f))] + [repr(float(v)) for v in row])
    return responses
