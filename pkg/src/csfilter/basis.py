"""Orthonormal sparsity frames: spikes (identity) or the unitary DFT."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import SpecError

KINDS = ("identity", "dft")


@dataclass(frozen=True)
class SparsityBasis:
    """``x = Psi @ alpha`` with ``Psi`` unitary.

    For ``dft`` the coefficients are the unitary DFT of the signal, so
    ``synthesize`` is the orthonormal inverse FFT.
    """

    kind: str = "identity"
    n: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"basis kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1:
            raise SpecError("basis dimension must be positive")

    @property
    def is_real(self) -> bool:
        return self.kind == "identity"

    def synthesize(self, alpha):
        if self.kind == "identity":
            return np.asarray(alpha)
        return sfft.ifft(alpha, norm="ortho")

    def analyze(self, x):
        if self.kind == "identity":
            return np.asarray(x)
        return sfft.fft(x, norm="ortho")

    def matrix(self) -> np.ndarray:
        eye = np.eye(self.n, dtype=complex)
        return eye if self.kind == "identity" else sfft.ifft(eye, axis=0, norm="ortho")
