"""One-sided amplitude spectrum of forecast residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import _values


@dataclass(frozen=True)
class SpectrumReport:
    frequencies: np.ndarray  # cycles per day
    amplitudes: np.ndarray
    n: int

    def energy(self) -> float:
        """Sum of squared residuals implied by the amplitudes (Parseval)."""
        a = self.amplitudes
        interior = a[1:-1] if self.n % 2 == 0 else a[1:]
        edges = a[0] ** 2 + (a[-1] ** 2 if self.n % 2 == 0 else 0.0)
        return float(self.n * (edges + 0.5 * np.sum(interior ** 2)))


def amplitude_spectrum(residual) -> SpectrumReport:
    """|DFT| / n with interior bins doubled (DC and Nyquist kept single)."""
    x = np.asarray(residual, dtype=np.float64)
    n = x.size
    amp = np.abs(np.fft.rfft(x)) / n
    if n % 2 == 0:
        amp[1:-1] *= 2.0
    else:
        amp[1:] *= 2.0
    return SpectrumReport(np.fft.rfftfreq(n, d=1.0), amp, n)


def residual_spectrum(truth, pred) -> SpectrumReport:
    y, p = _values(truth, pred)
    if y.size < 8:
        raise ValueError("residual spectrum needs at least 8 points")
    return amplitude_spectrum(p - y)
