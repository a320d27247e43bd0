"""Stroboscopic evolution, autocorrelation sequences and FFT spectrum retrieval.

For a_n = <phi|F^n|phi> = sum_j w_j exp(-i n eps_j) the transform with a
positive exponent, A_k = sum_n a_n exp(+2 pi i k n / N) / N, peaks at
k = eps_j N / (2 pi), so bin k maps directly to phase 2 pi k / N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import find_peaks

from .errors import NonPowerOfTwo
from .spectrum import TWO_PI, circular_distance, eigenphases


@dataclass
class AutocorrelationSequence:
    """a_n for n = 1..N."""

    values: np.ndarray
    initial_state_tag: str = ""
    params: object = None
    norm_drift: float = 0.0

    def __len__(self):
        return len(self.values)


def autocorrelation(F: np.ndarray, phi0: np.ndarray, n_seq: int, tag: str = "", params=None) -> AutocorrelationSequence:
    """Record <phi0|F^n|phi0> by repeated matrix-vector products."""
    phi0 = np.asarray(phi0, dtype=complex)
    if abs(np.linalg.norm(phi0) - 1) > 1e-12:
        raise ValueError("initial state must be normalized")
    psi = phi0.copy()
    out = np.empty(n_seq, dtype=complex)
    for n in range(n_seq):
        psi = F @ psi
        out[n] = np.vdot(phi0, psi)
    drift = abs(np.linalg.norm(psi) - 1.0)
    return AutocorrelationSequence(out, tag, params, drift)


@dataclass
class PowerSpectrum:
    phases: np.ndarray
    power: np.ndarray
    amplitude: np.ndarray = field(repr=False)
    n_seq: int = 0
    padded: bool = False

    @property
    def resolution(self) -> float:
        return TWO_PI / len(self.phases)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def fft_spectrum(seq, pad: bool = False, window: Optional[str] = None) -> PowerSpectrum:
    """Power |A_k|^2 on the phase grid 2 pi k / N, normalized to unit sum.

    Lengths that are not powers of two raise :class:`NonPowerOfTwo` unless
    ``pad`` is set; padding prepends a_0 = 1 and zero-fills to the next power
    of two. ``window="hann"`` tapers the sequence first.
    """
    a = np.asarray(seq.values if isinstance(seq, AutocorrelationSequence) else seq, dtype=complex)
    n = len(a)
    padded = False
    if not _is_power_of_two(n):
        if not pad:
            raise NonPowerOfTwo(f"sequence length {n} is not a power of two")
        a = np.concatenate([[1.0 + 0j], a])
        size = 1 << (len(a) - 1).bit_length()
        a = np.concatenate([a, np.zeros(size - len(a), dtype=complex)])
        padded = True
    if window == "hann":
        a = a * np.hanning(len(a))
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    # a_n starts at n = 1; the shift only rotates the phase of each bin
    amp = np.fft.ifft(a)
    power = np.abs(amp) ** 2
    total = power.sum()
    if total > 0:
        power = power / total
    N = len(a)
    return PowerSpectrum(TWO_PI * np.arange(N) / N, power, np.abs(amp), n, padded)


def spectral_peaks(spec: PowerSpectrum, factor: float = 3.0) -> np.ndarray:
    """Phases of local maxima (circularly) above ``factor`` times the median power."""
    p = spec.power
    thresh = factor * np.median(p)
    # wrap one bin on each side so maxima at 0 and 2pi are seen
    ext = np.concatenate([p[-1:], p, p[:1]])
    idx, _ = find_peaks(ext, height=thresh)
    idx = idx - 1
    idx = idx[(idx >= 0) & (idx < len(p))]
    return spec.phases[np.unique(idx)]


@dataclass
class OverlapWeights:
    phases: np.ndarray
    weights: np.ndarray

    def resynthesize(self, n_seq: int) -> np.ndarray:
        n = np.arange(1, n_seq + 1)
        return np.exp(-1j * np.outer(n, self.phases)) @ self.weights


def overlap_weights(F: np.ndarray, phi0: np.ndarray) -> OverlapWeights:
    """(eps_j, |<phi0|psi_j>|^2) sorted by eps."""
    s = eigenphases(F, want_vectors=True)
    w = np.abs(s.vectors.conj().T @ np.asarray(phi0, dtype=complex)) ** 2
    return OverlapWeights(s.phases, w)


def peak_errors(peaks: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Circular distance from each peak to the nearest of ``phases``."""
    if len(peaks) == 0:
        return np.zeros(0)
    return circular_distance(peaks[:, None], phases[None, :]).min(axis=1)


def weighted_peak_error(spec: PowerSpectrum, ref: OverlapWeights) -> float:
    """Power-weighted mean distance between bin phases and the nearest
    weighted eigenphase, over the detected peaks."""
    peaks = spectral_peaks(spec)
    if len(peaks) == 0:
        return math.inf
    idx = np.rint(peaks / spec.resolution).astype(int) % len(spec.power)
    err = peak_errors(peaks, ref.phases[ref.weights > 0])
    return float(np.sum(err * spec.power[idx]) / np.sum(spec.power[idx]))
