"""Fourier-Walsh analysis of output distributions.

Coefficients use the normalised form ``h(S) = 2^-n * fwht(f)[S]``. Level k
collects the characters S supported on exactly k qubits. An independent
bit-flip channel with rates e_i multiplies h(S) by prod_{i in S} (1 - 2 e_i),
so readout noise shows up as geometric decay across levels.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import rng
from .errors import FeasibilityError, InsufficientDataError, ValidationError
from .samples import SampleSet

MAX_SPECTRAL_QUBITS = 20
WEIGHT_FLOOR = 1e-3


def fwht(values) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform, out[S] = sum_x (-1)^<S,x> in[x]."""
    a = np.array(values, dtype=float)
    if a.ndim != 1 or a.size == 0 or a.size & (a.size - 1):
        raise ValidationError(f"fwht needs a 1-d array whose length is a power of two, got {a.shape}")
    h = 1
    while h < a.size:
        v = a.reshape(-1, 2, h)
        lo = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        v[:, 1, :] = lo - v[:, 1, :]
        h *= 2
    return a


def popcounts(n: int) -> np.ndarray:
    """Hamming weight of every index in [0, 2^n)."""
    counts = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        counts = np.concatenate([counts, counts + 1])
    return counts


@dataclass(frozen=True, eq=False)
class LevelSpectrum:
    """Per-level fidelity estimates; NaN marks levels below the weight floor.

    ``std_by_level`` holds bootstrap standard deviations when computed.
    Level 0 is always NaN: both coefficients equal 2^-n there.
    """

    n: int
    phi_by_level: np.ndarray
    weights_by_level: np.ndarray
    numerators: np.ndarray
    floor: float
    std_by_level: np.ndarray | None = None

    def usable(self) -> np.ndarray:
        return ~np.isnan(self.phi_by_level)

    def band(self, sigmas: float = 3.0):
        if self.std_by_level is None:
            raise ValidationError("spectrum has no bootstrap bands")
        return self.phi_by_level - sigmas * self.std_by_level, self.phi_by_level + sigmas * self.std_by_level

    def weighted_fidelity(self) -> float:
        """sum_k phi_k w_k / sum_k w_k over k >= 1, ignoring the floor.

        Equals F_XEB / (2^n sum p^2 - 1) for the same samples.
        """
        return float(self.numerators[1:].sum() / self.weights_by_level[1:].sum())


def _level_sums(coef_q: np.ndarray, coef_p: np.ndarray, levels: np.ndarray, n: int):
    num = np.bincount(levels, weights=coef_q * coef_p, minlength=n + 1)
    return num


def _phi(num: np.ndarray, weights: np.ndarray, floor: float) -> np.ndarray:
    phi = np.full(weights.size, np.nan)
    ok = weights > floor
    ok[0] = False
    phi[ok] = num[ok] / weights[ok]
    return phi


def level_fidelity(samples: SampleSet, probs, *, bootstrap: int = 0, seed: int = 0,
                   floor_fraction: float = WEIGHT_FLOOR) -> LevelSpectrum:
    """Per-level normalised cross-correlation between the sample histogram and ``probs``.

    phi_k = sum_{|S|=k} hq(S) hp(S) / sum_{|S|=k} hp(S)^2 for k >= 1. With
    ``bootstrap > 0`` the histogram is resampled multinomially that many
    times and the per-level standard deviation is stored.
    """
    n = samples.n
    if n > MAX_SPECTRAL_QUBITS:
        raise FeasibilityError(f"spectral analysis needs the full transform; limited to n <= {MAX_SPECTRAL_QUBITS}")
    if len(samples) == 0:
        raise ValidationError("no samples")
    probs = np.asarray(probs, dtype=float)
    if probs.size != 2**n:
        raise ValidationError("probability array does not match the sample width")
    scale = 2.0**-n
    levels = popcounts(n)
    coef_p = fwht(probs) * scale
    weights = np.bincount(levels, weights=coef_p**2, minlength=n + 1)
    floor = floor_fraction * weights[1:].max() if n > 0 else 0.0

    counts = np.bincount(samples.indices, minlength=2**n)
    num = _level_sums(fwht(counts / len(samples)) * scale, coef_p, levels, n)
    phi = _phi(num, weights, floor)

    std = None
    if bootstrap > 0:
        r = rng.stream(seed, "spectral-bootstrap")
        freq = counts / len(samples)
        reps = np.empty((bootstrap, n + 1))
        for b in range(bootstrap):
            resampled = r.multinomial(len(samples), freq) / len(samples)
            reps[b] = _phi(_level_sums(fwht(resampled) * scale, coef_p, levels, n), weights, floor)
        std = reps.std(axis=0, ddof=1)
    return LevelSpectrum(n, phi, weights, num, floor, std)


def _subset_products(r: np.ndarray) -> np.ndarray:
    """prod_{i in S} r_i for every S, first rate on the most significant bit."""
    out = np.ones(1)
    for ri in r:
        out = np.kron(out, np.array([1.0, ri]))
    return out


def readout_decay_curve(phi: float, eq, n: int, reference_probs=None) -> np.ndarray:
    """Predicted per-level fidelity phi * <prod_{i in S} (1 - 2 e_i)>_{|S|=k}.

    The average is uniform over the C(n, k) subsets, or weighted by hp(S)^2
    when ``reference_probs`` is given. Levels with no weight get NaN.
    """
    rates = np.full(n, float(eq)) if np.isscalar(eq) else np.asarray(eq, dtype=float)
    if rates.size != n:
        raise ValidationError(f"need {n} readout rates, got {rates.size}")
    if ((rates < 0) | (rates > 0.5)).any():
        raise ValidationError("readout rates must lie in [0, 0.5]")
    r = 1.0 - 2.0 * rates
    if reference_probs is None:
        # elementary symmetric polynomials of r, divided by C(n, k)
        esym = np.zeros(n + 1)
        esym[0] = 1.0
        for ri in r:
            esym[1:] = esym[1:] + ri * esym[:-1]
        return phi * esym / np.array([math.comb(n, k) for k in range(n + 1)])
    if n > MAX_SPECTRAL_QUBITS:
        raise FeasibilityError(f"weighted decay curve limited to n <= {MAX_SPECTRAL_QUBITS}")
    coef = fwht(np.asarray(reference_probs, dtype=float)) * 2.0**-n
    levels = popcounts(n)
    w = np.bincount(levels, weights=coef**2, minlength=n + 1)
    num = np.bincount(levels, weights=coef**2 * _subset_products(r), minlength=n + 1)
    out = np.full(n + 1, np.nan)
    out[w > 0] = phi * num[w > 0] / w[w > 0]
    return out


class _SecondaryFitBase(NamedTuple):
    phi_hat: float
    e_hat: float


class SecondaryFit(_SecondaryFitBase):
    """(phi_hat, e_hat) from the log-linear level fit.

    ``fidelity`` is the fit's prediction of the readout-inclusive fidelity,
    phi_hat * sum_k w_k (1 - 2 e_hat)^k / sum_k w_k over k >= 1. That is the
    quantity F_XEB / (2^n sum p^2 - 1) estimates, so it is the one to compare
    with the primary estimator. ``levels`` lists the levels used.
    """

    def __new__(cls, phi_hat, e_hat, fidelity=math.nan, levels=()):
        self = super().__new__(cls, phi_hat, e_hat)
        self.fidelity = fidelity
        self.levels = tuple(levels)
        return self


def fit_secondary_fidelity(spectrum: LevelSpectrum, k_range=None) -> SecondaryFit:
    """Least-squares fit of log phi_k = log phi + k log(1 - 2e) over ``k_range`` (inclusive)."""
    lo, hi = k_range if k_range is not None else (1, spectrum.n)
    k = np.arange(spectrum.n + 1)
    phi = spectrum.phi_by_level
    with np.errstate(invalid="ignore"):
        use = (k >= max(lo, 1)) & (k <= hi) & spectrum.usable() & (phi > 0)
    if use.sum() < 3:
        raise InsufficientDataError(f"{int(use.sum())} usable levels in {lo}..{hi}, need at least 3")
    slope, intercept = np.polyfit(k[use], np.log(phi[use]), 1)
    phi_hat = math.exp(intercept)
    decay = math.exp(slope)
    e_hat = (1.0 - decay) / 2.0
    w = spectrum.weights_by_level[1:]
    fidelity = phi_hat * float(w @ decay ** k[1:]) / float(w.sum())
    return SecondaryFit(phi_hat, e_hat, fidelity, k[use].tolist())


def spectrum_csv(spectrum: LevelSpectrum, sigmas: float = 3.0) -> str:
    """CSV with columns k, phi_k, weight_k, band_lo, band_hi; absent values are empty."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "phi_k", "weight_k", "band_lo", "band_hi"])
    lo = hi = None
    if spectrum.std_by_level is not None:
        lo, hi = spectrum.band(sigmas)

    def fmt(x):
        return "" if x is None or not math.isfinite(x) else repr(float(x))

    for k in range(spectrum.n + 1):
        w.writerow([k, fmt(spectrum.phi_by_level[k]), fmt(spectrum.weights_by_level[k]),
                    fmt(None if lo is None else lo[k]), fmt(None if hi is None else hi[k])])
    return buf.getvalue()
