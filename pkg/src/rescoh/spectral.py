"""Lag-window (Blackman-Tukey) auto- and cross-spectral estimation.

Spectra follow the convention

    f_xy(lambda) = 1/(2 pi) * sum_{|u| <= M} w(u) c_xy(u) exp(-i u lambda),
    c_xy(u)      = 1/n * sum_t (x(t+u) - xbar) (y(t) - ybar),

so ``f_xy`` is the density of ``E[dZ_x conj(dZ_y)]`` and ``f_yx = conj(f_xy)``.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSpectrumError, DegenerateSpectrumWarning, InvalidInputError
from .timeseries import as_series, stack

#: Autospectrum values at or below this are treated as degenerate.
SPECTRUM_FLOOR = 1e-12

TUKEY_HAMMING = "tukey-hamming"


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric grid ``-pi + k pi / half_count`` for ``k = 0, ..., 2 half_count``.

    The negative half is built as the exact negation of the positive half, so
    grid index ``k`` and ``2 half_count - k`` are exact mirror images.
    """

    half_count: int = 1000

    def __post_init__(self):
        if int(self.half_count) < 1:
            raise InvalidInputError(f"half_count must be positive, got {self.half_count}")

    @property
    def count(self) -> int:
        return 2 * self.half_count + 1

    @property
    def spacing(self) -> float:
        return np.pi / self.half_count

    @property
    def nonnegative(self) -> np.ndarray:
        return np.arange(self.half_count + 1) * (np.pi / self.half_count)

    @property
    def points(self) -> np.ndarray:
        pos = self.nonnegative
        return np.concatenate([-pos[:0:-1], pos])

    def mirror(self, index: int) -> int:
        return 2 * self.half_count - index


@dataclass(frozen=True)
class LagWindow:
    """Lag window with truncation point ``M``; only Tukey-Hamming is provided."""

    truncation: int = 10
    kind: str = TUKEY_HAMMING

    def __post_init__(self):
        if self.kind != TUKEY_HAMMING:
            raise InvalidInputError(f"unsupported lag window {self.kind!r}")
        if int(self.truncation) < 1:
            raise InvalidInputError(f"truncation must be positive, got {self.truncation}")

    def weights(self) -> np.ndarray:
        """Weights for ``u = -M, ..., M``."""
        u = np.arange(-self.truncation, self.truncation + 1)
        return np.array([window_weight(self, int(k)) for k in u])


def window_weight(w: LagWindow, u: int) -> float:
    """Tukey-Hamming weight ``0.54 + 0.46 cos(pi u / M)`` inside ``|u| <= M``."""
    if abs(u) > w.truncation:
        return 0.0
    return 0.54 + 0.46 * np.cos(np.pi * u / w.truncation)


@dataclass(frozen=True, eq=False)
class CrossSpectrum:
    """Complex spectral density sampled on a :class:`FrequencyGrid`."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.count,):
            raise InvalidInputError(
                f"expected {self.grid.count} spectrum values, got shape {values.shape}"
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def to_csv(self, fh=None) -> str:
        """Write ``lambda,re,im`` rows; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lambda", "re", "im"])
        for lam, v in zip(self.grid.points, self.values):
            writer.writerow([repr(float(lam)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue() if fh is None else ""

    @classmethod
    def from_csv(cls, text: str) -> "CrossSpectrum":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["lambda", "re", "im"]:
            raise InvalidInputError("expected header lambda,re,im")
        body = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
        half = (body.shape[0] - 1) // 2
        grid = FrequencyGrid(half)
        if body.shape[0] != grid.count or not np.allclose(body[:, 0], grid.points, atol=1e-12):
            raise InvalidInputError("rows do not form a symmetric frequency grid")
        return cls(grid, body[:, 1] + 1j * body[:, 2])


def _covariances(data: np.ndarray, max_lag: int) -> np.ndarray:
    """All pairwise biased cross-covariances, shape ``(p, p, 2 max_lag + 1)``.

    Entry ``[a, b, max_lag + u]`` is ``c_{x_a x_b}(u)``.
    """
    p, n = data.shape
    if max_lag >= n:
        raise InvalidInputError(f"max_lag {max_lag} must be smaller than series length {n}")
    xc = data - data.mean(axis=1, keepdims=True)
    out = np.empty((p, p, 2 * max_lag + 1))
    for u in range(max_lag + 1):
        c = xc[:, u:] @ xc[:, : n - u].T / n
        out[:, :, max_lag + u] = c
        out[:, :, max_lag - u] = c.T
    return out


def cross_covariance(x, y, max_lag: int) -> np.ndarray:
    """Biased sample cross-covariance ``c_xy(u)`` for ``u = -max_lag..max_lag``."""
    x = as_series(x).values
    y = as_series(y).values
    if x.size != y.size:
        raise InvalidInputError(f"series lengths differ: {x.size} vs {y.size}")
    if max_lag < 0:
        raise InvalidInputError("max_lag must be nonnegative")
    return _covariances(np.vstack([x, y]), int(max_lag))[0, 1]


def _transform(cov: np.ndarray, window: LagWindow, grid: FrequencyGrid) -> np.ndarray:
    """Windowed Fourier sum of covariances along the last axis onto ``grid``."""
    m = window.truncation
    u = np.arange(-m, m + 1)
    kernel = window.weights()[:, None] * np.exp(-1j * np.outer(u, grid.nonnegative)) / (2 * np.pi)
    pos = cov @ kernel
    # Hermitian completion: f(-lambda) = conj(f(lambda)) exactly
    neg = np.conj(pos[..., :0:-1])
    return np.concatenate([neg, pos], axis=-1)


def spectral_matrix(series: Sequence, window: LagWindow = LagWindow(), grid: FrequencyGrid = FrequencyGrid()) -> np.ndarray:
    """Estimated spectra of every ordered pair, shape ``(p, p, grid.count)``.

    Entry ``[a, b]`` is ``f_{z_a z_b}``.  The result is exactly Hermitian in
    ``(a, b)`` at every frequency, with real diagonal.
    """
    data = stack(series)
    if data.shape[1] <= window.truncation:
        raise InvalidInputError(
            f"series length {data.shape[1]} must exceed window truncation {window.truncation}"
        )
    f = _transform(_covariances(data, window.truncation), window, grid)
    p = data.shape[0]
    for a in range(p):
        f[a, a] = f[a, a].real
        for b in range(a + 1, p):
            f[b, a] = np.conj(f[a, b])
    return f


def estimate_cross_spectrum(
    x, y, window: LagWindow = LagWindow(), grid: FrequencyGrid = FrequencyGrid()
) -> CrossSpectrum:
    """Lag-window estimate of ``f_xy`` on ``grid``."""
    x = as_series(x)
    y = as_series(y)
    if len(x) != len(y):
        raise InvalidInputError(f"series lengths differ: {len(x)} vs {len(y)}")
    if len(x) <= window.truncation:
        raise InvalidInputError(
            f"series length {len(x)} must exceed window truncation {window.truncation}"
        )
    cov = cross_covariance(x, y, window.truncation)
    return CrossSpectrum(grid, _transform(cov, window, grid))


def guard_autospectrum(values, grid: FrequencyGrid, what: str = "autospectrum", on_degenerate: str = "clamp", floor: float = SPECTRUM_FLOOR) -> np.ndarray:
    """Return ``values`` (real part) made safe for use as a denominator.

    With ``on_degenerate="clamp"`` entries at or below ``floor`` are replaced
    by ``floor`` and a :class:`DegenerateSpectrumWarning` is issued; with
    ``"raise"`` a :class:`DegenerateSpectrumError` names the first offending
    frequency.
    """
    v = np.asarray(values).real.astype(float, copy=True)
    bad = np.flatnonzero(~(v > floor))
    if bad.size:
        lam = float(grid.points[bad[0]])
        msg = f"{what} is {v[bad[0]]:.3g} at lambda={lam:.6f} ({bad.size} grid points at or below {floor:g})"
        if on_degenerate == "raise":
            raise DegenerateSpectrumError(msg, frequency=lam)
        if on_degenerate != "clamp":
            raise InvalidInputError(f"on_degenerate must be 'clamp' or 'raise', got {on_degenerate!r}")
        warnings.warn(msg + "; clamped", DegenerateSpectrumWarning, stacklevel=3)
        v[bad] = floor
    return v


def coherence(fxx: CrossSpectrum, fyy: CrossSpectrum, fxy: CrossSpectrum, on_degenerate: str = "clamp") -> np.ndarray:
    """Squared coherence ``|f_xy|^2 / (f_xx f_yy)`` at every grid point."""
    if not (fxx.grid == fyy.grid == fxy.grid):
        raise InvalidInputError("spectra are on different grids")
    dx = guard_autospectrum(fxx.values, fxx.grid, "f_xx", on_degenerate)
    dy = guard_autospectrum(fyy.values, fyy.grid, "f_yy", on_degenerate)
    return np.abs(fxy.values) ** 2 / (dx * dy)
