"""Series container, preprocessing transforms and the synthetic generators.

All random draws go through :class:`numpy.random.Generator` backed by PCG64,
so a given seed reproduces the same bits on any platform with the same numpy
major version.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidInputError

#: Time points dropped in front of the synthesized output so every lagged
#: term of the simulation model exists with margin.
OUTPUT_MARGIN = 10

#: Coefficients of x1(t), x2(t), x1(t-2)x2(t-1), x1(t)x2(t-4).
MODEL_COEFFICIENTS = (0.4, 0.3, 0.4, 0.3)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Series:
    """A regularly sampled real series, optionally carrying calendar dates.

    Parameters
    ----------
    values : array_like of float
        Observations, at least one, all finite.
    dates : array_like of datetime64 or date, optional
        Calendar dates, same length as ``values`` and strictly increasing.
    name : str, optional
        Label used by the CLI and in regression column names.
    """

    values: np.ndarray
    dates: Optional[np.ndarray] = None
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidInputError(f"series must be one-dimensional, got shape {values.shape}")
        if values.size < 1:
            raise InvalidInputError("series must contain at least one value")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("series contains missing or non-finite values")
        object.__setattr__(self, "values", _freeze(values))
        if self.dates is not None:
            dates = np.asarray(self.dates, dtype="datetime64[D]")
            if dates.shape != values.shape:
                raise InvalidInputError(
                    f"dates length {dates.size} does not match values length {values.size}"
                )
            if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
                raise InvalidInputError("dates must be strictly increasing")
            object.__setattr__(self, "dates", _freeze(dates))

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        if not np.array_equal(self.values, other.values):
            return False
        if (self.dates is None) != (other.dates is None):
            return False
        return self.dates is None or np.array_equal(self.dates, other.dates)

    __hash__ = None

    def with_values(self, values, dates=None) -> "Series":
        return Series(values, dates, name=self.name)

    def slice(self, start: int, stop: int) -> "Series":
        dates = None if self.dates is None else self.dates[start:stop]
        return Series(self.values[start:stop], dates, name=self.name)


def as_series(x, name=None) -> Series:
    """Coerce arrays, lists and pandas objects to :class:`Series`."""
    if isinstance(x, Series):
        return x
    dates = None
    if hasattr(x, "index") and hasattr(x, "to_numpy"):
        index = x.index
        if np.issubdtype(np.asarray(index).dtype, np.datetime64):
            dates = np.asarray(index, dtype="datetime64[D]")
        if name is None:
            name = getattr(x, "name", None)
        x = x.to_numpy(dtype=float)
    return Series(np.asarray(x, dtype=float), dates, name=name)


def difference(s) -> Series:
    """First difference ``s[t+1] - s[t]``; dates move to the later endpoint."""
    s = as_series(s)
    if len(s) < 2:
        raise InvalidInputError("difference needs at least two observations")
    dates = None if s.dates is None else s.dates[1:]
    return Series(np.diff(s.values), dates, name=s.name)


def center(s) -> Series:
    """Subtract the sample mean."""
    s = as_series(s)
    v = s.values
    out = v - v.mean()
    # second pass removes the rounding left by the first
    out = out - out.mean()
    return Series(out, s.dates, name=s.name)


@dataclass(frozen=True)
class Ar1Spec:
    """Parameters of ``X(t) = phi X(t-1) + noise_sd * e(t)``."""

    phi: float
    noise_sd: float = 1.0
    length: int = 1010
    burn_in: int = 10
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.phi) or abs(self.phi) >= 1:
            raise InvalidInputError(f"AR(1) requires |phi| < 1, got {self.phi}")
        if not self.noise_sd > 0:
            raise InvalidInputError(f"noise_sd must be positive, got {self.noise_sd}")
        if int(self.length) < 1:
            raise InvalidInputError(f"length must be positive, got {self.length}")
        if int(self.burn_in) < 0:
            raise InvalidInputError(f"burn_in must be nonnegative, got {self.burn_in}")


def simulate_ar1(spec: Ar1Spec) -> Series:
    """Draw one AR(1) path.

    The recursion starts from a draw of the stationary distribution, runs
    ``burn_in + length`` steps and discards the first ``burn_in`` values.
    """
    rng = np.random.default_rng(spec.seed)
    total = int(spec.burn_in) + int(spec.length)
    shocks = rng.standard_normal(total) * spec.noise_sd
    x0 = rng.standard_normal() * spec.noise_sd / np.sqrt(1.0 - spec.phi**2)
    out, _ = lfilter([1.0], [1.0, -spec.phi], shocks, zi=[spec.phi * x0])
    return Series(out[int(spec.burn_in):])


def synthesize_output(x1, x2, noise_sd: float = 1.0, seed: int = 0) -> Series:
    """Output of the quadratic test system.

    ``y(t) = 0.4 x1(t) + 0.3 x2(t) + 0.4 x1(t-2) x2(t-1) + 0.3 x1(t) x2(t-4) + e(t)``
    evaluated for every t after the first ``OUTPUT_MARGIN`` points, so inputs
    of length N give an output of length N - 10 aligned with ``x[10:]``.
    """
    x1 = as_series(x1).values
    x2 = as_series(x2).values
    if x1.size != x2.size:
        raise InvalidInputError(f"input lengths differ: {x1.size} vs {x2.size}")
    n = x1.size
    if n <= OUTPUT_MARGIN:
        raise InvalidInputError(f"inputs need more than {OUTPUT_MARGIN} samples, got {n}")
    if noise_sd < 0:
        raise InvalidInputError("noise_sd must be nonnegative")
    t = np.arange(OUTPUT_MARGIN, n)
    a, b, c, d = MODEL_COEFFICIENTS
    y = a * x1[t] + b * x2[t] + c * x1[t - 2] * x2[t - 1] + d * x1[t] * x2[t - 4]
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        y = y + noise_sd * rng.standard_normal(t.size)
    return Series(y)


def simulate_system(
    seed: int = 0,
    n: int = 1000,
    noise_sd: float = 1.0,
    phi1: float = 0.4,
    phi2: float = 0.2,
) -> Tuple[Series, Series, Series]:
    """Generate ``(x1, x2, y)`` of the simulation study, each of length ``n``.

    Inputs are drawn with ``n + 10`` samples; the first 10 are dropped so the
    returned inputs line up with ``y``.  Three independent streams are spawned
    from ``seed``.
    """
    s1, s2, s3 = (int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(3))
    total = n + OUTPUT_MARGIN
    x1 = simulate_ar1(Ar1Spec(phi1, 1.0, total, seed=s1))
    x2 = simulate_ar1(Ar1Spec(phi2, 1.0, total, seed=s2))
    y = synthesize_output(x1, x2, noise_sd=noise_sd, seed=s3)
    return (
        Series(x1.values[OUTPUT_MARGIN:], name="x1"),
        Series(x2.values[OUTPUT_MARGIN:], name="x2"),
        Series(y.values, name="y"),
    )


def stack(series: Sequence) -> np.ndarray:
    """Stack equally long series into a ``(k, n)`` float array."""
    arrays = [as_series(s).values for s in series]
    lengths = {a.size for a in arrays}
    if len(lengths) > 1:
        raise InvalidInputError(f"series lengths differ: {sorted(lengths)}")
    return np.vstack(arrays)
