"""Frequency-domain orthogonal decomposition of an output into input components.

For inputs ``X_1, ..., X_k`` and output ``Y`` the k-th component is

    dZ_{G_k} = A_k * sum_j c_{k,j} dZ_{X_j},      c_{k,k} = 1,

where the ``c_{k,j}`` make ``G_k`` orthogonal to ``X_1, ..., X_{k-1}`` and
``A_k`` projects ``Y`` on the combination.  The ``c`` are obtained by Cramer's
rule on the leading ``(k-1) x (k-1)`` block of the input spectral matrix.

Matrix convention: ``input_cross[i, j]`` holds ``f_{X_j X_i}``.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ClampedComponentWarning,
    DegenerateComponentError,
    InconsistentSystemError,
    InvalidInputError,
    SingularSystemError,
)
from .spectral import FrequencyGrid, LagWindow, guard_autospectrum, spectral_matrix

#: Relative floor on ``|det F_k|`` against the diagonal scale.
SINGULAR_RTOL = 1e-10
#: Absolute floor on the component normaliser ``sum_j c_j f_{X_j X_k}``.
COMPONENT_FLOOR = 1e-12
#: Tolerance for imaginary residue and for negative component spectra.
COMPONENT_RTOL = 1e-8
HERMITIAN_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralSystem:
    """Input and output spectra of a k-input system on a frequency grid.

    Attributes
    ----------
    grid : FrequencyGrid
    input_cross : ndarray, shape (k, k, G), complex
        ``input_cross[i, j] = f_{X_j X_i}``; Hermitian in ``(i, j)``.
    input_output : ndarray, shape (k, G), complex
        ``input_output[j] = f_{X_j Y}``.
    output_auto : ndarray, shape (G,), real
        ``f_YY``.
    lags : tuple, optional
        Lags that generated the inputs, carried as metadata.
    """

    grid: FrequencyGrid
    input_cross: np.ndarray
    input_output: np.ndarray
    output_auto: np.ndarray
    lags: Optional[Tuple] = None

    def __post_init__(self):
        fx = np.asarray(self.input_cross, dtype=complex)
        fxy = np.asarray(self.input_output, dtype=complex)
        fyy = np.asarray(self.output_auto)
        g = self.grid.count
        if fx.ndim != 3 or fx.shape[0] != fx.shape[1] or fx.shape[2] != g:
            raise InvalidInputError(f"input_cross must have shape (k, k, {g}), got {fx.shape}")
        k = fx.shape[0]
        if k < 1:
            raise InvalidInputError("a spectral system needs at least one input")
        if fxy.shape != (k, g):
            raise InvalidInputError(f"input_output must have shape ({k}, {g}), got {fxy.shape}")
        if fyy.shape != (g,):
            raise InvalidInputError(f"output_auto must have shape ({g},), got {fyy.shape}")
        scale = max(float(np.max(np.abs(fx[np.arange(k), np.arange(k)]))), 1.0)
        asym = np.max(np.abs(fx - np.conj(np.swapaxes(fx, 0, 1))))
        if asym > HERMITIAN_TOL * scale:
            raise InvalidInputError(f"input_cross is not Hermitian (max deviation {asym:.3g})")
        if np.max(np.abs(np.imag(fyy))) > HERMITIAN_TOL * max(float(np.max(np.abs(fyy))), 1.0):
            raise InvalidInputError("output_auto must be real")
        for name, arr in (("input_cross", fx), ("input_output", fxy)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        fyy = np.real(fyy).astype(float)
        fyy.setflags(write=False)
        object.__setattr__(self, "output_auto", fyy)
        if self.lags is not None:
            object.__setattr__(self, "lags", tuple(self.lags))

    @property
    def k(self) -> int:
        return self.input_cross.shape[0]

    @classmethod
    def from_spectra(cls, f: np.ndarray, grid: FrequencyGrid, lags=None) -> "SpectralSystem":
        """Build from a joint matrix ``f[a, b] = f_{z_a z_b}`` with ``Y`` last."""
        f = np.asarray(f)
        k = f.shape[0] - 1
        return cls(
            grid,
            np.swapaxes(f[:k, :k], 0, 1),
            f[:k, k],
            f[k, k].real,
            lags,
        )

    @classmethod
    def from_series(cls, inputs: Sequence, y, window: LagWindow = LagWindow(), grid: FrequencyGrid = FrequencyGrid(), lags=None) -> "SpectralSystem":
        """Estimate every spectrum needed for ``Y`` on ``inputs``."""
        f = spectral_matrix(list(inputs) + [y], window, grid)
        return cls.from_spectra(f, grid, lags)

    def subsystem(self, m: int) -> "SpectralSystem":
        """System restricted to the first ``m`` inputs."""
        if not 1 <= m <= self.k:
            raise InvalidInputError(f"m must be in [1, {self.k}], got {m}")
        lags = None if self.lags is None else self.lags[:m]
        return SpectralSystem(self.grid, self.input_cross[:m, :m], self.input_output[:m], self.output_auto, lags)

    def scaled_output(self, factor: float) -> "SpectralSystem":
        """System for ``factor * Y``."""
        return SpectralSystem(
            self.grid, self.input_cross, factor * self.input_output, factor**2 * self.output_auto, self.lags
        )


@dataclass(frozen=True)
class ComponentCoefficients:
    """Coefficients of the k-th component at one or more frequencies.

    ``c[..., j]`` is ``c_{k,j+1}`` (so ``c[..., k-1] == 1``); ``a_k1`` is
    ``A_{k,1}``.  The transfer function of ``G_k`` on ``X_j`` is
    ``c_{k,j} A_{k,1}``.
    """

    k: int
    c: np.ndarray
    a_k1: Optional[np.ndarray] = None

    def transfer(self) -> np.ndarray:
        if self.a_k1 is None:
            raise InvalidInputError("A_{k,1} not computed")
        return self.c * np.asarray(self.a_k1)[..., None]


def _det(m: np.ndarray) -> np.ndarray:
    """Determinants of a stack of square complex matrices, shape ``(..., r, r)``.

    Gaussian elimination with partial pivoting, vectorised over the stack.
    """
    a = np.array(m, dtype=complex, copy=True)
    r = a.shape[-1]
    batch = a.shape[:-2]
    a = a.reshape((-1, r, r))
    det = np.ones(a.shape[0], dtype=complex)
    rows = np.arange(a.shape[0])
    for col in range(r):
        piv = col + np.argmax(np.abs(a[:, col:, col]), axis=1)
        swap = piv != col
        if np.any(swap):
            tmp = a[rows[swap], col].copy()
            a[rows[swap], col] = a[rows[swap], piv[swap]]
            a[rows[swap], piv[swap]] = tmp
            det[swap] = -det[swap]
        p = a[:, col, col]
        det = det * p
        safe = np.where(p == 0, 1.0, p)
        if col + 1 < r:
            factors = a[:, col + 1 :, col] / safe[:, None]
            a[:, col + 1 :, col:] -= factors[:, :, None] * a[:, col, col:][:, None, :]
    return det.reshape(batch)


def _index(sys: SpectralSystem, frequency_index):
    if frequency_index is None:
        return slice(None)
    idx = np.atleast_1d(np.asarray(frequency_index))
    if np.any((idx < 0) | (idx >= sys.grid.count)):
        raise InvalidInputError(f"frequency index out of range [0, {sys.grid.count})")
    return idx


def _shape(values: np.ndarray, frequency_index, axis: int = 0) -> np.ndarray:
    """Drop the frequency axis again when a single index was asked for."""
    if frequency_index is not None and np.ndim(frequency_index) == 0:
        return np.take(values, 0, axis=axis)
    return values


def _first(mask: np.ndarray, sys: SpectralSystem, frequency_index) -> float:
    pos = int(np.flatnonzero(np.atleast_1d(mask))[0])
    if frequency_index is None:
        return float(sys.grid.points[pos])
    return float(sys.grid.points[np.atleast_1d(frequency_index)[pos]])


def cramer_coefficients(sys: SpectralSystem, frequency_index=None, k: Optional[int] = None) -> ComponentCoefficients:
    """Cramer's-rule coefficients ``c_{k,1..k}`` of component ``k``.

    ``c_{k,j} = det F_{k,j} / det F_k`` where ``F_k`` is the leading
    ``(k-1) x (k-1)`` block of ``input_cross`` and ``F_{k,j}`` has its j-th
    column replaced by ``-[f_{1,k}, ..., f_{k-1,k}]``.

    Parameters
    ----------
    sys : SpectralSystem
    frequency_index : int or array of int, optional
        Grid indices to evaluate; the whole grid when omitted.
    k : int, optional
        Component number, defaults to ``sys.k``.

    Raises
    ------
    SingularSystemError
        If ``|det F_k|`` falls below ``1e-10`` times the geometric mean of the
        diagonal magnitudes raised to ``k - 1``.
    """
    k = sys.k if k is None else int(k)
    if not 1 <= k <= sys.k:
        raise InvalidInputError(f"component number must be in [1, {sys.k}], got {k}")
    idx = _index(sys, frequency_index)
    fx = np.moveaxis(sys.input_cross[:, :, idx], -1, 0)  # (..., k, k)
    shape = fx.shape[:-2]
    c = np.zeros(shape + (k,), dtype=complex)
    c[..., k - 1] = 1.0
    if k == 1:
        return ComponentCoefficients(1, _shape(c, frequency_index))
    r = k - 1
    fk = fx[..., :r, :r]
    rhs = -fx[..., :r, r]
    det_f = _det(fk)
    diag = np.abs(np.diagonal(fk, axis1=-2, axis2=-1))
    with np.errstate(divide="ignore"):
        scale = np.exp(np.mean(np.log(diag), axis=-1)) ** r
    bad = ~(np.abs(det_f) >= SINGULAR_RTOL * scale) | (scale == 0)
    if np.any(bad):
        lam = _first(bad, sys, frequency_index)
        raise SingularSystemError(
            f"input spectral matrix of order {r} is singular at lambda={lam:.6f} (lags {sys.lags})",
            frequency=lam,
            lags=sys.lags,
        )
    for j in range(r):
        fkj = fk.copy()
        fkj[..., :, j] = rhs
        c[..., j] = _det(fkj) / det_f
    return ComponentCoefficients(k, _shape(c, frequency_index))


def _component_denominator(sys: SpectralSystem, coef: ComponentCoefficients, idx) -> np.ndarray:
    k = coef.k
    row = np.moveaxis(sys.input_cross[k - 1, :k][:, idx], 0, -1)  # f_{X_j X_k}
    return np.sum(coef.c * row, axis=-1)


def a_coefficient(sys: SpectralSystem, coef: ComponentCoefficients, frequency_index=None) -> np.ndarray:
    """``A_{k,1} = conj(sum_j c_{k,j} f_{X_j Y} / sum_j c_{k,j} f_{X_j X_k})``."""
    idx = _index(sys, frequency_index)
    k = coef.k
    num = np.sum(coef.c * np.moveaxis(sys.input_output[:k][:, idx], 0, -1), axis=-1)
    den = _component_denominator(sys, coef, idx)
    bad = np.abs(den) < COMPONENT_FLOOR
    if np.any(bad):
        lam = _first(bad, sys, frequency_index)
        raise DegenerateComponentError(
            f"component {k} normaliser vanishes at lambda={lam:.6f} (lags {sys.lags})", frequency=lam
        )
    return _shape(np.conj(num / den), frequency_index)


def component_spectrum(sys: SpectralSystem, coef: ComponentCoefficients, a_k1=None, frequency_index=None, _record=None) -> np.ndarray:
    """Spectrum ``|A_{k,1}|^2 sum_j c_{k,j} f_{X_j X_k}`` of component ``k``.

    Small negative values (down to ``-1e-8 f_YY``) are clamped to 0 with a
    :class:`ClampedComponentWarning`.

    Raises
    ------
    InconsistentSystemError
        If the normaliser has an imaginary part above ``1e-8`` relative, or the
        spectrum is negative beyond the clamping tolerance.
    """
    idx = _index(sys, frequency_index)
    if a_k1 is None:
        a_k1 = a_coefficient(sys, coef, frequency_index)
    den = _component_denominator(sys, coef, idx)
    resid = np.abs(den.imag) > COMPONENT_RTOL * np.abs(den)
    if np.any(resid):
        lam = _first(resid, sys, frequency_index)
        raise InconsistentSystemError(
            f"component {coef.k} spectrum is not real at lambda={lam:.6f}", frequency=lam
        )
    val = np.abs(a_k1) ** 2 * den.real
    neg = val < 0
    if np.any(neg):
        scale = np.abs(sys.output_auto[idx])
        if np.any(val[neg] < -COMPONENT_RTOL * scale[neg]):
            lam = _first(neg & (val < -COMPONENT_RTOL * scale), sys, frequency_index)
            raise InconsistentSystemError(
                f"component {coef.k} spectrum is negative at lambda={lam:.6f} (lags {sys.lags})",
                frequency=lam,
            )
        msg = f"clamped {int(np.count_nonzero(neg))} small negative values of component {coef.k}"
        if _record is not None:
            _record.append(msg)
        warnings.warn(msg, ClampedComponentWarning, stacklevel=2)
        val = np.where(neg, 0.0, val)
    return _shape(val, frequency_index)


def explained_spectrum_direct(sys: SpectralSystem, m: int, frequency_index=None) -> np.ndarray:
    """Spectrum of ``Y`` explained by regressing on the first ``m`` inputs.

    ``H_m = f_v^H S_m^{-1} f_v`` with ``S_m[i, j] = f_{X_i X_j}`` and
    ``f_v = [f_{X_1 Y}, ..., f_{X_m Y}]``, via a LAPACK solve.  Independent of
    the Cramer recursion and used to check it.
    """
    if not 1 <= m <= sys.k:
        raise InvalidInputError(f"m must be in [1, {sys.k}], got {m}")
    idx = _index(sys, frequency_index)
    s = np.moveaxis(sys.input_cross[:m, :m][:, :, idx], -1, 0)
    s = np.swapaxes(s, -1, -2)
    fv = np.moveaxis(sys.input_output[:m][:, idx], 0, -1)
    if np.any(np.linalg.cond(s) > 1.0 / SINGULAR_RTOL):
        raise SingularSystemError(f"leading {m}x{m} block is singular", lags=sys.lags)
    try:
        sol = np.linalg.solve(s, fv[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"leading {m}x{m} block is singular: {exc}", lags=sys.lags) from exc
    return _shape(np.real(np.sum(np.conj(fv) * sol, axis=-1)), frequency_index)


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    """Component spectra ``f_{G_j G_j}`` and the lagged coherence of a system."""

    grid: FrequencyGrid
    component_spectra: np.ndarray
    output_auto: np.ndarray
    lags: Optional[Tuple] = None
    notes: Tuple[str, ...] = field(default=())

    @property
    def k(self) -> int:
        return self.component_spectra.shape[0]

    def cumulative(self, m: int) -> np.ndarray:
        """``sum_{j <= m} f_{G_j G_j}``."""
        return np.sum(self.component_spectra[:m], axis=0)

    def lagged_coherence(self, m: Optional[int] = None) -> np.ndarray:
        """``S_m`` on the grid (``S_k`` by default)."""
        m = self.k if m is None else m
        if not 0 <= m <= self.k:
            raise InvalidInputError(f"m must be in [0, {self.k}], got {m}")
        return self.cumulative(m) / self.output_auto

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda"] + [f"f_G{j + 1}" for j in range(self.k)] + [f"S_{self.k}"])
        s = self.lagged_coherence()
        for i, lam in enumerate(self.grid.points):
            w.writerow([repr(float(lam))] + [repr(float(v)) for v in self.component_spectra[:, i]] + [repr(float(s[i]))])
        return buf.getvalue()


def decompose(sys: SpectralSystem, on_degenerate: str = "clamp") -> DecompositionResult:
    """All component spectra of ``sys`` over the full grid.

    ``f_YY`` is guarded against non-positive values according to
    ``on_degenerate`` (see :func:`rescoh.spectral.guard_autospectrum`).
    """
    fyy = guard_autospectrum(sys.output_auto, sys.grid, "f_YY", on_degenerate)
    notes = []
    comps = np.empty((sys.k, sys.grid.count))
    for k in range(1, sys.k + 1):
        coef = cramer_coefficients(sys, k=k)
        a = a_coefficient(sys, coef)
        comps[k - 1] = component_spectrum(sys, coef, a, _record=notes)
    comps.setflags(write=False)
    fyy.setflags(write=False)
    return DecompositionResult(sys.grid, comps, fyy, sys.lags, tuple(notes))


def lagged_coherence(sys: SpectralSystem, m: Optional[int] = None, on_degenerate: str = "clamp") -> np.ndarray:
    """``S_m(lambda) = sum_{j <= m} f_{G_j G_j} / f_YY`` (``m = k`` by default)."""
    m = sys.k if m is None else m
    return decompose(sys.subsystem(m), on_degenerate).lagged_coherence()


def _baseline(sys: SpectralSystem, baseline_m) -> int:
    m = sys.k - 1 if baseline_m is None else int(baseline_m)
    if not 0 <= m < sys.k:
        raise InvalidInputError(f"baseline_m must be in [0, {sys.k - 1}], got {m}")
    return m


def residual_coherence(sys: SpectralSystem, baseline_m: Optional[int] = None, result: Optional[DecompositionResult] = None, on_degenerate: str = "clamp") -> float:
    """``max_lambda [S_k(lambda) - S_m(lambda)]`` over the grid.

    ``baseline_m`` defaults to ``k - 1``.  A precomputed ``result`` for the
    same system may be passed to avoid recomputation.
    """
    m = _baseline(sys, baseline_m)
    res = decompose(sys, on_degenerate) if result is None else result
    return float(np.max(res.lagged_coherence() - res.lagged_coherence(m)))


def riemann_sum(values, grid: FrequencyGrid) -> float:
    """``sum_{k=1}^{2H} values[k] * pi / H``, omitting the ``-pi`` endpoint."""
    v = np.asarray(values)
    return float(np.sum(v[1:]) * grid.spacing)


def integrated_spectrum(sys: SpectralSystem, baseline_m: Optional[int] = None, result: Optional[DecompositionResult] = None, on_degenerate: str = "clamp") -> float:
    """Riemann sum of the added components' spectra ``sum_{j > m} f_{G_j G_j}``."""
    m = _baseline(sys, baseline_m)
    res = decompose(sys, on_degenerate) if result is None else result
    return riemann_sum(np.sum(res.component_spectra[m:], axis=0), sys.grid)


def residual_power(result: DecompositionResult) -> float:
    """Estimated ``E eps^2 = int f_YY - int sum_j f_{G_j G_j}``."""
    return riemann_sum(result.output_auto, result.grid) - riemann_sum(result.cumulative(result.k), result.grid)
